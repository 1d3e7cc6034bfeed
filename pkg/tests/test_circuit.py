import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cos2phi.circuit import (
    CircuitParams,
    JunctionSet,
    build_hamiltonian,
    diagonalize,
    effective_arm,
    eigensystem,
    hamiltonian_from_harmonics,
    internal_mode_epr,
    operator_matrix_element,
    phase_wavefunctions,
    potential_harmonics,
    small_squid,
    sns_epr,
    total_potential,
    _arm_cosine_series,
)
from cos2phi.errors import ConfigError, InvalidArmError
from cos2phi.fourier import PeriodicPotential, fourier_decompose

from oracles import transmon_gap_asymptotic


# ---------------------------------------------------------------------------
# effective arm and small SQUID


def test_effective_arm_equal_junctions():
    arm = effective_arm(1.0, 1.0)
    assert arm.ej_sigma == 2.0
    assert arm.tau == 1.0


def test_effective_arm_paper_values():
    arm = effective_arm(42.49, 53.9)
    assert arm.ej_sigma == pytest.approx(96.39, abs=1e-12)
    # direct arithmetic: 4 * 42.49 * 53.9 / 96.39^2
    assert arm.tau == pytest.approx(9160.844 / 9291.0321, rel=1e-12)
    assert arm.tau == pytest.approx(0.9860, abs=2e-4)


def test_effective_arm_open():
    arm = effective_arm(5.0, 0.0)
    assert (arm.ej_sigma, arm.tau) == (5.0, 0.0)


def test_effective_arm_rejects_empty_and_negative():
    with pytest.raises(InvalidArmError):
        effective_arm(0.0, 0.0)
    with pytest.raises(InvalidArmError):
        effective_arm(-1.0, 2.0)


@given(
    st.floats(min_value=1e-3, max_value=1e3),
    st.floats(min_value=0.0, max_value=1e3),
)
def test_effective_arm_invariants(ej_a, ej_b):
    arm = effective_arm(ej_a, ej_b)
    assert 0.0 <= arm.tau <= 1.0
    assert arm.ej_sigma == ej_a + ej_b
    swapped = effective_arm(ej_b, ej_a)
    assert swapped.tau == pytest.approx(arm.tau, rel=1e-14)


def test_small_squid_symmetric_offset():
    _, d, delta = small_squid(35.73, 35.73, 0.378)
    assert d == 0.0
    assert delta == pytest.approx(math.pi * 0.378, abs=1e-14)


def test_small_squid_zero_flux():
    eff, d, delta = small_squid(35.73, 35.73, 0.0)
    assert eff == pytest.approx(71.46, abs=1e-12)
    assert delta == 0.0


def test_small_squid_asymmetric():
    eff, d, delta = small_squid(40.0, 30.0, 0.25)
    assert d == pytest.approx(1.0 / 7.0, rel=1e-14)
    assert eff == pytest.approx(70.0 * math.sqrt(0.5 + 0.5 / 49.0), rel=1e-13)
    assert eff == pytest.approx(50.0, rel=1e-13)
    assert delta == pytest.approx(math.pi / 4.0 + math.atan(math.tan(math.pi / 4.0) / 7.0), rel=1e-13)


def test_small_squid_matches_two_cosine_minimisation():
    # depth of E4 cos(x) + E5 cos(x - 2 pi phi_s) equals the effective energy
    e4, e5, phi_s = 40.0, 30.0, 0.25
    eff, _, _ = small_squid(e4, e5, phi_s)
    x = np.linspace(0, 2 * np.pi, 200001)
    depth = np.max(e4 * np.cos(x) + e5 * np.cos(x - 2 * np.pi * phi_s))
    assert eff == pytest.approx(depth, rel=1e-9)


def test_small_squid_delta_continuous_across_half_flux():
    # the continuous arctan branch must not jump when cos(pi phi_s) changes sign
    for d_pair in ((40.0, 30.0), (30.0, 40.0)):
        deltas = [small_squid(*d_pair, phi_s)[2] for phi_s in np.linspace(0.3, 0.7, 41)]
        steps = np.abs(np.diff(deltas))
        assert steps.max() < 0.2


def test_small_squid_requires_energy():
    with pytest.raises(InvalidArmError):
        small_squid(0.0, 0.0, 0.1)


# ---------------------------------------------------------------------------
# energy-phase relations


def test_sns_epr_values():
    arm = effective_arm(1.0, 1.0)
    assert sns_epr(arm, 0.0) == pytest.approx(-2.0, abs=1e-14)
    assert sns_epr(arm, math.pi) == pytest.approx(0.0, abs=1e-7)
    fitted = effective_arm(42.49, 53.9)
    val = sns_epr(EffArm(fitted.ej_sigma, 0.9860), math.pi)
    assert val == pytest.approx(-96.39 * math.sqrt(0.0140), abs=5e-3)


def EffArm(e, t):
    from cos2phi.circuit import EffectiveArm

    return EffectiveArm(ej_sigma=e, tau=t)


def test_internal_mode_epr_cases():
    arm = EffArm(100.0, 0.0)
    assert float(internal_mode_epr(arm, 0.0, 1.23)) == 0.0
    assert float(internal_mode_epr(arm, 0.2, 0.57)) == pytest.approx(
        math.sqrt(2.0 * 0.2 * 100.0), rel=1e-12
    )
    assert float(internal_mode_epr(EffArm(100.0, 1.0), 0.2, math.pi)) == pytest.approx(
        0.0, abs=1e-6
    )


def test_total_potential_periodicity(paper_params):
    flux = paper_params.flux(0.41, 0.38)
    phi = np.linspace(-math.pi, math.pi, 57)
    u1 = total_potential(paper_params, flux, phi)
    u2 = total_potential(paper_params, flux, phi + 2 * math.pi)
    scale = np.max(np.abs(u1))
    assert np.max(np.abs(u1 - u2)) < 1e-12 * scale


@given(
    st.floats(min_value=0.1, max_value=100.0),
    st.floats(min_value=0.1, max_value=100.0),
    st.floats(min_value=0.0, max_value=100.0),
    st.floats(min_value=-1.0, max_value=1.0),
    st.floats(min_value=-1.0, max_value=1.0),
)
def test_total_potential_periodicity_random(e1, e2, e3, bias, ctrl):
    params = CircuitParams(ec=0.2, junctions=JunctionSet(e1, e2, e3, 10.0, 7.0))
    flux = params.flux(bias, ctrl)
    phi = np.array([0.0, 0.4, -2.2, 3.0])
    u1 = total_potential(params, flux, phi)
    u2 = total_potential(params, flux, phi + 2 * math.pi)
    assert np.max(np.abs(u1 - u2)) <= 1e-12 * max(np.max(np.abs(u1)), 1.0)


def test_symmetric_arms_give_pi_periodic_potential():
    # identical effective arms at half flux: odd harmonics cancel
    params = CircuitParams(ec=0.2, junctions=JunctionSet(30.0, 10.0, 30.0, 5.0, 5.0))
    flux = params.flux(0.5, 0.0)
    left, right = params.left_arm(), params.right_arm(0.0)
    assert left.ej_sigma == right.ej_sigma and left.tau == pytest.approx(right.tau)
    phi = np.linspace(0, 2 * math.pi, 101)
    u = total_potential(params, flux, phi)
    u_shift = total_potential(params, flux, phi + math.pi)
    assert np.max(np.abs(u - u_shift)) < 1e-10 * np.max(np.abs(u))


def test_double_well_at_protected_point(paper_params):
    flux = paper_params.flux(0.5, 0.367)
    phi = np.linspace(-math.pi, math.pi, 801)
    u = total_potential(paper_params, flux, phi)
    mid = len(phi) // 2
    assert u[mid] > u[mid - 40] and u[mid] > u[mid + 40]  # local max at phi = 0
    left_min = phi[np.argmin(u[:mid])]
    right_min = phi[mid + np.argmin(u[mid:])]
    assert abs(left_min + math.pi / 2) < 0.35
    assert abs(right_min - math.pi / 2) < 0.35


# ---------------------------------------------------------------------------
# harmonics and Hamiltonian


def test_potential_harmonics_match_direct_decomposition(paper_params):
    flux = paper_params.flux(0.43, 0.39)
    pot = potential_harmonics(paper_params, flux, max_harmonic=12)
    direct = fourier_decompose(
        lambda phi: total_potential(paper_params, flux, phi), max_harmonic=12
    )
    scale = max(abs(c) for c in direct.cos_coeffs)
    for n in range(13):
        assert pot.cos_coeffs[n] == pytest.approx(direct.cos_coeffs[n], abs=1e-9 * scale)
        assert pot.sin_coeffs[n] == pytest.approx(direct.sin_coeffs[n], abs=1e-9 * scale)


def test_harmonic_cancellation_at_half_flux():
    params = CircuitParams(ec=0.2, junctions=JunctionSet(30.0, 10.0, 30.0, 5.0, 5.0))
    flux = params.flux(0.5, 0.0)
    direct = fourier_decompose(
        lambda phi: total_potential(params, flux, phi), max_harmonic=15
    )
    scale = max(abs(c) for c in direct.cos_coeffs)
    for n in range(1, 16, 2):
        assert abs(direct.cos_coeffs[n]) < 1e-10 * scale
        assert abs(direct.sin_coeffs[n]) < 1e-10 * scale


def test_kinetic_only_hamiltonian():
    params = CircuitParams(ec=0.3, junctions=JunctionSet(0, 0, 0, 0, 0))
    h = build_hamiltonian(params, params.flux(0.0, 0.0), n_charge=12)
    n = np.arange(-12, 13)
    assert np.allclose(h, np.diag(4 * 0.3 * n**2.0), atol=1e-14)


def test_single_harmonic_matches_transmon_asymptotics():
    ec = 0.25
    ej = 50 * ec
    pot = PeriodicPotential((0.0, -ej), (0.0, 0.0), residual=0.0, grid_size=0)
    h = hamiltonian_from_harmonics(pot, ec=ec, ng=0.0, n_charge=30)
    eig = eigensystem(h, 2)
    gap = eig.transition(0, 1)
    assert gap == pytest.approx(transmon_gap_asymptotic(ej, ec), rel=0.02)


def test_hermiticity_at_random_flux(paper_params):
    rng = np.random.default_rng(3)
    for _ in range(20):
        flux = paper_params.flux(rng.uniform(0, 1), rng.uniform(0, 1))
        h = build_hamiltonian(paper_params, flux, n_charge=14, max_harmonic=10)
        assert np.array_equal(h, h.conj().T)


def test_eigensystem_diagonal_input():
    h = np.diag(np.array([3.0, -1.0, 2.0, 0.5]))
    eig = eigensystem(h, 4)
    assert np.allclose(eig.energies, [-1.0, 0.5, 2.0, 3.0])


def test_eigensystem_rejects_oversized_request():
    with pytest.raises(ConfigError):
        eigensystem(np.eye(4), 5)


def test_paper_point_frequency(paper_params):
    # converged model value at the protected operating point
    eig = diagonalize(paper_params, paper_params.flux(0.5, 0.378), 40, 2)
    assert eig.transition(0, 1) == pytest.approx(0.468183, abs=2e-4)


def test_eigen_convergence_in_charge_cutoff(paper_params):
    flux = paper_params.flux(0.5, 0.378)
    e40 = diagonalize(paper_params, flux, 40, 5).energies
    e60 = diagonalize(paper_params, flux, 60, 5).energies
    assert np.max(np.abs(e40 - e60)) < 1e-6


def test_charge_dispersion_suppressed(paper_junctions):
    f01 = {}
    for ng in (0.0, 0.25, 0.5):
        params = CircuitParams(ec=0.21, junctions=paper_junctions, ng=ng)
        eig = diagonalize(params, params.flux(0.5, 0.406), 40, 2)
        f01[ng] = eig.transition(0, 1)
    ref = f01[0.0]
    assert max(abs(v - ref) / ref for v in f01.values()) < 1e-3


def test_eigenstates_normalised_orthogonal_and_phase_fixed(paper_params):
    eig = diagonalize(paper_params, paper_params.flux(0.47, 0.39), 30, 4)
    gram = eig.states.conj().T @ eig.states
    assert np.max(np.abs(gram - np.eye(4))) < 1e-8
    for k in range(4):
        col = eig.states[:, k]
        anchor = col[int(np.argmax(np.abs(col)))]
        assert anchor.real > 0
        assert abs(anchor.imag) < 1e-12


# ---------------------------------------------------------------------------
# matrix elements


def test_charge_element_on_pure_charge_state():
    h = np.diag(np.linspace(0, 8, 9))  # charge basis n = -4..4, already diagonal
    eig = eigensystem(h, 9)
    # eigenstate k is the charge state n = k - 4; pick n = 3
    val = operator_matrix_element(eig, "charge_n", 7, 7)
    assert val == pytest.approx(3.0, abs=1e-12)


def test_phase_grid_parseval(paper_params):
    eig = diagonalize(paper_params, paper_params.flux(0.5, 0.378), 40, 3)
    phi, psi = phase_wavefunctions(eig, [0, 1, 2], 2048)
    w = np.full(len(phi), phi[1] - phi[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    norms = np.sum(w[:, None] * np.abs(psi) ** 2, axis=0)
    assert np.max(np.abs(norms - 1.0)) < 1e-8


@pytest.mark.parametrize("op", ["charge_n", "phase_phi", "sin_half_phase"])
def test_elements_hermitian_symmetry(paper_params, op):
    eig = diagonalize(paper_params, paper_params.flux(0.46, 0.39), 30, 3)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        a = operator_matrix_element(eig, op, i, j)
        b = operator_matrix_element(eig, op, j, i)
        assert a == pytest.approx(np.conj(b), abs=1e-10)


def test_flux_derivative_hermitian_symmetry(paper_params):
    flux = paper_params.flux(0.46, 0.39)
    eig = diagonalize(paper_params, flux, 24, 3)
    for op in ("dH_dPhi_bias", "dH_dPhi_ctrl"):
        a = operator_matrix_element(eig, op, 0, 1, paper_params, flux)
        b = operator_matrix_element(eig, op, 1, 0, paper_params, flux)
        assert a == pytest.approx(np.conj(b), abs=1e-10 * max(1.0, abs(a)))


def test_charge_element_suppression_sequence(paper_params):
    values = []
    for ctrl in (0.406, 0.395, 0.378, 0.367):
        eig = diagonalize(paper_params, paper_params.flux(0.5, ctrl), 40, 2)
        values.append(abs(operator_matrix_element(eig, "charge_n", 0, 1)))
    assert all(values[k] > values[k + 1] for k in range(3))


def test_flux_derivative_matches_analytic_series(paper_params):
    # the right-arm cosine series rotates under the bias displacement, so
    # dH/dPhi_bias has closed-form harmonic coefficients
    flux = paper_params.flux(0.44, 0.39)
    n_charge, max_h = 30, 14
    eig = diagonalize(paper_params, flux, n_charge, 3, max_harmonic=max_h)
    right = paper_params.right_arm(flux.phi_ctrl)
    a_r = np.asarray(_arm_cosine_series(right.ej_sigma, right.tau, 0.0, max_h, 1e-10))
    n = np.arange(max_h + 1)
    delta = 2 * math.pi * flux.phi_bias
    dcos = -2 * math.pi * n * a_r * np.sin(n * delta)
    dsin = 2 * math.pi * n * a_r * np.cos(n * delta)
    pot = PeriodicPotential(tuple(dcos), tuple(dsin), residual=0.0, grid_size=0)
    # ec = 0 leaves only the potential part (the kinetic term is flux free)
    dh = hamiltonian_from_harmonics(pot, ec=0.0, ng=0.0, n_charge=n_charge)
    analytic = complex(np.conj(eig.states[:, 0]) @ dh @ eig.states[:, 1])
    fd = operator_matrix_element(
        eig, "dH_dPhi_bias", 0, 1, paper_params, flux, max_harmonic=max_h
    )
    assert fd == pytest.approx(analytic, rel=1e-6)


def test_flux_derivative_requires_context(paper_params):
    eig = diagonalize(paper_params, paper_params.flux(0.5, 0.4), 24, 2)
    with pytest.raises(ConfigError):
        operator_matrix_element(eig, "dH_dPhi_bias", 0, 1)


def test_potential_elements_match_hamiltonian_assembly(paper_params):
    # <i| U(phi) |j> from the phase grid equals the assembled off-diagonal part
    flux = paper_params.flux(0.47, 0.385)
    n_charge = 24
    eig = diagonalize(paper_params, flux, n_charge, 3)
    h = build_hamiltonian(paper_params, flux, n_charge)
    kinetic = np.diag(4.0 * paper_params.ec * (eig.charge_numbers - paper_params.ng) ** 2.0)
    u_op = h - kinetic
    from cos2phi.circuit import phase_operator_matrix

    grid = phase_operator_matrix(
        eig, (0, 1, 2), lambda p: total_potential(paper_params, flux, p), tol=1e-9
    )
    direct = eig.states.conj().T @ u_op @ eig.states
    assert np.max(np.abs(grid - direct)) < 1e-6


def test_rebased_roundtrip_identity(paper_params):
    flux = paper_params.flux(0.37, 0.41)
    again = paper_params.flux_from_raw(flux.phi_b_raw, flux.phi_ctrl)
    assert again.phi_bias == pytest.approx(flux.phi_bias, abs=1e-12)
    assert again.phi_b_raw == pytest.approx(flux.phi_b_raw, abs=1e-12)
