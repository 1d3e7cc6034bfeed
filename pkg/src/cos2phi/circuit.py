"""Effective two-loop qubit Hamiltonian in the truncated charge basis.

Model summary
-------------
Each arm of the main SQUID loop is a composite element with an energy-phase
relation

    U_arm(phi) = -E_sigma * sqrt(1 - tau * sin^2(phi/2)),

optionally corrected by a Born-Oppenheimer internal-mode term

    U_int(phi) = sqrt(2 * E_c_int * E_sigma * sqrt(1 - tau * sin^2(phi/2))).

The right arm combines a fixed junction with a small SQUID whose effective
energy is E45 * sqrt(cos^2(pi * Phi_S/Phi0) + d^2 sin^2(pi * Phi_S/Phi0)).
Note the argument convention: the flux enters as pi * Phi_S/Phi0 (the
double-angle variant exp(i * 2pi * Phi_S/Phi0) is deliberately not
supported).  The small loop also contributes a phase offset

    delta = phi_S/2 + arctan(d * tan(phi_S/2)),   phi_S = 2*pi*Phi_S/Phi0,

taken on the continuous branch of arctan(tan).  Working in the rebased
coordinate Phi_bias (raw big-loop flux Phi_B = Phi_bias + delta*Phi0/2pi) the
right-arm potential is displaced by exactly 2*pi*Phi_bias/Phi0, which pins
the symmetry point at Phi_bias = 0.5 Phi0 for every control flux.

Units: all energies are E/h in GHz; fluxes are in units of Phi0; phases in
radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigError, InvalidArmError, NumericalError
from .fourier import PeriodicPotential, fourier_decompose

DEFAULT_N_CHARGE = 40
DEFAULT_MAX_HARMONIC = 20
DEFAULT_FOURIER_TOL = 1e-10
FLUX_DERIVATIVE_STEP = 1e-6  # Phi0

OperatorKind = Literal[
    "charge_n", "phase_phi", "sin_half_phase", "dH_dPhi_bias", "dH_dPhi_ctrl"
]


# ---------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class JunctionSet:
    """The five junction energies E/h in GHz.

    Junctions 1 and 2 form the fixed left arm, junction 3 sits in series
    with the small SQUID (junctions 4 and 5) on the tunable right arm.
    """

    ej1: float
    ej2: float
    ej3: float
    ej4: float
    ej5: float

    def __post_init__(self):
        for name in ("ej1", "ej2", "ej3", "ej4", "ej5"):
            if getattr(self, name) < 0:
                raise ConfigError(f"junction energy {name} must be >= 0", field=name)

    @property
    def small_squid_sum(self) -> float:
        return self.ej4 + self.ej5

    @property
    def small_squid_asymmetry(self) -> float:
        s = self.ej4 + self.ej5
        if s <= 0:
            return 0.0
        return (self.ej4 - self.ej5) / s


@dataclass(frozen=True)
class EffectiveArm:
    """Effective energy scale and transparency of a two-junction arm."""

    ej_sigma: float
    tau: float

    def __post_init__(self):
        if self.ej_sigma < 0:
            raise InvalidArmError("effective arm energy must be >= 0")
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidArmError(f"transparency must lie in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class CircuitParams:
    """Full parameter set of the effective single-mode circuit Hamiltonian."""

    ec: float
    junctions: JunctionSet
    ec_int_left: float = 0.0
    ec_int_right: float = 0.0
    ng: float = 0.0

    def __post_init__(self):
        if self.ec <= 0:
            raise ConfigError("ec must be > 0", field="ec")
        if self.ec_int_left < 0 or self.ec_int_right < 0:
            raise ConfigError("internal-mode charging energies must be >= 0")

    def left_arm(self) -> "EffectiveArm | None":
        """Effective left arm, or None when it carries no Josephson energy."""
        return _arm_or_none(self.junctions.ej1, self.junctions.ej2)

    def right_arm(self, phi_ctrl: float) -> "EffectiveArm | None":
        return _arm_or_none(self.junctions.ej3, self.ej45_eff(phi_ctrl))

    def ej45_eff(self, phi_ctrl: float) -> float:
        """Small-SQUID effective energy at a control flux (0 for an empty pair)."""
        if self.junctions.small_squid_sum == 0:
            return 0.0
        return small_squid(self.junctions.ej4, self.junctions.ej5, phi_ctrl)[0]

    def _delta(self, phi_ctrl: float) -> float:
        if self.junctions.small_squid_sum == 0:
            return 0.0
        return small_squid(self.junctions.ej4, self.junctions.ej5, phi_ctrl)[2]

    def flux(self, phi_bias: float, phi_ctrl: float) -> "FluxBias":
        """Build a flux point from rebased coordinates (both in Phi0)."""
        delta = self._delta(phi_ctrl)
        return FluxBias(
            phi_bias=phi_bias,
            phi_ctrl=phi_ctrl,
            delta=delta,
            phi_b_raw=phi_bias + delta / (2.0 * math.pi),
        )

    def flux_from_raw(self, phi_b_raw: float, phi_ctrl: float) -> "FluxBias":
        """Build a flux point from the raw big-loop flux Phi_B (in Phi0)."""
        delta = self._delta(phi_ctrl)
        return FluxBias(
            phi_bias=phi_b_raw - delta / (2.0 * math.pi),
            phi_ctrl=phi_ctrl,
            delta=delta,
            phi_b_raw=phi_b_raw,
        )


@dataclass(frozen=True)
class FluxBias:
    """Flux point of the two loops.

    ``phi_bias`` is the rebased big-loop coordinate whose symmetry point sits
    at 0.5 Phi0; ``phi_ctrl`` equals the small-loop flux Phi_S.  ``delta`` is
    the small-SQUID phase offset and ``phi_b_raw`` the raw big-loop flux,
    phi_b_raw = phi_bias + delta/(2 pi).
    """

    phi_bias: float
    phi_ctrl: float
    delta: float
    phi_b_raw: float


# ---------------------------------------------------------------------------
# energy-phase relations


def effective_arm(ej_a: float, ej_b: float) -> EffectiveArm:
    """Reduce two series junctions to an effective (E_sigma, tau) arm.

    E_sigma = E_a + E_b and tau = 4 E_a E_b / (E_a + E_b)^2, so equal
    junctions give unit transparency and an open arm gives tau = 0.
    """
    if ej_a < 0 or ej_b < 0:
        raise InvalidArmError("junction energies must be >= 0")
    total = ej_a + ej_b
    if total <= 0:
        raise InvalidArmError("arm requires at least one junction with E_J > 0")
    tau = 4.0 * ej_a * ej_b / total**2
    return EffectiveArm(ej_sigma=total, tau=min(tau, 1.0))


def _arm_or_none(ej_a: float, ej_b: float) -> EffectiveArm | None:
    """Like effective_arm, but an entirely empty arm simply contributes nothing."""
    if ej_a + ej_b == 0:
        return None
    return effective_arm(ej_a, ej_b)


def _continuous_atan_tan(d: float, x: float) -> float:
    """Continuous branch of arctan(d * tan(x)) with value 0 at x = 0."""
    sign = 1.0 if d >= 0 else -1.0
    principal = math.atan2(d * math.sin(x), math.cos(x))
    k = round((sign * x - principal) / (2.0 * math.pi))
    return principal + 2.0 * math.pi * k


def small_squid(ej4: float, ej5: float, phi_s: float) -> tuple[float, float, float]:
    """Effective energy, asymmetry and phase offset of the small SQUID.

    Parameters
    ----------
    ej4, ej5:
        Junction energies in GHz.
    phi_s:
        Small-loop flux in Phi0 units.

    Returns
    -------
    (ej45_eff, d, delta):
        Effective Josephson energy (GHz), asymmetry d = (E4-E5)/(E4+E5) and
        the phase offset delta in radians on the continuous branch.
    """
    if ej4 < 0 or ej5 < 0 or ej4 + ej5 <= 0:
        raise InvalidArmError("small SQUID requires E_J4 + E_J5 > 0")
    total = ej4 + ej5
    d = (ej4 - ej5) / total
    x = math.pi * phi_s  # equals both pi*Phi_S/Phi0 and phi_S/2
    ej45_eff = total * math.sqrt(math.cos(x) ** 2 + (d * math.sin(x)) ** 2)
    delta = x + _continuous_atan_tan(d, x)
    return ej45_eff, d, delta


def sns_epr(arm: EffectiveArm, phi):
    """Energy-phase relation -E_sigma sqrt(1 - tau sin^2(phi/2)) in GHz."""
    phi = np.asarray(phi, dtype=float)
    inner = 1.0 - arm.tau * np.sin(0.5 * phi) ** 2
    return -arm.ej_sigma * np.sqrt(np.clip(inner, 0.0, None))


def internal_mode_epr(arm: EffectiveArm, ec_int: float, phi):
    """Born-Oppenheimer internal-mode energy of a composite arm in GHz.

    Vanishes identically for ec_int = 0 (the default configuration).
    """
    if ec_int < 0:
        raise ConfigError("ec_int must be >= 0")
    phi = np.asarray(phi, dtype=float)
    if ec_int == 0.0:
        return np.zeros_like(phi)
    inner = np.sqrt(np.clip(1.0 - arm.tau * np.sin(0.5 * phi) ** 2, 0.0, None))
    return np.sqrt(2.0 * ec_int * arm.ej_sigma * inner)


def total_potential(params: CircuitParams, flux: FluxBias, phi):
    """Total Josephson potential of the two-arm loop at phase(s) phi, in GHz.

    The left arm is evaluated at phi and the right arm at
    phi - 2*pi*Phi_bias/Phi0 (the rebased displacement already absorbs the
    small-SQUID offset delta).
    """
    left = params.left_arm()
    right = params.right_arm(flux.phi_ctrl)
    phi = np.asarray(phi, dtype=float)
    theta = phi - 2.0 * math.pi * flux.phi_bias
    u = np.zeros_like(phi)
    if left is not None:
        u = u + sns_epr(left, phi)
        if params.ec_int_left > 0:
            u = u + internal_mode_epr(left, params.ec_int_left, phi)
    if right is not None:
        u = u + sns_epr(right, theta)
        if params.ec_int_right > 0:
            u = u + internal_mode_epr(right, params.ec_int_right, theta)
    return u


# ---------------------------------------------------------------------------
# harmonics and Hamiltonian assembly


@lru_cache(maxsize=4096)
def _arm_cosine_series(
    ej_sigma: float, tau: float, ec_int: float, max_harmonic: int, tol: float
) -> tuple[float, ...]:
    """Cosine coefficients of one arm's potential (an even function)."""
    arm = EffectiveArm(ej_sigma, tau)

    def f(phi):
        u = sns_epr(arm, phi)
        if ec_int > 0:
            u = u + internal_mode_epr(arm, ec_int, phi)
        return u

    return fourier_decompose(f, max_harmonic, tol).cos_coeffs


def potential_harmonics(
    params: CircuitParams,
    flux: FluxBias,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    tol: float = DEFAULT_FOURIER_TOL,
) -> PeriodicPotential:
    """Fourier series of the total potential at a flux point.

    Each arm is decomposed once into a cosine series (arm potentials are
    even); the right arm's displacement by 2*pi*Phi_bias/Phi0 rotates its
    coefficients into the cos/sin pair analytically.  The result is
    identical to decomposing ``total_potential`` directly, but an order of
    magnitude cheaper inside flux sweeps and fits.
    """
    left = params.left_arm()
    right = params.right_arm(flux.phi_ctrl)
    zero = np.zeros(max_harmonic + 1)
    a_left = zero if left is None else np.asarray(
        _arm_cosine_series(left.ej_sigma, left.tau, params.ec_int_left, max_harmonic, tol)
    )
    a_right = zero if right is None else np.asarray(
        _arm_cosine_series(right.ej_sigma, right.tau, params.ec_int_right, max_harmonic, tol)
    )
    n = np.arange(max_harmonic + 1)
    shift = 2.0 * math.pi * flux.phi_bias * n
    cos_c = a_left + a_right * np.cos(shift)
    sin_c = a_right * np.sin(shift)
    sin_c[0] = 0.0

    pot = PeriodicPotential(tuple(cos_c), tuple(sin_c), residual=0.0, grid_size=0)
    phi_test = np.linspace(0.0, 2.0 * np.pi, 257)
    exact = total_potential(params, flux, phi_test)
    scale = max(float(np.max(np.abs(exact))), 1e-300)
    residual = float(np.max(np.abs(pot.evaluate(phi_test) - exact))) / scale
    return PeriodicPotential(tuple(cos_c), tuple(sin_c), residual=residual, grid_size=0)


def hamiltonian_from_harmonics(
    pot: PeriodicPotential, ec: float, ng: float, n_charge: int
) -> np.ndarray:
    """Assemble the charge-basis matrix for a kinetic term plus a harmonic series.

    The diagonal is 4 E_C (n - n_g)^2; harmonic k with coefficients (c, s)
    adds (c + i s)/2 on the k-th superdiagonal and its conjugate below, i.e.
    exp(i phi) raises the charge index by one.
    """
    dim = 2 * n_charge + 1
    n = np.arange(-n_charge, n_charge + 1, dtype=float)
    h = np.zeros((dim, dim), dtype=complex)
    np.fill_diagonal(h, 4.0 * ec * (n - ng) ** 2 + pot.cos_coeffs[0])
    for k in range(1, min(pot.max_harmonic, dim - 1) + 1):
        c = pot.cos_coeffs[k]
        s = pot.sin_coeffs[k]
        if c == 0.0 and s == 0.0:
            continue
        upper = 0.5 * (c + 1j * s)
        idx = np.arange(dim - k)
        h[idx, idx + k] += upper
        h[idx + k, idx] += np.conj(upper)
    return h


def build_hamiltonian(
    params: CircuitParams,
    flux: FluxBias,
    n_charge: int = DEFAULT_N_CHARGE,
    *,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    tol: float = DEFAULT_FOURIER_TOL,
) -> np.ndarray:
    """Charge-basis Hamiltonian matrix (GHz) of dimension 2*n_charge + 1."""
    if n_charge < 10:
        raise ConfigError("n_charge must be at least 10", field="n_charge")
    pot = potential_harmonics(params, flux, max_harmonic, tol)
    return hamiltonian_from_harmonics(pot, params.ec, params.ng, n_charge)


# ---------------------------------------------------------------------------
# diagonalisation


@dataclass(frozen=True)
class EigenSystem:
    """Lowest eigenpairs in the charge basis.

    ``states`` has one normalised column per level over charge numbers
    n = -n_charge .. n_charge; the global phase of each column is fixed by
    making its largest-magnitude amplitude real and positive.
    """

    energies: np.ndarray
    states: np.ndarray
    n_charge: int
    ng: float

    @property
    def charge_numbers(self) -> np.ndarray:
        return np.arange(-self.n_charge, self.n_charge + 1)

    @property
    def level_count(self) -> int:
        return len(self.energies)

    def transition(self, i: int, j: int) -> float:
        """Transition frequency f_j - f_i in GHz."""
        return float(self.energies[j] - self.energies[i])


def _fix_phases(states: np.ndarray) -> np.ndarray:
    out = np.array(states, dtype=complex)
    for col in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, col])))
        amp = out[idx, col]
        if amp != 0:
            out[:, col] *= np.conj(amp) / abs(amp)
        # kill the residual imaginary part of the anchor amplitude
        if out[idx, col].real < 0:
            out[:, col] = -out[:, col]
    return out


def eigensystem(h: np.ndarray, k_levels: int, *, ng: float = 0.0) -> EigenSystem:
    """Lowest ``k_levels`` eigenpairs of a Hermitian charge-basis matrix."""
    dim = h.shape[0]
    if k_levels > dim:
        raise ConfigError("k_levels exceeds matrix dimension", field="k_levels")
    try:
        energies, states = scipy.linalg.eigh(
            h, subset_by_index=(0, k_levels - 1), check_finite=False
        )
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    return EigenSystem(
        energies=energies,
        states=_fix_phases(states),
        n_charge=(dim - 1) // 2,
        ng=ng,
    )


def diagonalize(
    params: CircuitParams,
    flux: FluxBias,
    n_charge: int = DEFAULT_N_CHARGE,
    k_levels: int = 6,
    *,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    tol: float = DEFAULT_FOURIER_TOL,
) -> EigenSystem:
    """Build and diagonalise the circuit Hamiltonian in one call."""
    h = build_hamiltonian(params, flux, n_charge, max_harmonic=max_harmonic, tol=tol)
    return eigensystem(h, k_levels, ng=params.ng)


# ---------------------------------------------------------------------------
# operator matrix elements


def phase_wavefunctions(
    eig: EigenSystem, levels: Sequence[int], n_intervals: int
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenstates on the closed phase grid [-pi, pi] with n_intervals + 1 points.

    psi(phi) = sum_n a_n exp(i n phi) / sqrt(2 pi); the grid norm matches the
    charge-basis norm (Parseval) once n_intervals exceeds four times the
    charge cutoff.
    """
    phi = np.linspace(-np.pi, np.pi, n_intervals + 1)
    basis = np.exp(1j * np.outer(phi, eig.charge_numbers)) / math.sqrt(2.0 * math.pi)
    return phi, basis @ eig.states[:, list(levels)]


def phase_operator_matrix(
    eig: EigenSystem,
    levels: Sequence[int],
    op,
    *,
    tol: float = 1e-10,
    initial_grid: int = 2048,
    grid_cap: int = 2**19,
) -> np.ndarray:
    """Matrix of a phase-diagonal operator between eigenstates.

    ``op`` maps the phase grid to operator values on the fixed branch
    phi in [-pi, pi); the integral is a closed trapezoidal rule, with the
    grid doubled until the matrix is stable to ``tol`` (relative to its
    largest element).
    """
    prev: np.ndarray | None = None
    m = initial_grid
    while m <= grid_cap:
        phi, psi = phase_wavefunctions(eig, levels, m)
        w = np.full(m + 1, 2.0 * np.pi / m)
        w[0] *= 0.5
        w[-1] *= 0.5
        weighted = (w * np.asarray(op(phi), dtype=float))[:, None] * psi
        mat = psi.conj().T @ weighted
        if prev is not None:
            change = float(np.max(np.abs(mat - prev)))
            scale = max(float(np.max(np.abs(mat))), 1e-30)
            if change <= max(tol * scale, 1e-14):
                return mat
        prev = mat
        m *= 2
    raise NumericalError("phase-grid integration did not converge on doubling")


def flux_derivative_operator(
    params: CircuitParams,
    flux: FluxBias,
    coordinate: Literal["bias", "ctrl"],
    n_charge: int = DEFAULT_N_CHARGE,
    *,
    step: float = FLUX_DERIVATIVE_STEP,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    tol: float = DEFAULT_FOURIER_TOL,
) -> np.ndarray:
    """Central-difference dH/dPhi in GHz per Phi0, in rebased coordinates.

    The derivative is taken at fixed other-flux; delta is recomputed
    consistently from the control flux on both sides of the stencil.
    """
    if coordinate == "bias":
        up = params.flux(flux.phi_bias + step, flux.phi_ctrl)
        dn = params.flux(flux.phi_bias - step, flux.phi_ctrl)
    elif coordinate == "ctrl":
        up = params.flux(flux.phi_bias, flux.phi_ctrl + step)
        dn = params.flux(flux.phi_bias, flux.phi_ctrl - step)
    else:
        raise ConfigError(f"unknown flux coordinate {coordinate!r}")
    h_up = build_hamiltonian(params, up, n_charge, max_harmonic=max_harmonic, tol=tol)
    h_dn = build_hamiltonian(params, dn, n_charge, max_harmonic=max_harmonic, tol=tol)
    return (h_up - h_dn) / (2.0 * step)


def operator_matrix_element(
    eig: EigenSystem,
    op_kind: OperatorKind,
    i: int,
    j: int,
    params: CircuitParams | None = None,
    flux: FluxBias | None = None,
    *,
    tol: float = 1e-10,
    step: float = FLUX_DERIVATIVE_STEP,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    fourier_tol: float = DEFAULT_FOURIER_TOL,
) -> complex:
    """Matrix element <i| O |j> for the supported noise operators.

    charge_n is evaluated natively in the charge basis; phase_phi and
    sin_half_phase by single-period integrals on the branch [-pi, pi);
    the flux-derivative operators by central differences of the full
    Hamiltonian (dimensionless, rad, and GHz/Phi0 respectively).
    """
    if i >= eig.level_count or j >= eig.level_count:
        raise ConfigError("requested level exceeds the computed eigensystem")
    if op_kind == "charge_n":
        n = eig.charge_numbers
        return complex(np.sum(np.conj(eig.states[:, i]) * n * eig.states[:, j]))
    if op_kind in ("phase_phi", "sin_half_phase"):
        levels = [i, j] if i != j else [i]
        op = (lambda p: p) if op_kind == "phase_phi" else (lambda p: np.sin(0.5 * p))
        mat = phase_operator_matrix(eig, levels, op, tol=tol)
        return complex(mat[0, -1])
    if op_kind in ("dH_dPhi_bias", "dH_dPhi_ctrl"):
        if params is None or flux is None:
            raise ConfigError(f"{op_kind} requires params and flux")
        coord = "bias" if op_kind == "dH_dPhi_bias" else "ctrl"
        dh = flux_derivative_operator(
            params,
            flux,
            coord,
            eig.n_charge,
            step=step,
            max_harmonic=max_harmonic,
            tol=fourier_tol,
        )
        return complex(np.conj(eig.states[:, i]) @ dh @ eig.states[:, j])
    raise ConfigError(f"unknown operator kind {op_kind!r}")
