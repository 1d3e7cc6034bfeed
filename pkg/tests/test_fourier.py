import math

import numpy as np
import pytest

from cos2phi.circuit import EffectiveArm, sns_epr
from cos2phi.errors import DecompositionError
from cos2phi.fourier import fourier_decompose

from oracles import abs_cos_half_series, fourier_cos_coeff_quad, fourier_sin_coeff_quad


def sns(tau, ej=1.0):
    arm = EffectiveArm(ej_sigma=ej, tau=tau)
    return lambda phi: sns_epr(arm, phi)


def test_tau_zero_is_constant():
    pot = fourier_decompose(sns(0.0, ej=3.5), max_harmonic=8)
    assert pot.cos_coeffs[0] == pytest.approx(-3.5, abs=1e-12)
    assert max(abs(c) for c in pot.cos_coeffs[1:]) < 1e-12
    assert max(abs(s) for s in pot.sin_coeffs) < 1e-12


def test_tau_one_matches_closed_form():
    # -|cos(phi/2)| has the alternating series -4/pi (-1)^(n+1)/(4n^2-1)
    pot = fourier_decompose(sns(1.0), max_harmonic=12)
    assert pot.cos_coeffs[0] == pytest.approx(-2.0 / math.pi, abs=1e-10)
    assert pot.cos_coeffs[1] == pytest.approx(-4.0 / (3.0 * math.pi), abs=1e-10)
    assert pot.cos_coeffs[2] == pytest.approx(4.0 / (15.0 * math.pi), abs=1e-10)
    for n in range(13):
        assert pot.cos_coeffs[n] == pytest.approx(-abs_cos_half_series(n), abs=1e-10)


@pytest.mark.parametrize("tau", [0.5, 0.986])
def test_matches_quadrature_oracle(tau):
    f = sns(tau)
    pot = fourier_decompose(f, max_harmonic=10)
    for n in range(11):
        assert pot.cos_coeffs[n] == pytest.approx(
            fourier_cos_coeff_quad(f, n), abs=1e-10
        )
        assert pot.sin_coeffs[n] == pytest.approx(0.0, abs=1e-10)


def test_sine_coefficients_of_shifted_function():
    f = lambda phi: np.cos(phi - 0.7) + 0.25 * np.sin(3 * phi)
    pot = fourier_decompose(f, max_harmonic=5)
    assert pot.cos_coeffs[1] == pytest.approx(math.cos(0.7), abs=1e-12)
    assert pot.sin_coeffs[1] == pytest.approx(math.sin(0.7), abs=1e-12)
    assert pot.sin_coeffs[3] == pytest.approx(0.25, abs=1e-12)
    assert pot.sin_coeffs[3] == pytest.approx(fourier_sin_coeff_quad(f, 3), abs=1e-11)


def test_series_evaluation_reproduces_smooth_function():
    f = sns(0.5)
    pot = fourier_decompose(f, max_harmonic=20)
    phi = np.linspace(-7.0, 7.0, 311)
    assert np.max(np.abs(pot.evaluate(phi) - f(phi))) < 1e-10
    assert pot.residual < 1e-10


def test_cusp_truncation_residual_is_reported_not_raised():
    pot = fourier_decompose(sns(1.0), max_harmonic=20)
    # the tau = 1 cusp leaves an algebraic tail; residual records it honestly
    assert 1e-6 < pot.residual < 1e-2


def test_grid_cap_failure_carries_residual():
    rng = np.random.default_rng(7)

    def noisy(phi):
        # not a function: fresh noise per evaluation defeats stabilisation
        return np.sin(phi) + 1e-3 * rng.standard_normal(np.shape(phi))

    with pytest.raises(DecompositionError) as err:
        fourier_decompose(noisy, max_harmonic=4, grid_cap=2**12)
    assert err.value.residual > 0


def test_coefficient_iterator_shape():
    pot = fourier_decompose(sns(0.5), max_harmonic=6)
    rows = list(pot.coefficients())
    assert [r[0] for r in rows] == list(range(7))
    assert pot.max_harmonic == 6
