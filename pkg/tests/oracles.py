"""Independent reference implementations used only by the tests.

Each oracle deliberately avoids the code paths it checks: Fourier
coefficients come from adaptive Gauss-Kronrod quadrature instead of FFT
sums, fluxonium levels from a finite-difference grid instead of the
oscillator basis, rate-matrix evolution from an ODE integrator instead of
eigendecomposition, and K0 from mpmath at 40 significant digits.
"""

import math

import numpy as np
import scipy.integrate
import scipy.linalg


def fourier_cos_coeff_quad(f, n: int) -> float:
    """Cosine coefficient of a 2*pi-periodic function by adaptive quadrature."""
    weight = (1.0 if n == 0 else 2.0) / (2.0 * math.pi)
    val, _ = scipy.integrate.quad(
        lambda phi: f(phi) * math.cos(n * phi),
        0.0,
        2.0 * math.pi,
        limit=400,
        epsabs=1e-14,
        epsrel=1e-13,
        points=[math.pi],
    )
    return weight * val


def fourier_sin_coeff_quad(f, n: int) -> float:
    if n == 0:
        return 0.0
    val, _ = scipy.integrate.quad(
        lambda phi: f(phi) * math.sin(n * phi),
        0.0,
        2.0 * math.pi,
        limit=400,
        epsabs=1e-14,
        epsrel=1e-13,
        points=[math.pi],
    )
    return val / math.pi


def abs_cos_half_series(n: int) -> float:
    """Closed-form cosine coefficients of |cos(phi/2)|."""
    if n == 0:
        return 2.0 / math.pi
    return 4.0 / math.pi * (-1.0) ** (n + 1) / (4.0 * n**2 - 1.0)


def k0_reference(x: float) -> float:
    import mpmath

    with mpmath.workdps(40):
        return float(mpmath.besselk(0, x))


def fluxonium_grid_levels(
    ec: float,
    ej: float,
    el: float,
    phi_ext_phi0: float,
    k: int = 5,
    span: float = 10.0 * math.pi,
    n: int = 4001,
) -> np.ndarray:
    """Lowest levels of the fluxonium on a phase grid (4th-order stencil)."""
    phi, h = np.linspace(-span, span, n, retstep=True)
    v = -ej * np.cos(phi) + 0.5 * el * (phi - 2.0 * math.pi * phi_ext_phi0) ** 2
    bands = np.zeros((3, n))
    bands[0] = 4.0 * ec * 2.5 / h**2 + v
    bands[1, :-1] = 4.0 * ec * (-4.0 / 3.0) / h**2
    bands[2, :-2] = 4.0 * ec * (1.0 / 12.0) / h**2
    vals = scipy.linalg.eig_banded(
        bands, lower=True, select="i", select_range=(0, k - 1), eigvals_only=True
    )
    return vals


def ode_population_evolution(b: np.ndarray, p0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Adaptive integration of dp/dt = B p, independent of eigendecomposition."""
    sol = scipy.integrate.solve_ivp(
        lambda _, p: b @ p,
        (0.0, float(times[-1])),
        p0,
        t_eval=times,
        method="LSODA",
        rtol=1e-11,
        atol=1e-13,
    )
    return sol.y.T


def transmon_gap_asymptotic(ej: float, ec: float) -> float:
    """Leading-order transmon 0-1 gap sqrt(8 EJ EC) - EC."""
    return math.sqrt(8.0 * ej * ec) - ec
