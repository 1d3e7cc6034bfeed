"""Fourier decomposition of 2*pi-periodic potentials.

Coefficients are computed by trapezoidal quadrature on a uniform grid (for a
periodic integrand this is the rectangle rule, evaluated via the FFT), with
the grid doubled until the retained coefficients are stable to the requested
tolerance.  Fully transparent junctions (tau = 1) have a cusp in their
energy-phase relation, so the coefficients decay only algebraically and the
series truncated at ``max_harmonic`` cannot reproduce the function to
arbitrary accuracy; the achieved sup-norm mismatch is recorded on the result
as ``residual`` instead of being raised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import DecompositionError

_TEST_GRID_SIZE = 1537


@dataclass(frozen=True)
class PeriodicPotential:
    """Truncated Fourier series sum_n (c_n cos(n phi) + s_n sin(n phi)).

    ``cos_coeffs[n]`` and ``sin_coeffs[n]`` hold the coefficients of harmonic
    n in GHz; ``sin_coeffs[0]`` is always zero.  ``residual`` is the sup-norm
    mismatch between the truncated series and the decomposed function,
    relative to the function's maximum magnitude.
    """

    cos_coeffs: tuple[float, ...]
    sin_coeffs: tuple[float, ...]
    residual: float
    grid_size: int

    @property
    def max_harmonic(self) -> int:
        return len(self.cos_coeffs) - 1

    def coefficients(self) -> Iterator[tuple[int, float, float]]:
        """Yield (harmonic index, cosine coefficient, sine coefficient)."""
        for n, (c, s) in enumerate(zip(self.cos_coeffs, self.sin_coeffs)):
            yield n, c, s

    def evaluate(self, phi):
        phi = np.asarray(phi, dtype=float)
        n = np.arange(len(self.cos_coeffs))
        args = np.multiply.outer(phi, n)
        return np.cos(args) @ np.asarray(self.cos_coeffs) + np.sin(args) @ np.asarray(
            self.sin_coeffs
        )

    def harmonic_magnitude(self, n: int) -> float:
        """Magnitude of harmonic n, invariant under phase shifts of phi."""
        return float(np.hypot(self.cos_coeffs[n], self.sin_coeffs[n]))


def _grid_coefficients(f: Callable, m: int, max_harmonic: int) -> tuple[np.ndarray, np.ndarray, float]:
    phi = 2.0 * np.pi * np.arange(m) / m
    samples = np.asarray(f(phi), dtype=float)
    spectrum = np.fft.rfft(samples) / m
    cos_c = np.empty(max_harmonic + 1)
    sin_c = np.zeros(max_harmonic + 1)
    cos_c[0] = spectrum[0].real
    cos_c[1:] = 2.0 * spectrum[1 : max_harmonic + 1].real
    sin_c[1:] = -2.0 * spectrum[1 : max_harmonic + 1].imag
    return cos_c, sin_c, float(np.max(np.abs(samples), initial=0.0))


def fourier_decompose(
    f: Callable,
    max_harmonic: int,
    tol: float = 1e-10,
    *,
    initial_grid: int = 256,
    grid_cap: int = 2**20,
) -> PeriodicPotential:
    """Decompose a 2*pi-periodic function into its lowest Fourier harmonics.

    Parameters
    ----------
    f:
        Vectorised callable of the phase in radians; must be 2*pi-periodic.
    max_harmonic:
        Highest harmonic index retained.
    tol:
        Relative stability target for the coefficients under grid doubling.

    Raises
    ------
    DecompositionError
        If the coefficients have not stabilised once the grid cap is reached.
        The error carries the last observed coefficient change as
        ``residual``.
    """
    if max_harmonic < 0:
        raise ValueError("max_harmonic must be non-negative")
    m = initial_grid
    while m < 4 * (max_harmonic + 1):
        m *= 2
    prev: np.ndarray | None = None
    diff = float("inf")
    while m <= grid_cap:
        cos_c, sin_c, scale = _grid_coefficients(f, m, max_harmonic)
        coeffs = np.concatenate([cos_c, sin_c])
        if prev is not None:
            diff = float(np.max(np.abs(coeffs - prev)))
            if diff <= tol * max(scale, 1e-300):
                return _finalise(f, cos_c, sin_c, scale, m)
        prev = coeffs
        m *= 2
    raise DecompositionError(
        f"Fourier coefficients not stable to {tol:g} within {grid_cap} grid points "
        f"(last change {diff:.3e})",
        residual=diff,
    )


def _finalise(f, cos_c, sin_c, scale, m) -> PeriodicPotential:
    phi = np.linspace(0.0, 2.0 * np.pi, _TEST_GRID_SIZE)
    pot = PeriodicPotential(tuple(cos_c), tuple(sin_c), residual=0.0, grid_size=m)
    mismatch = float(np.max(np.abs(pot.evaluate(phi) - np.asarray(f(phi), dtype=float))))
    residual = mismatch / max(scale, 1e-300)
    return PeriodicPotential(tuple(cos_c), tuple(sin_c), residual=residual, grid_size=m)
