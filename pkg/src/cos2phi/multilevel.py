"""N-level rate-matrix model of population relaxation.

Downward transition rates between the lowest N eigenstates come from the
same golden-rule channels as the two-level budget; upward rates follow from
detailed balance, Gamma_up = Gamma_down * exp(-hbar w / k_B T).  The
populations evolve under dp/dt = B p with B the resulting generator (columns
sum to zero), solved by eigendecomposition with a scaling-and-squaring
fallback for ill-conditioned eigenbases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .circuit import (
    DEFAULT_FOURIER_TOL,
    DEFAULT_MAX_HARMONIC,
    DEFAULT_N_CHARGE,
    CircuitParams,
    FluxBias,
    diagonalize,
    flux_derivative_operator,
    phase_operator_matrix,
    potential_harmonics,
)
from .constants import CONSTANTS, GHZ_TO_J
from .errors import ConfigError
from .noise import (
    NoiseConfig,
    circuit_matrix_elements,
    effective_capacitance,
    pair_channel_rates,
)
from .spectra import ResonatorParams

_EIGENBASIS_CONDITION_CAP = 1e12


@dataclass(frozen=True)
class RateMatrix:
    """Generator B (1/s) over the lowest N levels, with level frequencies in GHz."""

    b: np.ndarray
    temperature_k: float
    level_freqs_ghz: np.ndarray

    @property
    def dimension(self) -> int:
        return self.b.shape[0]

    def boltzmann_stationary(self) -> np.ndarray:
        """Thermal state fixed by detailed balance, normalised to 1."""
        e = self.level_freqs_ghz * GHZ_TO_J
        kt = CONSTANTS.boltzmann_kb * self.temperature_k
        w = np.exp(-(e - e.min()) / kt)
        return w / w.sum()


@dataclass(frozen=True)
class PopulationTrace:
    times: np.ndarray
    populations: np.ndarray  # shape (len(times), N)
    used_expm_fallback: bool = False


@dataclass(frozen=True)
class T1Fit:
    """Single-exponential fit of the excited-state decay."""

    t1: float
    fit_residual: float
    clean: bool  # False when the decay is visibly non-exponential (>5% residual)


def build_rate_matrix(
    params: CircuitParams,
    flux: FluxBias,
    res: ResonatorParams,
    cfg: NoiseConfig,
    n_levels: int = 5,
    temperature_k: float | None = None,
    *,
    n_charge: int = DEFAULT_N_CHARGE,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    fourier_tol: float = DEFAULT_FOURIER_TOL,
) -> RateMatrix:
    """Golden-rule generator over the lowest ``n_levels`` circuit states."""
    if n_levels < 2:
        raise ConfigError("rate matrix needs at least two levels", field="n_levels")
    temperature = cfg.temperature_k if temperature_k is None else temperature_k
    cfg_t = cfg if temperature == cfg.temperature_k else replace(cfg, temperature_k=temperature)
    eig = diagonalize(
        params, flux, n_charge, n_levels, max_harmonic=max_harmonic, tol=fourier_tol
    )
    levels = tuple(range(n_levels))
    phi_mat = phase_operator_matrix(eig, levels, lambda p: p)
    sin_mat = phase_operator_matrix(eig, levels, lambda p: np.sin(0.5 * p))
    db = flux_derivative_operator(
        params, flux, "bias", n_charge, max_harmonic=max_harmonic, tol=fourier_tol
    )
    dc = flux_derivative_operator(
        params, flux, "ctrl", n_charge, max_harmonic=max_harmonic, tol=fourier_tol
    )
    pot = potential_harmonics(params, flux, max_harmonic, fourier_tol)
    c_eff = effective_capacitance(params.ec, cfg_t)
    j = params.junctions
    ej_total = j.ej1 + j.ej2 + j.ej3 + params.ej45_eff(flux.phi_ctrl)

    kt = CONSTANTS.boltzmann_kb * temperature
    b = np.zeros((n_levels, n_levels))
    for upper in range(1, n_levels):
        for lower in range(upper):
            f_trans = eig.transition(lower, upper)
            elements = circuit_matrix_elements(
                eig,
                lower,
                upper,
                dphi_bias_op=db,
                dphi_ctrl_op=dc,
                phi_mat=phi_mat,
                sin_mat=sin_mat,
            )
            down = sum(
                pair_channel_rates(
                    f_trans,
                    elements,
                    cfg_t,
                    res,
                    c_eff=c_eff,
                    second_harmonic_ghz=pot.harmonic_magnitude(2),
                    ej_qp_ghz=ej_total,
                ).values()
            )
            up = down * math.exp(-f_trans * GHZ_TO_J / kt)
            b[lower, upper] += down  # upper -> lower
            b[upper, lower] += up  # lower -> upper
    np.fill_diagonal(b, 0.0)
    np.fill_diagonal(b, -b.sum(axis=0))
    return RateMatrix(b=b, temperature_k=temperature, level_freqs_ghz=np.array(eig.energies))


def evolve_populations(rm: RateMatrix, p0, times) -> PopulationTrace:
    """p(t) = exp(B t) p(0) via eigendecomposition of the generator.

    Falls back to the dense matrix exponential when the eigenbasis condition
    number exceeds 1e12 (flagged on the trace).
    """
    p0 = np.asarray(p0, dtype=float)
    times = np.asarray(times, dtype=float)
    if p0.shape != (rm.dimension,):
        raise ConfigError("p0 has the wrong length")
    if abs(p0.sum() - 1.0) > 1e-9 or np.any(p0 < -1e-12):
        raise ConfigError("p0 must be a probability vector")
    w, v = np.linalg.eig(rm.b)
    fallback = False
    try:
        cond = np.linalg.cond(v)
    except np.linalg.LinAlgError:  # pragma: no cover
        cond = np.inf
    if not np.isfinite(cond) or cond > _EIGENBASIS_CONDITION_CAP:
        fallback = True
        pops = np.stack([scipy.linalg.expm(rm.b * t) @ p0 for t in times])
    else:
        c = np.linalg.solve(v, p0.astype(complex))
        pops = np.real(np.exp(np.outer(times, w)) * c @ v.T)
    return PopulationTrace(times=times, populations=pops, used_expm_fallback=fallback)


def _slowest_decay_rate(rm: RateMatrix) -> float:
    w = np.linalg.eigvals(rm.b)
    rates = -np.real(w)
    floor = 1e-12 * max(rates.max(initial=0.0), 1.0)
    nonzero = rates[rates > floor]
    if len(nonzero) == 0:
        raise ConfigError("rate matrix has no decaying mode (all rates zero)")
    return float(nonzero.min())


def effective_t1(rm: RateMatrix) -> T1Fit:
    """Effective T1: single-exponential fit of p_1(t) starting from |1>.

    The excited population minus its stationary value is fitted over
    t in (0, 5 / slowest-rate] on 200 log-spaced points; a relative fit
    residual above 5% clears the ``clean`` flag instead of raising.
    """
    lam = _slowest_decay_rate(rm)
    t_end = 5.0 / lam
    times = np.geomspace(t_end * 1e-5, t_end, 200)
    p0 = np.zeros(rm.dimension)
    p0[1] = 1.0
    trace = evolve_populations(rm, p0, times)
    p1 = trace.populations[:, 1]
    p1_inf = rm.boltzmann_stationary()[1]
    y = p1 - p1_inf
    usable = y > 1e-15
    if usable.sum() < 10:
        return T1Fit(t1=1.0 / lam, fit_residual=1.0, clean=False)
    slope, intercept = np.polyfit(times[usable], np.log(y[usable]), 1)
    t1 = -1.0 / slope if slope < 0 else math.inf
    model = np.exp(intercept + slope * times[usable])
    residual = float(
        np.sqrt(np.mean((model - y[usable]) ** 2)) / max(np.max(np.abs(y[usable])), 1e-300)
    )
    return T1Fit(t1=float(t1), fit_residual=residual, clean=residual <= 0.05)
