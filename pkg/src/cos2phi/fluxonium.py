"""Fluxonium reference qubit: spectrum, matrix elements, and T1 budget.

H = 4 E_C n^2 - E_J cos(phi) + (1/2) E_L (phi - phi_ext)^2, built in the
harmonic-oscillator basis of the LC part (plasma frequency sqrt(8 E_L E_C)).
The cosine is assembled from displacement-operator matrix elements.  The
noise model is shared with the two-loop qubit; the single external flux maps
onto the ``*_bias`` channel slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .constants import CONSTANTS, GHZ_TO_J
from .errors import ConfigError, NumericalError, TruncationError
from .noise import NoiseConfig, T1Budget, effective_capacitance, pair_channel_rates
from .spectra import ResonatorParams


@dataclass(frozen=True)
class FluxoniumParams:
    """Fluxonium energies (GHz), external flux (Phi0) and basis size."""

    ec: float
    ej: float
    el: float
    phi_ext: float = 0.5
    basis_size: int = 120

    def __post_init__(self):
        if self.ec <= 0 or self.el <= 0:
            raise ConfigError("fluxonium requires ec > 0 and el > 0")
        if self.ej < 0:
            raise ConfigError("ej must be >= 0", field="ej")
        if self.basis_size < 20:
            raise ConfigError("basis_size must be at least 20", field="basis_size")

    @property
    def plasma_freq(self) -> float:
        """LC oscillator frequency sqrt(8 E_L E_C) in GHz."""
        return math.sqrt(8.0 * self.el * self.ec)

    @property
    def phi_zpf(self) -> float:
        return (2.0 * self.ec / self.el) ** 0.25

    @property
    def n_zpf(self) -> float:
        return (self.el / (32.0 * self.ec)) ** 0.25


def _ladder(size: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, size)), k=1)


def phase_operator(p: FluxoniumParams) -> np.ndarray:
    a = _ladder(p.basis_size)
    return p.phi_zpf * (a + a.T)

def charge_operator(p: FluxoniumParams) -> np.ndarray:
    a = _ladder(p.basis_size)
    return 1j * p.n_zpf * (a.T - a)


def displacement_cosine(lam: float, size: int) -> np.ndarray:
    """Matrix of cos(lam (a + a^dag)) in the Fock basis.

    Built from the closed-form displacement-operator elements
    <m|e^{i lam (a+a^dag)}|n>; odd |m - n| vanishes by parity.
    """
    m = np.arange(size)
    lo = np.minimum.outer(m, m)
    hi = np.maximum.outer(m, m)
    k = hi - lo
    x = lam * lam
    log_mag = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) + k * math.log(lam) - 0.5 * x
    lag = eval_genlaguerre(lo, k, x)
    out = np.where(k % 2 == 0, (-1.0) ** (k // 2) * np.exp(log_mag) * lag, 0.0)
    return out


def build_fluxonium(p: FluxoniumParams) -> np.ndarray:
    """Fluxonium Hamiltonian matrix (GHz) in the oscillator basis."""
    n = p.basis_size
    diag = p.plasma_freq * (np.arange(n) + 0.5) + 0.5 * p.el * (2.0 * math.pi * p.phi_ext) ** 2
    h = np.diag(diag)
    h -= p.el * (2.0 * math.pi * p.phi_ext) * phase_operator(p)
    h -= p.ej * displacement_cosine(p.phi_zpf, n)
    return h


@dataclass(frozen=True)
class FluxoniumEigen:
    energies: np.ndarray
    states: np.ndarray  # real columns in the Fock basis
    params: FluxoniumParams

    @property
    def level_count(self) -> int:
        return len(self.energies)

    def transition(self, i: int, j: int) -> float:
        return float(self.energies[j] - self.energies[i])


def fluxonium_eigensystem(p: FluxoniumParams, k_levels: int = 6) -> FluxoniumEigen:
    """Lowest eigenpairs, with a basis-truncation check on the top Fock level."""
    import scipy.linalg

    h = build_fluxonium(p)
    try:
        energies, states = scipy.linalg.eigh(
            h, subset_by_index=(0, k_levels - 1), check_finite=False
        )
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"fluxonium eigensolver failed: {exc}") from exc
    for col in range(states.shape[1]):
        idx = int(np.argmax(np.abs(states[:, col])))
        if states[idx, col] < 0:
            states[:, col] = -states[:, col]
    top = np.max(np.abs(states[-1, : min(5, k_levels)]) ** 2)
    if top > 1e-6:
        raise TruncationError(
            f"top Fock level holds {top:.2e} population; increase basis_size"
        )
    return FluxoniumEigen(energies=energies, states=states, params=p)


def fluxonium_matrix_element(
    eig: FluxoniumEigen,
    op_kind: str,
    i: int,
    j: int,
) -> complex:
    """<i| O |j> for n, phi, sin(phi/2) and the flux-derivative operator.

    n and phi are native ladder combinations; sin(phi/2) is evaluated as a
    function of the diagonalised phase operator; dH/dPhi_ext is analytic,
    -E_L (phi - phi_ext) * 2 pi, in GHz per Phi0.
    """
    if i >= eig.level_count or j >= eig.level_count:
        raise ConfigError("requested level exceeds the computed eigensystem")
    p = eig.params
    vi = eig.states[:, i]
    vj = eig.states[:, j]
    if op_kind == "charge_n":
        return complex(vi @ charge_operator(p) @ vj)
    if op_kind == "phase_phi":
        return complex(vi @ phase_operator(p) @ vj)
    if op_kind == "sin_half_phase":
        vals, vecs = np.linalg.eigh(phase_operator(p))
        op = vecs @ np.diag(np.sin(0.5 * vals)) @ vecs.T
        return complex(vi @ op @ vj)
    if op_kind == "dH_dPhi_ext":
        phi_op = phase_operator(p) - 2.0 * math.pi * p.phi_ext * np.eye(p.basis_size)
        return complex(vi @ (-p.el * 2.0 * math.pi * phi_op) @ vj)
    raise ConfigError(f"unknown operator kind {op_kind!r}")


def fluxonium_t1_budget(
    p: FluxoniumParams,
    cfg: NoiseConfig,
    res: ResonatorParams,
) -> T1Budget:
    """0-1 relaxation budget with the shared noise model.

    The dielectric capacitance comes from E_C, the inductive-loss inductance
    from E_L, quasiparticle tunneling acts across the small junction only,
    and the single loop's flux channels occupy the ``*_bias`` slots.
    """
    eig = fluxonium_eigensystem(p, 2)
    f01 = eig.transition(0, 1)
    elements = {
        "n": fluxonium_matrix_element(eig, "charge_n", 0, 1),
        "phi": fluxonium_matrix_element(eig, "phase_phi", 0, 1),
        "sin_half": fluxonium_matrix_element(eig, "sin_half_phase", 0, 1),
        "dphi_bias": fluxonium_matrix_element(eig, "dH_dPhi_ext", 0, 1),
        "dphi_ctrl": 0.0,
    }
    l_el = (CONSTANTS.flux_quantum / (2.0 * math.pi)) ** 2 / (p.el * GHZ_TO_J)
    cfg_fx = cfg if cfg.effective_inductance_h is not None else _with_inductance(cfg, l_el)
    rates = pair_channel_rates(
        f01,
        elements,
        cfg_fx,
        res,
        c_eff=effective_capacitance(p.ec, cfg),
        second_harmonic_ghz=None,
        ej_qp_ghz=p.ej,
        single_loop=True,
    )
    return T1Budget.from_rates(rates, f01)


def _with_inductance(cfg: NoiseConfig, l_eff: float) -> NoiseConfig:
    from dataclasses import replace

    return replace(cfg, effective_inductance_h=l_eff)


def fluxonium_spectrum(p: FluxoniumParams, phi_ext_values, levels: int = 3) -> list[tuple[float, tuple[float, ...]]]:
    """(phi_ext, f_{0->k}) rows for a flux sweep of the fluxonium."""
    from dataclasses import replace

    rows = []
    for phi_ext in phi_ext_values:
        eig = fluxonium_eigensystem(replace(p, phi_ext=float(phi_ext)), levels + 1)
        rows.append(
            (float(phi_ext), tuple(float(e - eig.energies[0]) for e in eig.energies[1:]))
        )
    return rows


def fluxonium_potential(p: FluxoniumParams, phi):
    """Potential -E_J cos(phi) + (1/2) E_L (phi - phi_ext)^2 in GHz."""
    phi = np.asarray(phi, dtype=float)
    return -p.ej * np.cos(phi) + 0.5 * p.el * (phi - 2.0 * math.pi * p.phi_ext) ** 2
