"""Relaxation-rate noise model: six channels plus the per-flux T1 budget.

Each channel is a coupling operator together with a spectral density; the
relaxation rate follows from Fermi's golden rule,

    Gamma = |<0| D |1>|^2 S(omega_10) / hbar^2,

with everything in SI inside this module.  Circuit quantities arrive in the
package's GHz / Phi0 conventions and are converted at the boundary.

Channels
--------
dielectric      D = 2e n,                S = hbar coth(x) / (C Q_cap(w))
inductive       D = (Phi0/2pi) phi,      S = hbar coth(x) / (L Q_ind(w))
fbl_ohmic_*     D = dH/dPhi (per loop),  S = M^2 hbar w coth(x) / R
quasiparticle   D = (Phi0/pi) sin(phi/2) S = hbar w Re[Y_qp(w)] coth(x)
purcell         rate = kappa (g01 / Delta0)^2
one_over_f_*    D = dH/dPhi (per loop),  S = 2 pi A^2 / |w|

with x = hbar|w| / 2 k_B T.  The densities are evaluated as written, with
|w| throughout, so they are symmetric and positive; thermal asymmetry of up
versus down rates is imposed explicitly at the rate-matrix level (see
``multilevel``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np
import scipy.special

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
from .errors import ConfigError, DivergenceError, QubitModelError
from .spectra import ResonatorParams

CAP_REFERENCE_OMEGA = 2.0 * math.pi * 6e9  # rad/s, Q_cap power-law anchor
IND_REFERENCE_OMEGA = 2.0 * math.pi * 0.5e9  # rad/s, Q_ind anchor

CHANNELS = (
    "dielectric",
    "inductive",
    "fbl_ohmic_bias",
    "fbl_ohmic_ctrl",
    "quasiparticle",
    "purcell",
    "one_over_f_bias",
    "one_over_f_ctrl",
)

Channel = Literal[
    "dielectric",
    "inductive",
    "fbl_ohmic",
    "quasiparticle",
    "one_over_f",
]


@dataclass(frozen=True)
class NoiseConfig:
    """Channel parameters; defaults are the fitted device values.

    ``gap_ghz`` (aluminium gap / h) and ``bias_line_ohm`` are not measured
    quantities here, just documented knobs.  ``effective_capacitance_f`` and
    ``effective_inductance_h`` override the values otherwise derived from the
    circuit (C from the charging energy, L from the second-harmonic magnitude
    of the potential at the operating point).
    """

    q_cap_ref: float = 1e5
    alpha_cap: float = 0.7
    q_ind_ref: float = 5e8
    mutual_bias_phi0_per_a: float = 1800.0
    mutual_ctrl_phi0_per_a: float = 1800.0
    bias_line_ohm: float = 50.0
    x_qp: float = 7e-10
    gap_ghz: float = 44.0
    one_over_f_phi0: float = 1.5e-5
    temperature_k: float = 0.040
    loaded_q: float = 1e4
    effective_capacitance_f: float | None = None
    effective_inductance_h: float | None = None

    def __post_init__(self):
        if self.temperature_k <= 0:
            raise ConfigError("temperature must be > 0", field="temperature_k")
        for name in (
            "q_cap_ref",
            "q_ind_ref",
            "bias_line_ohm",
            "gap_ghz",
            "loaded_q",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0", field=name)
        for name in ("mutual_bias_phi0_per_a", "mutual_ctrl_phi0_per_a", "x_qp", "one_over_f_phi0", "alpha_cap"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", field=name)


def bessel_k0(x):
    """Modified Bessel function K0 (thin wrapper, see tests for the oracle)."""
    return scipy.special.k0(x)


def _k0_sinh(x: float) -> float:
    """Overflow-safe K0(x) * sinh(x); tends to sqrt(pi/(8x)) at large x."""
    return 0.5 * scipy.special.k0e(x) * (1.0 - math.exp(-2.0 * x)) if x > 0 else math.inf


def _coth(x: float) -> float:
    return 1.0 / math.tanh(x)


def q_cap(omega: float, cfg: NoiseConfig) -> float:
    """Frequency-dependent capacitive quality factor (power law)."""
    if omega == 0:
        raise ConfigError("q_cap undefined at omega = 0")
    return cfg.q_cap_ref * (CAP_REFERENCE_OMEGA / abs(omega)) ** cfg.alpha_cap


def q_ind(omega: float, cfg: NoiseConfig) -> float:
    """Frequency-dependent inductive quality factor (K0 sinh model)."""
    if omega == 0:
        raise ConfigError("q_ind undefined at omega = 0")
    kt2 = 2.0 * CONSTANTS.boltzmann_kb * cfg.temperature_k
    x_ref = CONSTANTS.hbar * IND_REFERENCE_OMEGA / kt2
    x = CONSTANTS.hbar * abs(omega) / kt2
    return cfg.q_ind_ref * _k0_sinh(x_ref) / _k0_sinh(x)


def quasiparticle_admittance(omega: float, cfg: NoiseConfig, e_j_ghz: float) -> float:
    """Dissipative quasiparticle admittance Re[Y_qp] in Siemens."""
    e_j = e_j_ghz * GHZ_TO_J
    gap = cfg.gap_ghz * GHZ_TO_J
    hw = CONSTANTS.hbar * abs(omega)
    x = hw / (2.0 * CONSTANTS.boltzmann_kb * cfg.temperature_k)
    return (
        cfg.x_qp
        * math.sqrt(2.0 / math.pi)
        * (8.0 * e_j / (CONSTANTS.resistance_quantum * gap))
        * (2.0 * gap / hw) ** 1.5
        * math.sqrt(x)
        * _k0_sinh(x)
    )


def spectral_density(
    channel: Channel,
    omega: float,
    cfg: NoiseConfig,
    *,
    c_eff: float | None = None,
    l_eff: float | None = None,
    e_j_ghz: float | None = None,
    mutual_phi0_per_a: float | None = None,
) -> float:
    """Noise spectral density of one channel at angular frequency omega (SI).

    Channel-specific context must be supplied: the effective capacitance for
    dielectric loss, effective inductance for inductive loss, the relevant
    Josephson energy for the quasiparticle admittance, and the mutual
    inductance for the Ohmic flux-bias line.

    The formulas as written are emission-side densities; the coth-bearing
    channels extend to negative frequency through detailed balance,
    S(-|w|) = S(|w|) exp(-hbar |w| / k_B T), so upward (absorption) rates are
    Boltzmann suppressed.  The athermal 1/f density is symmetric.
    """
    if omega == 0:
        raise ConfigError("spectral densities are evaluated at omega != 0")
    if omega < 0 and channel != "one_over_f":
        boltzmann = math.exp(
            -CONSTANTS.hbar * abs(omega) / (CONSTANTS.boltzmann_kb * cfg.temperature_k)
        )
        return boltzmann * spectral_density(
            channel,
            abs(omega),
            cfg,
            c_eff=c_eff,
            l_eff=l_eff,
            e_j_ghz=e_j_ghz,
            mutual_phi0_per_a=mutual_phi0_per_a,
        )
    x = CONSTANTS.hbar * abs(omega) / (2.0 * CONSTANTS.boltzmann_kb * cfg.temperature_k)
    if channel == "dielectric":
        if c_eff is None:
            raise ConfigError("dielectric channel requires c_eff")
        return CONSTANTS.hbar / (c_eff * q_cap(omega, cfg)) * _coth(x)
    if channel == "inductive":
        if l_eff is None:
            raise ConfigError("inductive channel requires l_eff")
        return CONSTANTS.hbar / (l_eff * q_ind(omega, cfg)) * _coth(x)
    if channel == "fbl_ohmic":
        if mutual_phi0_per_a is None:
            raise ConfigError("fbl_ohmic channel requires mutual_phi0_per_a")
        m_si = mutual_phi0_per_a * CONSTANTS.flux_quantum
        return m_si**2 * CONSTANTS.hbar * abs(omega) / cfg.bias_line_ohm * _coth(x)
    if channel == "quasiparticle":
        if e_j_ghz is None:
            raise ConfigError("quasiparticle channel requires e_j_ghz")
        return (
            CONSTANTS.hbar
            * abs(omega)
            * quasiparticle_admittance(omega, cfg, e_j_ghz)
            * _coth(x)
        )
    if channel == "one_over_f":
        a_si = cfg.one_over_f_phi0 * CONSTANTS.flux_quantum
        return 2.0 * math.pi * a_si**2 / abs(omega)
    raise ConfigError(f"unknown noise channel {channel!r}")


def golden_rule_rate(matrix_element_si: complex, s_value: float) -> float:
    """Fermi golden rule |m|^2 S / hbar^2; element and S in matching SI units."""
    if s_value < 0:
        raise ConfigError("spectral density must be >= 0")
    return abs(matrix_element_si) ** 2 * s_value / CONSTANTS.hbar**2


def _purcell(f_trans_ghz: float, n_element: float, res: ResonatorParams, cfg: NoiseConfig) -> float:
    """kappa (g01/Delta0)^2 for one transition."""
    if res.g == 0 or n_element == 0:
        return 0.0
    detuning = 2.0 * math.pi * (f_trans_ghz - res.f_res) * 1e9
    if detuning == 0:
        raise DivergenceError("qubit transition is resonant with the resonator")
    g01 = 2.0 * math.pi * res.g * 1e9 * abs(n_element)
    if abs(detuning) < 10.0 * g01:
        warnings.warn("Purcell formula used outside the far-detuned regime", stacklevel=2)
    kappa = 2.0 * math.pi * res.f_res * 1e9 / cfg.loaded_q
    return kappa * (g01 / detuning) ** 2


def purcell_rate(
    params: CircuitParams,
    flux: FluxBias,
    res: ResonatorParams,
    cfg: NoiseConfig,
    *,
    n_charge: int = DEFAULT_N_CHARGE,
) -> float:
    """Purcell decay rate of the 0-1 transition in 1/s."""
    eig = diagonalize(params, flux, n_charge, 2)
    n01 = complex(
        np.sum(np.conj(eig.states[:, 0]) * eig.charge_numbers * eig.states[:, 1])
    )
    return _purcell(eig.transition(0, 1), abs(n01), res, cfg)


# ---------------------------------------------------------------------------
# budget assembly


@dataclass(frozen=True)
class T1Budget:
    """Per-channel relaxation rates (1/s) and the resulting T1.

    Single-loop devices (the fluxonium comparison) report their flux channels
    in the ``*_bias`` slots with the ``*_ctrl`` entries at zero.
    """

    dielectric: float
    inductive: float
    fbl_ohmic_bias: float
    fbl_ohmic_ctrl: float
    quasiparticle: float
    purcell: float
    one_over_f_bias: float
    one_over_f_ctrl: float
    total_rate: float
    t1: float
    f01: float  # GHz, for reference in emitted tables

    @classmethod
    def from_rates(cls, rates: Mapping[str, float], f01: float) -> "T1Budget":
        total = float(sum(rates[name] for name in CHANNELS))
        return cls(
            **{name: float(rates[name]) for name in CHANNELS},
            total_rate=total,
            t1=(1.0 / total) if total > 0 else math.inf,
            f01=f01,
        )

    def rate(self, name: str) -> float:
        if name not in CHANNELS:
            raise ConfigError(f"unknown channel {name!r}")
        return getattr(self, name)

    def as_dict(self) -> dict:
        out = {name: getattr(self, name) for name in CHANNELS}
        out.update(total_rate=self.total_rate, t1=self.t1, f01=self.f01)
        return out


def pair_channel_rates(
    f_trans_ghz: float,
    elements: Mapping[str, complex],
    cfg: NoiseConfig,
    res: ResonatorParams,
    *,
    c_eff: float,
    second_harmonic_ghz: float | None,
    ej_qp_ghz: float,
    single_loop: bool = False,
) -> dict[str, float]:
    """All channel rates for one downward transition.

    ``elements`` holds the operator matrix elements in circuit units:
    ``n`` (dimensionless), ``phi`` (rad), ``sin_half`` (dimensionless) and
    ``dphi_bias`` / ``dphi_ctrl`` (GHz per Phi0).
    """
    if f_trans_ghz <= 0:
        raise ConfigError("pair rates require a positive transition frequency")
    omega = 2.0 * math.pi * f_trans_ghz * 1e9
    e = CONSTANTS.electron_charge
    phi0 = CONSTANTS.flux_quantum
    rates: dict[str, float] = {}

    m_diel = 2.0 * e * elements["n"]
    rates["dielectric"] = golden_rule_rate(
        m_diel, spectral_density("dielectric", omega, cfg, c_eff=c_eff)
    )

    m_ind = phi0 / (2.0 * math.pi) * elements["phi"]
    if cfg.effective_inductance_h is not None:
        s_ind = spectral_density("inductive", omega, cfg, l_eff=cfg.effective_inductance_h)
    elif second_harmonic_ghz is None:
        raise ConfigError("inductive channel requires a second-harmonic energy or l_eff")
    elif second_harmonic_ghz <= 0:
        s_ind = 0.0
    else:
        l_eff = (phi0 / (2.0 * math.pi)) ** 2 / (second_harmonic_ghz * GHZ_TO_J)
        s_ind = spectral_density("inductive", omega, cfg, l_eff=l_eff)
    rates["inductive"] = golden_rule_rate(m_ind, s_ind)

    ghz_per_phi0_to_si = GHZ_TO_J / phi0  # J/Wb
    m_bias = elements["dphi_bias"] * ghz_per_phi0_to_si
    s_ohm_bias = spectral_density(
        "fbl_ohmic", omega, cfg, mutual_phi0_per_a=cfg.mutual_bias_phi0_per_a
    )
    rates["fbl_ohmic_bias"] = golden_rule_rate(m_bias, s_ohm_bias)
    s_1f = spectral_density("one_over_f", omega, cfg)
    rates["one_over_f_bias"] = golden_rule_rate(m_bias, s_1f)

    if single_loop:
        rates["fbl_ohmic_ctrl"] = 0.0
        rates["one_over_f_ctrl"] = 0.0
    else:
        m_ctrl = elements["dphi_ctrl"] * ghz_per_phi0_to_si
        s_ohm_ctrl = spectral_density(
            "fbl_ohmic", omega, cfg, mutual_phi0_per_a=cfg.mutual_ctrl_phi0_per_a
        )
        rates["fbl_ohmic_ctrl"] = golden_rule_rate(m_ctrl, s_ohm_ctrl)
        rates["one_over_f_ctrl"] = golden_rule_rate(m_ctrl, s_1f)

    m_qp = phi0 / math.pi * elements["sin_half"]
    rates["quasiparticle"] = golden_rule_rate(
        m_qp, spectral_density("quasiparticle", omega, cfg, e_j_ghz=ej_qp_ghz)
    )

    rates["purcell"] = _purcell(f_trans_ghz, abs(elements["n"]), res, cfg)
    return rates


def effective_capacitance(ec_ghz: float, cfg: NoiseConfig) -> float:
    """C = e^2 / (2 E_C) unless overridden in the config."""
    if cfg.effective_capacitance_f is not None:
        return cfg.effective_capacitance_f
    return CONSTANTS.electron_charge**2 / (2.0 * ec_ghz * GHZ_TO_J)


def circuit_matrix_elements(
    eig,
    i: int,
    j: int,
    *,
    dphi_bias_op: np.ndarray,
    dphi_ctrl_op: np.ndarray,
    phi_mat: np.ndarray,
    sin_mat: np.ndarray,
) -> dict[str, complex]:
    n = eig.charge_numbers
    return {
        "n": complex(np.sum(np.conj(eig.states[:, i]) * n * eig.states[:, j])),
        "phi": complex(phi_mat[i, j]),
        "sin_half": complex(sin_mat[i, j]),
        "dphi_bias": complex(np.conj(eig.states[:, i]) @ dphi_bias_op @ eig.states[:, j]),
        "dphi_ctrl": complex(np.conj(eig.states[:, i]) @ dphi_ctrl_op @ eig.states[:, j]),
    }


def t1_budget(
    params: CircuitParams,
    flux: FluxBias,
    res: ResonatorParams,
    cfg: NoiseConfig,
    *,
    n_charge: int = DEFAULT_N_CHARGE,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    fourier_tol: float = DEFAULT_FOURIER_TOL,
) -> T1Budget:
    """Full 0-1 relaxation budget at one flux point.

    The two loop-flux channels are treated as uncorrelated and summed; the
    quasiparticle admittance uses the combined effective Josephson energy of
    both arms.
    """
    eig = diagonalize(params, flux, n_charge, 2, max_harmonic=max_harmonic, tol=fourier_tol)
    f01 = eig.transition(0, 1)
    levels = (0, 1)
    phi_mat = phase_operator_matrix(eig, levels, lambda p: p)
    sin_mat = phase_operator_matrix(eig, levels, lambda p: np.sin(0.5 * p))
    db = flux_derivative_operator(
        params, flux, "bias", n_charge, max_harmonic=max_harmonic, tol=fourier_tol
    )
    dc = flux_derivative_operator(
        params, flux, "ctrl", n_charge, max_harmonic=max_harmonic, tol=fourier_tol
    )
    elements = circuit_matrix_elements(
        eig, 0, 1, dphi_bias_op=db, dphi_ctrl_op=dc, phi_mat=phi_mat, sin_mat=sin_mat
    )
    pot = potential_harmonics(params, flux, max_harmonic, fourier_tol)
    j = params.junctions
    ej_total = j.ej1 + j.ej2 + j.ej3 + params.ej45_eff(flux.phi_ctrl)
    rates = pair_channel_rates(
        f01,
        elements,
        cfg,
        res,
        c_eff=effective_capacitance(params.ec, cfg),
        second_harmonic_ghz=pot.harmonic_magnitude(2),
        ej_qp_ghz=ej_total,
    )
    return T1Budget.from_rates(rates, f01)


@dataclass(frozen=True)
class BudgetPoint:
    flux: FluxBias
    budget: T1Budget | None
    error: str | None = None


def t1_sweep(
    params: CircuitParams,
    flux_points: Sequence[FluxBias],
    res: ResonatorParams,
    cfg: NoiseConfig,
    *,
    n_charge: int = DEFAULT_N_CHARGE,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    fourier_tol: float = DEFAULT_FOURIER_TOL,
) -> list[BudgetPoint]:
    """Per-point budgets over a flux grid; failures are captured per point."""
    out: list[BudgetPoint] = []
    for flux in flux_points:
        try:
            budget = t1_budget(
                params,
                flux,
                res,
                cfg,
                n_charge=n_charge,
                max_harmonic=max_harmonic,
                fourier_tol=fourier_tol,
            )
            out.append(BudgetPoint(flux=flux, budget=budget))
        except QubitModelError as exc:
            out.append(BudgetPoint(flux=flux, budget=None, error=str(exc)))
    return out
