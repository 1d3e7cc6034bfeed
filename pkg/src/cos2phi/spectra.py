"""Spectroscopy observables and junction-energy fitting.

Covers the dispersive resonator-shift model, transition-frequency sweeps
with overlap-based level tracking, and a weighted least-squares fit of the
four free junction energies to two-tone data (charging energy held fixed).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .circuit import (
    DEFAULT_FOURIER_TOL,
    DEFAULT_MAX_HARMONIC,
    DEFAULT_N_CHARGE,
    CircuitParams,
    EigenSystem,
    FluxBias,
    JunctionSet,
    build_hamiltonian,
    diagonalize,
)
from .errors import ConfigError, QubitModelError

NEAR_DEGENERACY_GHZ = 1e-3  # 1 MHz guard band around the bare resonator
TRUNCATION_GUARD_GHZ = 1e-6  # 1 kHz stability target when adding a level


@dataclass(frozen=True)
class ResonatorParams:
    """Bare readout resonator frequency and geometric coupling, both GHz."""

    f_res: float
    g: float

    def __post_init__(self):
        if self.f_res <= 0 or self.g < 0:
            raise ConfigError("resonator requires f_res > 0 and g >= 0")


@dataclass(frozen=True)
class ShiftResult:
    """Dispersive resonator shift plus diagnostic flags."""

    shift: float  # GHz
    near_degenerate: bool
    truncation_converged: bool


def shift_from_eigensystem(
    eig: EigenSystem, res: ResonatorParams, from_state: int = 0
) -> ShiftResult:
    """Resonator pull for a qubit prepared in ``from_state``.

    delta_f_res = g^2 sum_{i != s} |<i|n|s>|^2 (-2 f_is) / (f_is^2 - f_res^2)
    with f_is = f_i - f_s, so a qubit transition above the resonator pulls it
    down.  The sum runs over every other computed level; convergence is
    checked by comparing against the same sum with the top level dropped.
    """
    k = eig.level_count
    if k < from_state + 2:
        raise ConfigError("need at least from_state + 2 levels for the shift sum")
    n_col = eig.charge_numbers[:, None] * eig.states
    elements = eig.states.conj().T @ n_col[:, from_state]
    near = False

    def partial(limit: int) -> float:
        total = 0.0
        for i in range(limit):
            if i == from_state:
                continue
            f_is = eig.transition(from_state, i)
            total += abs(elements[i]) ** 2 * (-2.0 * f_is) / (f_is**2 - res.f_res**2)
        return res.g**2 * total

    for i in range(k):
        if i != from_state and abs(abs(eig.transition(from_state, i)) - res.f_res) < NEAR_DEGENERACY_GHZ:
            near = True
    full = partial(k)
    converged = abs(full - partial(k - 1)) < TRUNCATION_GUARD_GHZ
    return ShiftResult(shift=full, near_degenerate=near, truncation_converged=converged)


def resonator_shift(
    params: CircuitParams,
    flux: FluxBias,
    res: ResonatorParams,
    from_state: int = 0,
    n_levels: int = 8,
    *,
    n_charge: int = DEFAULT_N_CHARGE,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    fourier_tol: float = DEFAULT_FOURIER_TOL,
) -> ShiftResult:
    """Dispersive resonator shift at one flux point, in GHz."""
    eig = diagonalize(
        params, flux, n_charge, n_levels, max_harmonic=max_harmonic, tol=fourier_tol
    )
    return shift_from_eigensystem(eig, res, from_state)


# ---------------------------------------------------------------------------
# spectrum sweeps


@dataclass(frozen=True)
class SweepPoint:
    flux: FluxBias
    frequencies: tuple[float, ...] | None  # f_{0->k}, k = 1..levels
    error: str | None = None


def _track_order(prev_states: np.ndarray, states: np.ndarray) -> np.ndarray:
    overlap = np.abs(prev_states.conj().T @ states)
    rows, cols = scipy.optimize.linear_sum_assignment(-overlap)
    order = np.empty(overlap.shape[0], dtype=int)
    order[rows] = cols
    return order


def transition_spectrum_sweep(
    params: CircuitParams,
    flux_points: Sequence[FluxBias],
    levels: int = 3,
    *,
    n_charge: int = DEFAULT_N_CHARGE,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    fourier_tol: float = DEFAULT_FOURIER_TOL,
) -> list[SweepPoint]:
    """f_{0->k} versus flux with levels tracked by state overlap.

    Failed points are recorded with their error message instead of aborting
    the sweep.
    """
    if len(flux_points) == 0:
        raise ConfigError("flux grid is empty")
    out: list[SweepPoint] = []
    prev_states: np.ndarray | None = None
    for flux in flux_points:
        try:
            eig = diagonalize(
                params,
                flux,
                n_charge,
                levels + 1,
                max_harmonic=max_harmonic,
                tol=fourier_tol,
            )
        except QubitModelError as exc:
            out.append(SweepPoint(flux=flux, frequencies=None, error=str(exc)))
            prev_states = None
            continue
        energies = eig.energies
        states = eig.states
        if prev_states is not None and prev_states.shape == states.shape:
            order = _track_order(prev_states, states)
            energies = energies[order]
            states = states[:, order]
        freqs = tuple(float(e - energies[0]) for e in energies[1:])
        out.append(SweepPoint(flux=flux, frequencies=freqs))
        prev_states = states
    return out


# ---------------------------------------------------------------------------
# dataset handling and fitting


@dataclass(frozen=True)
class SpectroscopyDataset:
    """Two-tone rows (phi_bias, phi_ctrl, measured f01, uncertainty), GHz/Phi0."""

    phi_bias: np.ndarray
    phi_ctrl: np.ndarray
    f01: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        n = len(self.phi_bias)
        if not (len(self.phi_ctrl) == len(self.f01) == len(self.sigma) == n):
            raise ConfigError("dataset columns have mismatched lengths")
        if np.any(self.sigma <= 0):
            raise ConfigError("uncertainties must be > 0", field="sigma_ghz")
        if not np.all(np.isfinite(self.phi_bias)) or not np.all(np.isfinite(self.phi_ctrl)):
            raise ConfigError("flux values must be finite")

    def __len__(self) -> int:
        return len(self.f01)

    def filtered(self, max_sigma_ghz: float) -> "SpectroscopyDataset":
        """Drop rows whose fit uncertainty exceeds the cap."""
        keep = self.sigma <= max_sigma_ghz
        return SpectroscopyDataset(
            self.phi_bias[keep], self.phi_ctrl[keep], self.f01[keep], self.sigma[keep]
        )

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[float, float, float, float]]) -> "SpectroscopyDataset":
        arr = np.asarray(rows, dtype=float).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])

    @classmethod
    def from_csv(cls, path) -> "SpectroscopyDataset":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(line for line in fh if not line.startswith("#"))
            header = next(reader)
            expected = ["phi_bias", "phi_ctrl", "f01_ghz", "sigma_ghz"]
            if [c.strip() for c in header] != expected:
                raise ConfigError(f"dataset header must be {','.join(expected)}")
            for row in reader:
                if row:
                    rows.append(tuple(float(x) for x in row[:4]))
        return cls.from_rows(rows)

    def to_csv(self, path, provenance: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["phi_bias", "phi_ctrl", "f01_ghz", "sigma_ghz"])
            for row in zip(self.phi_bias, self.phi_ctrl, self.f01, self.sigma):
                writer.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class FitResult:
    junctions: JunctionSet
    residual_rms: float  # GHz, unweighted rms of f01 misfit
    chi2: float
    sensitivities: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "ej1_ghz": self.junctions.ej1,
            "ej2_ghz": self.junctions.ej2,
            "ej3_ghz": self.junctions.ej3,
            "ej4_ghz": self.junctions.ej4,
            "ej5_ghz": self.junctions.ej5,
            "residual_rms_ghz": self.residual_rms,
            "chi2": self.chi2,
            "sensitivities": dict(self.sensitivities),
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def model_f01(
    params: CircuitParams,
    phi_bias: float,
    phi_ctrl: float,
    *,
    n_charge: int = DEFAULT_N_CHARGE,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    fourier_tol: float = DEFAULT_FOURIER_TOL,
) -> float:
    """Qubit transition frequency of the model at one flux point (GHz)."""
    flux = params.flux(phi_bias, phi_ctrl)
    h = build_hamiltonian(params, flux, n_charge, max_harmonic=max_harmonic, tol=fourier_tol)
    vals = scipy.linalg.eigh(h, eigvals_only=True, subset_by_index=(0, 1), check_finite=False)
    return float(vals[1] - vals[0])


def fit_spectrum(
    data: SpectroscopyDataset,
    fixed_ec: float,
    initial: JunctionSet,
    *,
    tie_small_squid: bool = True,
    max_sigma_ghz: float = 0.01,
    n_charge: int = DEFAULT_N_CHARGE,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    fourier_tol: float = DEFAULT_FOURIER_TOL,
    max_iter: int = 2000,
    objective_rtol: float = 1e-9,
    seed: int = 0,
) -> FitResult:
    """Fit {E_J1, E_J2, E_J3, E_J45} to a two-tone dataset.

    The charging energy is held fixed; the small-SQUID pair is fitted through
    its sum, splitting it with the initial asymmetry (or symmetrically when
    ``tie_small_squid``).  The search is a derivative-free simplex descent in
    log-energy space with one restart, so positivity needs no constraint
    machinery.  Note the model is exactly symmetric under swapping E_J1 and
    E_J2, so only the unordered pair is identifiable.

    The fit never raises on non-convergence; it reports ``converged=False``.
    """
    rows = data.filtered(max_sigma_ghz)
    if len(rows) < 5:
        raise ConfigError("need at least 5 usable data rows to fit")
    for name in ("ej1", "ej2", "ej3"):
        if getattr(initial, name) <= 0:
            raise ConfigError("initial junction energies must be > 0", field=name)
    if initial.small_squid_sum <= 0:
        raise ConfigError("initial small-SQUID energies must sum to > 0")
    d0 = 0.0 if tie_small_squid else initial.small_squid_asymmetry

    def junctions_from(x: np.ndarray) -> JunctionSet:
        e = np.exp(x)
        return JunctionSet(
            ej1=e[0],
            ej2=e[1],
            ej3=e[2],
            ej4=0.5 * (1.0 + d0) * e[3],
            ej5=0.5 * (1.0 - d0) * e[3],
        )

    def chi2(x: np.ndarray) -> float:
        params = CircuitParams(ec=fixed_ec, junctions=junctions_from(x))
        total = 0.0
        for pb, pc, f_meas, sig in zip(rows.phi_bias, rows.phi_ctrl, rows.f01, rows.sigma):
            f_model = model_f01(
                params,
                pb,
                pc,
                n_charge=n_charge,
                max_harmonic=max_harmonic,
                fourier_tol=fourier_tol,
            )
            total += ((f_model - f_meas) / sig) ** 2
        return total

    x0 = np.log(
        [initial.ej1, initial.ej2, initial.ej3, initial.small_squid_sum]
    )
    options = {"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-12, "adaptive": True}
    res = scipy.optimize.minimize(chi2, x0, method="Nelder-Mead", options=options)
    iterations = res.nit
    # one simplex restart from the found point guards against premature collapse
    res2 = scipy.optimize.minimize(chi2, res.x, method="Nelder-Mead", options=options)
    iterations += res2.nit
    improvement = res.fun - res2.fun
    best = res2 if res2.fun <= res.fun else res
    converged = bool(
        (res.success or res2.success)
        and improvement <= objective_rtol * max(abs(res.fun), 1.0)
    )

    junctions = junctions_from(best.x)
    params = CircuitParams(ec=fixed_ec, junctions=junctions)
    misfit = np.array(
        [
            model_f01(params, pb, pc, n_charge=n_charge, max_harmonic=max_harmonic, fourier_tol=fourier_tol)
            - f
            for pb, pc, f in zip(rows.phi_bias, rows.phi_ctrl, rows.f01)
        ]
    )
    sensitivities = {}
    for k, name in enumerate(("ej1", "ej2", "ej3", "ej45")):
        dx = np.zeros(4)
        dx[k] = math.log(1.01)  # 1% step in energy
        sensitivities[name] = float(chi2(best.x + dx) - best.fun)
    return FitResult(
        junctions=junctions,
        residual_rms=float(np.sqrt(np.mean(misfit**2))),
        chi2=float(best.fun),
        sensitivities=sensitivities,
        iterations=int(iterations),
        converged=converged,
    )
