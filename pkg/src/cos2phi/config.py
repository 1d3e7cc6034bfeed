"""Strict JSON configuration: load, validate, and normalise run settings.

Every key embeds its unit (``ec_ghz``, ``temperature_k``) so that values
cannot drift silently.  Unknown keys are rejected; missing keys fall back to
the bundled device defaults and are echoed back by the normalised dump.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .circuit import CircuitParams, FluxBias, JunctionSet
from .errors import ConfigError
from .fluxonium import FluxoniumParams
from .noise import NoiseConfig
from .spectra import ResonatorParams

_CIRCUIT_KEYS = {
    "ec_ghz": 0.21,
    "ej1_ghz": 42.49,
    "ej2_ghz": 53.9,
    "ej3_ghz": 88.11,
    "ej4_ghz": 35.73,
    "ej5_ghz": 35.73,
    "ec_int_left_ghz": 0.0,
    "ec_int_right_ghz": 0.0,
    "ng": 0.0,
}
_RESONATOR_KEYS = {"f_res_ghz": 5.344, "g_ghz": 0.025}
_NOISE_KEYS = {
    "q_cap_ref": 1e5,
    "alpha_cap": 0.7,
    "q_ind_ref": 5e8,
    "mutual_bias_phi0_per_a": 1800.0,
    "mutual_ctrl_phi0_per_a": 1800.0,
    "bias_line_ohm": 50.0,
    "x_qp": 7e-10,
    "gap_ghz": 44.0,
    "one_over_f_phi0": 1.5e-5,
    "temperature_k": 0.04,
    "loaded_q": 1e4,
    "effective_capacitance_f": None,
    "effective_inductance_h": None,
}
_SWEEP_KEYS = {
    "phi_bias_start": 0.35,
    "phi_bias_stop": 0.65,
    "phi_bias_steps": 61,
    "phi_ctrl_start": 0.378,
    "phi_ctrl_stop": 0.378,
    "phi_ctrl_steps": 1,
}
_SOLVER_KEYS = {
    "n_charge": 40,
    "levels": 6,
    "max_harmonic": 20,
    "fourier_tol": 1e-10,
    "multilevel_n": 5,
}
_FLUXONIUM_KEYS = {
    "ec_ghz": 1.0,
    "ej_ghz": 4.1,
    "el_ghz": 0.8,
    "phi_ext_phi0": 0.5,
    "basis_size": 120,
}

_SECTIONS = {
    "circuit": _CIRCUIT_KEYS,
    "resonator": _RESONATOR_KEYS,
    "noise": _NOISE_KEYS,
    "sweep": _SWEEP_KEYS,
    "solver": _SOLVER_KEYS,
    "fluxonium": _FLUXONIUM_KEYS,
}
_NULLABLE = {"effective_capacitance_f", "effective_inductance_h"}
_INT_KEYS = {
    "phi_bias_steps",
    "phi_ctrl_steps",
    "n_charge",
    "levels",
    "max_harmonic",
    "basis_size",
    "multilevel_n",
}


@dataclass(frozen=True)
class SweepSpec:
    phi_bias_start: float
    phi_bias_stop: float
    phi_bias_steps: int
    phi_ctrl_start: float
    phi_ctrl_stop: float
    phi_ctrl_steps: int

    def __post_init__(self):
        if self.phi_bias_steps < 0 or self.phi_ctrl_steps < 0:
            raise ConfigError("sweep steps must be >= 0", field="sweep")

    @property
    def point_count(self) -> int:
        return self.phi_bias_steps * self.phi_ctrl_steps

    def grid(self) -> list[tuple[float, float]]:
        """(phi_bias, phi_ctrl) points; control flux is the outer loop."""

        def axis(start, stop, steps):
            if steps <= 1:
                return [start]
            return [start + (stop - start) * k / (steps - 1) for k in range(steps)]

        biases = axis(self.phi_bias_start, self.phi_bias_stop, self.phi_bias_steps)
        ctrls = axis(self.phi_ctrl_start, self.phi_ctrl_stop, self.phi_ctrl_steps)
        if self.phi_bias_steps == 0 or self.phi_ctrl_steps == 0:
            return []
        return [(b, c) for c in ctrls for b in biases]


@dataclass(frozen=True)
class SolverSpec:
    n_charge: int = 40
    levels: int = 6
    max_harmonic: int = 20
    fourier_tol: float = 1e-10
    multilevel_n: int = 5


@dataclass(frozen=True)
class RunConfig:
    circuit: CircuitParams
    resonator: ResonatorParams
    noise: NoiseConfig
    sweep: SweepSpec
    solver: SolverSpec
    fluxonium: FluxoniumParams
    seed: int

    def flux_points(self) -> list[FluxBias]:
        return [self.circuit.flux(b, c) for b, c in self.sweep.grid()]

    def normalized(self) -> dict:
        """Canonical dict with defaults materialised (keys sorted on dump)."""
        c = self.circuit
        return {
            "circuit": {
                "ec_ghz": c.ec,
                "ej1_ghz": c.junctions.ej1,
                "ej2_ghz": c.junctions.ej2,
                "ej3_ghz": c.junctions.ej3,
                "ej4_ghz": c.junctions.ej4,
                "ej5_ghz": c.junctions.ej5,
                "ec_int_left_ghz": c.ec_int_left,
                "ec_int_right_ghz": c.ec_int_right,
                "ng": c.ng,
            },
            "resonator": {"f_res_ghz": self.resonator.f_res, "g_ghz": self.resonator.g},
            "noise": {
                "q_cap_ref": self.noise.q_cap_ref,
                "alpha_cap": self.noise.alpha_cap,
                "q_ind_ref": self.noise.q_ind_ref,
                "mutual_bias_phi0_per_a": self.noise.mutual_bias_phi0_per_a,
                "mutual_ctrl_phi0_per_a": self.noise.mutual_ctrl_phi0_per_a,
                "bias_line_ohm": self.noise.bias_line_ohm,
                "x_qp": self.noise.x_qp,
                "gap_ghz": self.noise.gap_ghz,
                "one_over_f_phi0": self.noise.one_over_f_phi0,
                "temperature_k": self.noise.temperature_k,
                "loaded_q": self.noise.loaded_q,
                "effective_capacitance_f": self.noise.effective_capacitance_f,
                "effective_inductance_h": self.noise.effective_inductance_h,
            },
            "sweep": {
                "phi_bias_start": self.sweep.phi_bias_start,
                "phi_bias_stop": self.sweep.phi_bias_stop,
                "phi_bias_steps": self.sweep.phi_bias_steps,
                "phi_ctrl_start": self.sweep.phi_ctrl_start,
                "phi_ctrl_stop": self.sweep.phi_ctrl_stop,
                "phi_ctrl_steps": self.sweep.phi_ctrl_steps,
            },
            "solver": {
                "n_charge": self.solver.n_charge,
                "levels": self.solver.levels,
                "max_harmonic": self.solver.max_harmonic,
                "fourier_tol": self.solver.fourier_tol,
                "multilevel_n": self.solver.multilevel_n,
            },
            "fluxonium": {
                "ec_ghz": self.fluxonium.ec,
                "ej_ghz": self.fluxonium.ej,
                "el_ghz": self.fluxonium.el,
                "phi_ext_phi0": self.fluxonium.phi_ext,
                "basis_size": self.fluxonium.basis_size,
            },
            "seed": self.seed,
        }

    def dump(self) -> str:
        return json.dumps(self.normalized(), indent=2, sort_keys=True) + "\n"


def _merge_section(name: str, raw: dict, defaults: dict) -> dict:
    merged = dict(defaults)
    for key, value in raw.items():
        if key not in defaults:
            raise ConfigError(
                f"unknown key {name}.{key} (strict schema)", field=f"{name}.{key}"
            )
        if value is None:
            if key not in _NULLABLE:
                raise ConfigError(f"{name}.{key} may not be null", field=f"{name}.{key}")
            merged[key] = None
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}.{key} must be a number", field=f"{name}.{key}")
        if key in _INT_KEYS:
            if int(value) != value:
                raise ConfigError(f"{name}.{key} must be an integer", field=f"{name}.{key}")
            merged[key] = int(value)
        else:
            merged[key] = float(value)
    return merged


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    unknown = set(raw) - set(_SECTIONS) - {"seed"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key} (strict schema)", field=key)
    sections = {
        name: _merge_section(name, raw.get(name, {}) or {}, defaults)
        for name, defaults in _SECTIONS.items()
    }
    seed = raw.get("seed", 1)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer", field="seed")

    c = sections["circuit"]
    try:
        circuit = CircuitParams(
            ec=c["ec_ghz"],
            junctions=JunctionSet(
                ej1=c["ej1_ghz"],
                ej2=c["ej2_ghz"],
                ej3=c["ej3_ghz"],
                ej4=c["ej4_ghz"],
                ej5=c["ej5_ghz"],
            ),
            ec_int_left=c["ec_int_left_ghz"],
            ec_int_right=c["ec_int_right_ghz"],
            ng=c["ng"],
        )
        r = sections["resonator"]
        resonator = ResonatorParams(f_res=r["f_res_ghz"], g=r["g_ghz"])
        n = sections["noise"]
        noise = NoiseConfig(
            q_cap_ref=n["q_cap_ref"],
            alpha_cap=n["alpha_cap"],
            q_ind_ref=n["q_ind_ref"],
            mutual_bias_phi0_per_a=n["mutual_bias_phi0_per_a"],
            mutual_ctrl_phi0_per_a=n["mutual_ctrl_phi0_per_a"],
            bias_line_ohm=n["bias_line_ohm"],
            x_qp=n["x_qp"],
            gap_ghz=n["gap_ghz"],
            one_over_f_phi0=n["one_over_f_phi0"],
            temperature_k=n["temperature_k"],
            loaded_q=n["loaded_q"],
            effective_capacitance_f=n["effective_capacitance_f"],
            effective_inductance_h=n["effective_inductance_h"],
        )
        s = sections["sweep"]
        sweep = SweepSpec(**s)
        so = sections["solver"]
        solver = SolverSpec(**so)
        f = sections["fluxonium"]
        fluxonium = FluxoniumParams(
            ec=f["ec_ghz"],
            ej=f["ej_ghz"],
            el=f["el_ghz"],
            phi_ext=f["phi_ext_phi0"],
            basis_size=f["basis_size"],
        )
    except ConfigError:
        raise
    return RunConfig(
        circuit=circuit,
        resonator=resonator,
        noise=noise,
        sweep=sweep,
        solver=solver,
        fluxonium=fluxonium,
        seed=seed,
    )


def load_config(path) -> RunConfig:
    """Parse and validate a JSON config file.

    Parse errors carry line and column; validation errors name the offending
    field and violated invariant.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return config_from_dict(raw)


def bundled_device_config() -> RunConfig:
    """The packaged device parameter set (fitted energies plus noise table)."""
    text = resources.files("cos2phi").joinpath("data/paper_device.json").read_text("utf-8")
    return config_from_dict(json.loads(text))


def bundled_device_path() -> Path:
    with resources.as_file(
        resources.files("cos2phi").joinpath("data/paper_device.json")
    ) as p:
        return Path(p)
