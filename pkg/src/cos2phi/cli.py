"""Command-line entry points emitting plot-ready CSV/JSON artifacts.

Subcommands map one-to-one onto the figures the model reproduces:
``spectrum`` (two-tone traces), ``resonator-shift``, ``t1-budget``,
``multilevel-t1``, ``fit-spectrum``, ``calibrate-crosstalk``,
``fluxonium-compare`` and ``potential``.  Outputs are deterministic for a
given config and seed: fixed column order, shortest round-trip float
formatting, LF line endings, and a provenance header carrying the tool
version and config hash.

Exit codes: 0 success, 2 usage, 3 validation, 4 numerical failure.  Errors
are emitted as a single JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import Heatmap, recover_crosstalk
from .circuit import diagonalize, phase_wavefunctions, total_potential
from .config import RunConfig, load_config
from .errors import ConfigError, QubitModelError, UsageError
from .fluxonium import fluxonium_potential, fluxonium_spectrum, fluxonium_t1_budget
from .multilevel import build_rate_matrix, effective_t1
from .noise import CHANNELS, t1_budget
from .spectra import (
    SpectroscopyDataset,
    fit_spectrum,
    resonator_shift,
    transition_spectrum_sweep,
)


def _provenance(config: RunConfig) -> str:
    digest = hashlib.sha256(config.dump().encode()).hexdigest()[:12]
    return f"cos2phi {__version__} config_sha256={digest} seed={config.seed}"


def _write_csv(path: Path, header: list[str], rows, provenance: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {provenance}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def read_table(path) -> tuple[list[str], list[list[str]]]:
    """Read back any CSV artifact (comment lines skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        return header, [row for row in reader if row]


def _pmap(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cos2phi",
        description="cos(2phi) transmon simulation: spectra, T1 budgets, calibration",
    )
    parser.add_argument("--version", action="version", version=f"cos2phi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out-dir", default=".", help="artifact output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    for name, help_text in [
        ("spectrum", "transition-frequency sweep over the flux grid"),
        ("resonator-shift", "dispersive resonator shift over the flux grid"),
        ("t1-budget", "per-channel relaxation budget over the flux grid"),
        ("multilevel-t1", "two-level vs N-level T1 over the flux grid"),
        ("fluxonium-compare", "fluxonium spectrum, potential and T1 budget"),
        ("potential", "potential and wavefunctions at the first grid point"),
    ]:
        common(sub.add_parser(name, help=help_text))

    fit = sub.add_parser("fit-spectrum", help="fit junction energies to a dataset")
    common(fit)
    fit.add_argument("--data", required=True, help="CSV dataset (phi_bias,phi_ctrl,f01_ghz,sigma_ghz)")
    fit.add_argument("--no-tie", action="store_true", help="keep the initial small-SQUID asymmetry")

    cal = sub.add_parser("calibrate-crosstalk", help="recover the current-to-flux matrix")
    common(cal)
    cal.add_argument("--heatmap", required=True, help="CSV heatmap with axis headers")
    cal.add_argument(
        "--kernel",
        required=True,
        help="kernel region row0:row1:col0:col1 in map indices",
    )
    return parser


def _cmd_spectrum(config: RunConfig, out_dir: Path, workers: int) -> list[Path]:
    points = config.flux_points()
    if not points:
        raise UsageError("sweep grid is empty")
    rows = transition_spectrum_sweep(
        config.circuit,
        points,
        levels=config.solver.levels - 1,
        n_charge=config.solver.n_charge,
        max_harmonic=config.solver.max_harmonic,
        fourier_tol=config.solver.fourier_tol,
    )
    header = ["phi_bias", "phi_ctrl"] + [
        f"f0{k}_ghz" for k in range(1, config.solver.levels)
    ] + ["error"]
    table = []
    for pt in rows:
        freqs = list(pt.frequencies) if pt.frequencies else [float("nan")] * (config.solver.levels - 1)
        table.append([pt.flux.phi_bias, pt.flux.phi_ctrl, *freqs, pt.error or ""])
    path = out_dir / "spectrum.csv"
    _write_csv(path, header, table, _provenance(config))
    return [path]


def _cmd_resonator_shift(config: RunConfig, out_dir: Path, workers: int) -> list[Path]:
    points = config.flux_points()
    if not points:
        raise UsageError("sweep grid is empty")

    def one(flux):
        out = []
        for state in (0, 1):
            r = resonator_shift(
                config.circuit,
                flux,
                config.resonator,
                from_state=state,
                n_levels=config.solver.levels + 2,
                n_charge=config.solver.n_charge,
                max_harmonic=config.solver.max_harmonic,
                fourier_tol=config.solver.fourier_tol,
            )
            out.append(r)
        return out

    results = _pmap(one, points, workers)
    header = [
        "phi_bias",
        "phi_ctrl",
        "shift_ghz_state0",
        "near_degenerate_state0",
        "shift_ghz_state1",
        "near_degenerate_state1",
    ]
    table = [
        [
            flux.phi_bias,
            flux.phi_ctrl,
            r0.shift,
            int(r0.near_degenerate),
            r1.shift,
            int(r1.near_degenerate),
        ]
        for flux, (r0, r1) in zip(points, results)
    ]
    path = out_dir / "resonator_shift.csv"
    _write_csv(path, header, table, _provenance(config))
    return [path]


def _cmd_t1_budget(config: RunConfig, out_dir: Path, workers: int) -> list[Path]:
    points = config.flux_points()
    if not points:
        raise UsageError("sweep grid is empty")

    def one(flux):
        try:
            return t1_budget(
                config.circuit,
                flux,
                config.resonator,
                config.noise,
                n_charge=config.solver.n_charge,
                max_harmonic=config.solver.max_harmonic,
                fourier_tol=config.solver.fourier_tol,
            ), ""
        except QubitModelError as exc:
            return None, str(exc)

    results = _pmap(one, points, workers)
    header = ["phi_bias", "phi_ctrl", "f01_ghz"] + [f"rate_{c}_per_s" for c in CHANNELS] + [
        "total_rate_per_s",
        "t1_s",
        "error",
    ]
    table = []
    for flux, (budget, err) in zip(points, results):
        if budget is None:
            table.append(
                [flux.phi_bias, flux.phi_ctrl] + [float("nan")] * (len(CHANNELS) + 3) + [err]
            )
        else:
            table.append(
                [flux.phi_bias, flux.phi_ctrl, budget.f01]
                + [budget.rate(c) for c in CHANNELS]
                + [budget.total_rate, budget.t1, ""]
            )
    path = out_dir / "t1_budget.csv"
    _write_csv(path, header, table, _provenance(config))
    return [path]


def _cmd_multilevel(config: RunConfig, out_dir: Path, workers: int) -> list[Path]:
    points = config.flux_points()
    if not points:
        raise UsageError("sweep grid is empty")

    def one(flux):
        budget = t1_budget(
            config.circuit,
            flux,
            config.resonator,
            config.noise,
            n_charge=config.solver.n_charge,
            max_harmonic=config.solver.max_harmonic,
            fourier_tol=config.solver.fourier_tol,
        )
        rm = build_rate_matrix(
            config.circuit,
            flux,
            config.resonator,
            config.noise,
            n_levels=config.solver.multilevel_n,
            n_charge=config.solver.n_charge,
            max_harmonic=config.solver.max_harmonic,
            fourier_tol=config.solver.fourier_tol,
        )
        fit = effective_t1(rm)
        return budget, fit

    results = _pmap(one, points, workers)
    header = [
        "phi_bias",
        "phi_ctrl",
        "f01_ghz",
        "t1_two_level_s",
        "t1_n_level_s",
        "n_levels",
        "fit_residual",
        "clean_fit",
    ]
    table = [
        [
            flux.phi_bias,
            flux.phi_ctrl,
            budget.f01,
            budget.t1,
            fit.t1,
            config.solver.multilevel_n,
            fit.fit_residual,
            int(fit.clean),
        ]
        for flux, (budget, fit) in zip(points, results)
    ]
    path = out_dir / "multilevel_t1.csv"
    _write_csv(path, header, table, _provenance(config))
    return [path]


def _cmd_fit_spectrum(config: RunConfig, out_dir: Path, args) -> list[Path]:
    data = SpectroscopyDataset.from_csv(args.data)
    result = fit_spectrum(
        data,
        fixed_ec=config.circuit.ec,
        initial=config.circuit.junctions,
        tie_small_squid=not args.no_tie,
        n_charge=config.solver.n_charge,
        max_harmonic=config.solver.max_harmonic,
        fourier_tol=config.solver.fourier_tol,
        seed=config.seed,
    )
    path = out_dir / "fit_result.json"
    payload = result.to_dict()
    payload["provenance"] = _provenance(config)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [path]


def _parse_kernel(spec: str) -> tuple[int, int, int, int]:
    parts = spec.split(":")
    if len(parts) != 4:
        raise UsageError("kernel must be row0:row1:col0:col1")
    try:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    except ValueError as exc:
        raise UsageError("kernel indices must be integers") from exc


def _cmd_calibrate(config: RunConfig, out_dir: Path, args) -> list[Path]:
    heatmap = Heatmap.from_csv(args.heatmap)
    result = recover_crosstalk(
        heatmap,
        _parse_kernel(args.kernel),
        config.circuit,
        config.resonator,
    )
    path = out_dir / "crosstalk.json"
    payload = json.loads(result.matrix.to_json())
    payload.update(
        score=result.score,
        candidates_tried=result.candidates_tried,
        modulation_ratio=result.modulation_ratio,
        assignment_ambiguous=result.assignment_ambiguous,
        provenance=_provenance(config),
    )
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [path]


def _cmd_fluxonium(config: RunConfig, out_dir: Path, workers: int) -> list[Path]:
    fx = config.fluxonium
    prov = _provenance(config)
    ext = np.linspace(0.0, 1.0, 81)
    spec_rows = fluxonium_spectrum(fx, ext, levels=3)
    spectrum_path = out_dir / "fluxonium_spectrum.csv"
    _write_csv(
        spectrum_path,
        ["phi_ext", "f01_ghz", "f02_ghz", "f03_ghz"],
        [[pe, *freqs] for pe, freqs in spec_rows],
        prov,
    )
    phi = np.linspace(-np.pi, 3 * np.pi, 257)
    pot_path = out_dir / "fluxonium_potential.csv"
    _write_csv(
        pot_path,
        ["phi_rad", "potential_ghz"],
        [[float(x), float(u)] for x, u in zip(phi, fluxonium_potential(fx, phi))],
        prov,
    )
    budget = fluxonium_t1_budget(fx, config.noise, config.resonator)
    budget_path = out_dir / "fluxonium_t1.csv"
    _write_csv(
        budget_path,
        ["phi_ext", "f01_ghz"] + [f"rate_{c}_per_s" for c in CHANNELS] + ["total_rate_per_s", "t1_s"],
        [[fx.phi_ext, budget.f01, *[budget.rate(c) for c in CHANNELS], budget.total_rate, budget.t1]],
        prov,
    )
    return [spectrum_path, pot_path, budget_path]


def _cmd_potential(config: RunConfig, out_dir: Path, workers: int) -> list[Path]:
    points = config.flux_points()
    if not points:
        raise UsageError("sweep grid is empty")
    flux = points[0]
    levels = config.solver.levels
    eig = diagonalize(
        config.circuit,
        flux,
        config.solver.n_charge,
        levels,
        max_harmonic=config.solver.max_harmonic,
        tol=config.solver.fourier_tol,
    )
    phi, psi = phase_wavefunctions(eig, list(range(levels)), 512)
    u = total_potential(config.circuit, flux, phi)
    header = ["phi_rad", "potential_ghz"] + [
        f"psi{k}_plus_e{k}_ghz" for k in range(levels)
    ]
    table = []
    for row, (x, uval) in enumerate(zip(phi, u)):
        offsets = [float(psi[row, k].real + eig.energies[k]) for k in range(levels)]
        table.append([float(x), float(uval), *offsets])
    path = out_dir / "potential.csv"
    _write_csv(path, header, table, _provenance(config))
    return [path]


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "spectrum":
            paths = _cmd_spectrum(config, out_dir, args.workers)
        elif args.command == "resonator-shift":
            paths = _cmd_resonator_shift(config, out_dir, args.workers)
        elif args.command == "t1-budget":
            paths = _cmd_t1_budget(config, out_dir, args.workers)
        elif args.command == "multilevel-t1":
            paths = _cmd_multilevel(config, out_dir, args.workers)
        elif args.command == "fit-spectrum":
            paths = _cmd_fit_spectrum(config, out_dir, args)
        elif args.command == "calibrate-crosstalk":
            paths = _cmd_calibrate(config, out_dir, args)
        elif args.command == "fluxonium-compare":
            paths = _cmd_fluxonium(config, out_dir, args.workers)
        elif args.command == "potential":
            paths = _cmd_potential(config, out_dir, args.workers)
        else:  # pragma: no cover - argparse enforces the choices
            raise UsageError(f"unknown command {args.command}")
    except UsageError as exc:
        _emit_error(exc)
        return 2
    except (ConfigError, FileNotFoundError) as exc:
        _emit_error(exc)
        return 3
    except QubitModelError as exc:
        _emit_error(exc)
        return 4
    for p in paths:
        print(p)
    return 0


def _emit_error(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field:
        payload["field"] = field
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main() -> None:
    raise SystemExit(run_command())
