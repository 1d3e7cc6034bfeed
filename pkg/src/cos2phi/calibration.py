"""Flux cross-talk calibration from raw current-sweep heatmaps.

The two control currents (on-chip flux-bias line and external coil) each
thread both loops; the linear map to loop fluxes is recovered from the
periodic structure of a resonator-shift heatmap.  A kernel region is
cross-correlated against the full map, correlation peaks are clustered, and
the two shortest independent displacement vectors form a basis of the
current-space periodicity lattice.

A lattice basis determines the transformation only up to an integer
(unimodular) change of basis, row order, and row signs.  ``recover_crosstalk``
resolves that ambiguity by scoring candidate transformations against a model
map of the device on the flux unit cell, then applies a documented sign
convention (each row's largest entry positive).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.signal import fftconvolve

from .circuit import CircuitParams, FluxBias, diagonalize
from .errors import (
    ConditioningError,
    ConfigError,
    InsufficientPeriodicityError,
)
from .spectra import ResonatorParams, shift_from_eigensystem

MIN_BASIS_ANGLE_DEG = 5.0


@dataclass(frozen=True)
class CrosstalkMatrix:
    """Linear map from control currents (mA) to loop fluxes (Phi0).

    Row 0 produces phi_bias-tilde, row 1 phi_ctrl; columns are (FBL, coil).
    Optional offsets are the fluxes at zero applied current.
    """

    matrix: np.ndarray
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).reshape(2, 2)
        o = np.asarray(self.offsets, dtype=float).reshape(2)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offsets", o)
        if not np.all(np.isfinite(m)) or not np.all(np.isfinite(o)):
            raise ConfigError("cross-talk entries must be finite")
        if np.linalg.det(m) == 0:
            raise ConditioningError("cross-talk matrix must be invertible")

    def to_json(self) -> str:
        payload = {
            "matrix_phi0_per_ma": [[float(x) for x in row] for row in self.matrix],
            "offsets_phi0": [float(x) for x in self.offsets],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CrosstalkMatrix":
        payload = json.loads(text)
        return cls(
            matrix=np.asarray(payload["matrix_phi0_per_ma"], dtype=float),
            offsets=np.asarray(payload.get("offsets_phi0", [0.0, 0.0]), dtype=float),
        )


def apply_crosstalk(m: CrosstalkMatrix, fbl_ma: float, coil_ma: float) -> tuple[float, float]:
    """Currents to fluxes; the first output is the intermediate phi_bias-tilde.

    Only the Phi_S/2 half-compensation is contained in the linear map; the
    remaining delta-dependent shift is applied by ``rebase_flux``.
    """
    flux = m.matrix @ np.array([fbl_ma, coil_ma]) + m.offsets
    return float(flux[0]), float(flux[1])


def rebase_flux(phi_b_tilde: float, phi_s: float, d: float) -> FluxBias:
    """Intermediate coordinates to the symmetric Phi_bias frame.

    Phi_bias = Phi_tilde + Phi_S/2 - delta/(2 pi), which reduces to the
    identity for a symmetric small SQUID (d = 0).
    """
    x = math.pi * phi_s
    sign = 1.0 if d >= 0 else -1.0
    principal = math.atan2(d * math.sin(x), math.cos(x))
    branch = principal + 2.0 * math.pi * round((sign * x - principal) / (2.0 * math.pi))
    delta = x + branch
    phi_bias = phi_b_tilde + 0.5 * phi_s - delta / (2.0 * math.pi)
    return FluxBias(
        phi_bias=phi_bias,
        phi_ctrl=phi_s,
        delta=delta,
        phi_b_raw=phi_bias + delta / (2.0 * math.pi),
    )


# ---------------------------------------------------------------------------
# heatmaps


@dataclass(frozen=True)
class Heatmap:
    """Resonator-shift map over a rectangular current grid.

    ``values[i, j]`` belongs to ``fbl_ma[i]``, ``coil_ma[j]``; failed fits may
    be NaN and are excluded from correlation sums.
    """

    fbl_ma: np.ndarray
    coil_ma: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        fbl = np.asarray(self.fbl_ma, dtype=float)
        coil = np.asarray(self.coil_ma, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "fbl_ma", fbl)
        object.__setattr__(self, "coil_ma", coil)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(fbl), len(coil)):
            raise ConfigError("heatmap shape does not match its axes")
        for axis in (fbl, coil):
            if len(axis) < 2 or not (np.all(np.diff(axis) > 0) or np.all(np.diff(axis) < 0)):
                raise ConfigError("heatmap axes must be monotone")

    @property
    def fbl_step(self) -> float:
        return float(np.mean(np.diff(self.fbl_ma)))

    @property
    def coil_step(self) -> float:
        return float(np.mean(np.diff(self.coil_ma)))

    def to_csv(self, path, provenance: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["fbl_ma\\coil_ma"] + [repr(float(c)) for c in self.coil_ma])
            for i, f in enumerate(self.fbl_ma):
                writer.writerow(
                    [repr(float(f))] + [repr(float(v)) for v in self.values[i]]
                )

    @classmethod
    def from_csv(cls, path) -> "Heatmap":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(line for line in fh if not line.startswith("#"))
            header = next(reader)
            coil = np.array([float(x) for x in header[1:]])
            fbl, rows = [], []
            for row in reader:
                if not row:
                    continue
                fbl.append(float(row[0]))
                rows.append([float(x) for x in row[1:]])
        return cls(fbl_ma=np.array(fbl), coil_ma=coil, values=np.array(rows))


def _masked_ncc(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Normalised cross-correlation over valid placements, NaN-aware."""
    v_mask = np.isfinite(values).astype(float)
    k_mask = np.isfinite(kernel).astype(float)
    v = np.where(v_mask > 0, values, 0.0)
    k = np.where(k_mask > 0, kernel, 0.0)

    def corr(a, b):
        return fftconvolve(a, b[::-1, ::-1], mode="valid")

    n = corr(v_mask, k_mask)
    sum_v = corr(v, k_mask)
    sum_v2 = corr(v * v, k_mask)
    sum_k = corr(v_mask, k)
    sum_k2 = corr(v_mask, k * k)
    sum_vk = corr(v, k)

    with np.errstate(invalid="ignore", divide="ignore"):
        cov = sum_vk - sum_v * sum_k / n
        var_v = sum_v2 - sum_v**2 / n
        var_k = sum_k2 - sum_k**2 / n
        ncc = cov / np.sqrt(var_v * var_k)
    ncc[~np.isfinite(ncc)] = -1.0
    # placements with less than half the kernel overlapping valid cells
    ncc[n < 0.5 * k_mask.sum()] = -1.0
    return np.clip(ncc, -1.0, 1.0)


def _subpixel_offset(patch: np.ndarray) -> tuple[float, float]:
    """Quadratic 1D refinements of a 3x3 neighbourhood around a peak."""

    def refine(fm, f0, fp):
        denom = fm - 2.0 * f0 + fp
        if denom >= 0:
            return 0.0
        return float(np.clip(0.5 * (fm - fp) / denom, -0.5, 0.5))

    return refine(patch[0, 1], patch[1, 1], patch[2, 1]), refine(
        patch[1, 0], patch[1, 1], patch[1, 2]
    )


def _peak_clusters(ncc: np.ndarray, threshold: float, radius: float) -> list[np.ndarray]:
    padded = np.pad(ncc, 1, constant_values=-np.inf)
    core = padded[1:-1, 1:-1]
    is_max = np.ones_like(ncc, dtype=bool)
    for di, dj in product((-1, 0, 1), repeat=2):
        if di == dj == 0:
            continue
        is_max &= core >= padded[1 + di : 1 + di + ncc.shape[0], 1 + dj : 1 + dj + ncc.shape[1]]
    cand = np.argwhere(is_max & (ncc >= threshold))
    if len(cand) == 0:
        return []
    refined = []
    weights = []
    for i, j in cand:
        di = dj = 0.0
        if 0 < i < ncc.shape[0] - 1 and 0 < j < ncc.shape[1] - 1:
            di, dj = _subpixel_offset(ncc[i - 1 : i + 2, j - 1 : j + 2])
        refined.append((i + di, j + dj))
        weights.append(ncc[i, j])
    refined = np.asarray(refined)
    weights = np.asarray(weights)
    # single-linkage chaining within the cluster radius
    unassigned = list(range(len(refined)))
    clusters = []
    while unassigned:
        stack = [unassigned.pop(0)]
        members = [stack[0]]
        while stack:
            a = stack.pop()
            close = [
                b
                for b in list(unassigned)
                if np.hypot(*(refined[a] - refined[b])) <= radius
            ]
            for b in close:
                unassigned.remove(b)
                stack.append(b)
                members.append(b)
        w = weights[members]
        clusters.append(np.average(refined[members], axis=0, weights=w))
    return clusters


def detect_lattice(
    h: Heatmap,
    kernel_region: tuple[int, int, int, int],
    *,
    threshold: float = 0.6,
    cluster_radius_px: float = 2.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Two shortest independent lattice vectors of a periodic heatmap, in mA.

    ``kernel_region`` is (row_start, row_stop, col_start, col_stop) in map
    indices.  Vectors are (d_fbl, d_coil) pairs oriented into the upper
    half-plane (positive coil component, or positive FBL on the boundary).
    """
    r0, r1, c0, c1 = kernel_region
    nr, nc = h.values.shape
    if not (0 <= r0 < r1 <= nr and 0 <= c0 < c1 <= nc):
        raise ConfigError("kernel region must lie inside the heatmap")
    kernel = h.values[r0:r1, c0:c1]
    ncc = _masked_ncc(h.values, kernel)
    clusters = _peak_clusters(ncc, threshold, cluster_radius_px)
    if len(clusters) < 3:
        raise InsufficientPeriodicityError(
            f"found {len(clusters)} correlation peaks; need at least 3 to span a lattice"
        )
    step = np.array([h.fbl_step, h.coil_step])
    displacements = []
    for a in range(len(clusters)):
        for b in range(len(clusters)):
            if a != b:
                displacements.append((np.asarray(clusters[a]) - np.asarray(clusters[b])) * step)
    displacements.sort(key=lambda d: float(np.hypot(*d)))
    v1 = np.asarray(displacements[0])
    v2 = None
    for d in displacements[1:]:
        sin_angle = abs(v1[0] * d[1] - v1[1] * d[0]) / (
            np.hypot(*v1) * np.hypot(*d)
        )
        if sin_angle > 0.01:
            v2 = np.asarray(d)
            break
    if v2 is None:
        raise InsufficientPeriodicityError("all displacement vectors are collinear")
    return _orient_up(v1), _orient_up(v2)


def _orient_up(v: np.ndarray) -> np.ndarray:
    if v[1] < 0 or (v[1] == 0 and v[0] < 0):
        return -v
    return v


def lattice_to_matrix(v1, v2) -> CrosstalkMatrix:
    """Invert a lattice basis into a cross-talk matrix (one Phi0 per step).

    M satisfies M v1 = (1, 0) and M v2 = (0, 1); the caller (or the recovery
    pipeline) decides which lattice vector belongs to which loop.
    """
    basis = np.column_stack([np.asarray(v1, float), np.asarray(v2, float)])
    norms = np.linalg.norm(basis, axis=0)
    if np.any(norms == 0):
        raise ConditioningError("lattice vectors must be non-zero")
    sin_angle = abs(np.linalg.det(basis)) / (norms[0] * norms[1])
    if sin_angle < math.sin(math.radians(MIN_BASIS_ANGLE_DEG)):
        raise ConditioningError("lattice vectors are closer than 5 degrees to parallel")
    return CrosstalkMatrix(matrix=np.linalg.inv(basis))


# ---------------------------------------------------------------------------
# model-based recovery pipeline


@dataclass(frozen=True)
class RecoveryResult:
    matrix: CrosstalkMatrix
    score: float
    candidates_tried: int
    modulation_ratio: float
    assignment_ambiguous: bool


def _periodic_bilinear(grid: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a [0,1)^2-periodic grid at fractional coords."""
    n, m = grid.shape
    x = (u % 1.0) * n
    y = (v % 1.0) * m
    i0 = np.floor(x).astype(int) % n
    j0 = np.floor(y).astype(int) % m
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % m
    fx = x - np.floor(x)
    fy = y - np.floor(y)
    return (
        grid[i0, j0] * (1 - fx) * (1 - fy)
        + grid[i1, j0] * fx * (1 - fy)
        + grid[i0, j1] * (1 - fx) * fy
        + grid[i1, j1] * fx * fy
    )


def model_unit_maps(
    params: CircuitParams,
    res: ResonatorParams,
    *,
    grid: int = 40,
    n_charge: int = 24,
    levels: int = 7,
    shift_clip_ghz: float = 0.02,
    max_harmonic: int = 16,
) -> tuple[np.ndarray, np.ndarray]:
    """Resonator shift and f01 on the flux unit cell [0,1)^2.

    Axis 0 is phi_bias, axis 1 phi_ctrl.  Shifts are clipped near avoided
    crossings so correlation scores are not dominated by single cells.
    """
    shift = np.empty((grid, grid))
    f01 = np.empty((grid, grid))
    for i in range(grid):
        for j in range(grid):
            flux = params.flux((i + 0.5) / grid, (j + 0.5) / grid)
            eig = diagonalize(params, flux, n_charge, levels, max_harmonic=max_harmonic)
            shift[i, j] = shift_from_eigensystem(eig, res).shift
            f01[i, j] = eig.transition(0, 1)
    return np.clip(shift, -shift_clip_ghz, shift_clip_ghz), f01


def synthesize_heatmap(
    true_matrix: CrosstalkMatrix,
    shift_map: np.ndarray,
    fbl_ma: np.ndarray,
    coil_ma: np.ndarray,
    *,
    grid_offset: float = 0.5,
) -> Heatmap:
    """Forward-model heatmap: currents -> fluxes -> interpolated shift map."""
    ff, cc = np.meshgrid(fbl_ma, coil_ma, indexing="ij")
    flux = np.tensordot(true_matrix.matrix, np.stack([ff, cc]), axes=1)
    flux += true_matrix.offsets[:, None, None]
    n = shift_map.shape[0]
    # cell-centre registration used by model_unit_maps
    vals = _periodic_bilinear(
        shift_map, flux[0] - grid_offset / n, flux[1] - grid_offset / n
    )
    return Heatmap(fbl_ma=fbl_ma, coil_ma=coil_ma, values=vals)


def _unimodular_candidates(bound: int):
    rng = range(-bound, bound + 1)
    for a, b, c, d in product(rng, repeat=4):
        if a * d - b * c in (1, -1):
            yield np.array([[a, b], [c, d]])


def _row_sign_convention(m: np.ndarray) -> np.ndarray:
    out = m.copy()
    for r in range(2):
        anchor = out[r, int(np.argmax(np.abs(out[r])))]
        if anchor < 0:
            out[r] = -out[r]
    return out


def recover_crosstalk(
    h: Heatmap,
    kernel_region: tuple[int, int, int, int],
    params: CircuitParams,
    res: ResonatorParams,
    *,
    threshold: float = 0.6,
    cluster_radius_px: float = 2.0,
    coeff_bound: int = 5,
    model_grid: int = 40,
    n_charge: int = 24,
    shift_clip_ghz: float = 0.02,
) -> RecoveryResult:
    """Full pipeline: detect the lattice, then pin down the flux basis.

    The detected basis fixes the lattice only up to a unimodular transform;
    every candidate basis with bounded integer coefficients is scored by
    correlating the heatmap against the model map in candidate coordinates.
    Rows are finally sign-fixed (largest entry positive).  The f01 modulation
    along each flux axis is reported; when the two modulations differ by less
    than 10% the loop assignment is flagged ambiguous rather than trusted.
    """
    w1, w2 = detect_lattice(
        h, kernel_region, threshold=threshold, cluster_radius_px=cluster_radius_px
    )
    shift_map, f01_map = model_unit_maps(
        params,
        res,
        grid=model_grid,
        n_charge=n_charge,
        shift_clip_ghz=shift_clip_ghz,
    )
    ff, cc = np.meshgrid(h.fbl_ma, h.coil_ma, indexing="ij")
    valid = np.isfinite(h.values)
    data = h.values[valid]
    data = data - data.mean()
    data_norm = float(np.sqrt(np.sum(data**2)))
    base = np.column_stack([w1, w2])
    n_cell = shift_map.shape[0]

    best_score = -np.inf
    best_matrix: np.ndarray | None = None
    tried = 0
    seen: set[tuple] = set()
    for u in _unimodular_candidates(coeff_bound):
        basis = base @ u
        norms = np.linalg.norm(basis, axis=0)
        sin_angle = abs(np.linalg.det(basis)) / (norms[0] * norms[1])
        if sin_angle < math.sin(math.radians(MIN_BASIS_ANGLE_DEG)):
            continue
        candidate = _row_sign_convention(np.linalg.inv(basis))
        key = tuple(np.round(candidate.ravel(), 9))
        if key in seen:
            continue
        seen.add(key)
        tried += 1
        phib = candidate[0, 0] * ff + candidate[0, 1] * cc
        phic = candidate[1, 0] * ff + candidate[1, 1] * cc
        pred = _periodic_bilinear(
            shift_map, phib - 0.5 / n_cell, phic - 0.5 / n_cell
        )[valid]
        pred = pred - pred.mean()
        denom = data_norm * float(np.sqrt(np.sum(pred**2)))
        if denom == 0:
            continue
        score = float(np.sum(pred * data)) / denom
        if score > best_score:
            best_score = score
            best_matrix = candidate
    if best_matrix is None:
        raise ConditioningError("no well-conditioned candidate basis found")

    mod_ctrl = float(np.median(np.ptp(f01_map, axis=1)))
    mod_bias = float(np.median(np.ptp(f01_map, axis=0)))
    larger = max(mod_ctrl, mod_bias)
    ambiguous = larger > 0 and abs(mod_ctrl - mod_bias) < 0.1 * larger
    ratio = mod_ctrl / mod_bias if mod_bias > 0 else math.inf
    return RecoveryResult(
        matrix=CrosstalkMatrix(matrix=best_matrix),
        score=best_score,
        candidates_tried=tried,
        modulation_ratio=ratio,
        assignment_ambiguous=ambiguous,
    )
