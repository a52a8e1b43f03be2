"""Weighted point clouds as discrete Radon measures.

Weights are measure mass (no normalization), so density ratios are directly
comparable with ``omega_m r^m``.  All balls are closed.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.spatial import cKDTree

from .errors import CsvFormatError, DimensionMismatch, EmptyBall, ZeroDirection
from .geom import Plane, unit_ball_volume

BRUTE_FORCE_BELOW = 256
GRID_CELL_COST = 64


class _GridIndex:
    """Uniform grid over the bounding box; cells keyed by integer coordinates."""

    def __init__(self, points: np.ndarray, cell: float):
        self.cell = cell
        self.lo = points.min(axis=0)
        keys = np.floor((points - self.lo) / cell).astype(np.int64)
        self.shape = keys.max(axis=0) + 1
        order = np.lexsort(keys.T[::-1])
        sorted_keys = keys[order]
        self.order = order
        self.cells: dict[tuple, np.ndarray] = {}
        if len(order):
            change = np.any(np.diff(sorted_keys, axis=0) != 0, axis=1)
            starts = np.concatenate([[0], np.nonzero(change)[0] + 1, [len(order)]])
            for s, e in zip(starts[:-1], starts[1:]):
                self.cells[tuple(sorted_keys[s].tolist())] = order[s:e]

    def candidate_count(self, a: np.ndarray, r: float) -> float:
        lo = np.floor((a - r - self.lo) / self.cell)
        hi = np.floor((a + r - self.lo) / self.cell)
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, self.shape - 1)
        if np.any(hi < lo):
            return 0.0
        return float(np.prod(hi - lo + 1))

    def candidates(self, a: np.ndarray, r: float) -> np.ndarray:
        lo = np.maximum(np.floor((a - r - self.lo) / self.cell), 0).astype(np.int64)
        hi = np.minimum(np.floor((a + r - self.lo) / self.cell), self.shape - 1).astype(np.int64)
        if np.any(hi < lo):
            return np.empty(0, dtype=np.intp)
        found = []
        ranges = [range(int(l), int(h) + 1) for l, h in zip(lo, hi)]
        for key in itertools.product(*ranges):
            idx = self.cells.get(key)
            if idx is not None:
                found.append(idx)
        return np.concatenate(found) if found else np.empty(0, dtype=np.intp)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Weighted empirical measure on R^n with intended dimension m."""

    points: np.ndarray
    weights: np.ndarray
    m: int
    _index: _GridIndex | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("point cloud must be a non-empty (N, n) array")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise DimensionMismatch(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("non-finite coordinates or weights")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if not 1 <= self.m < pts.shape[1]:
            raise ValueError(f"need 1 <= m < n, got m={self.m}, n={pts.shape[1]}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if pts.shape[0] >= BRUTE_FORCE_BELOW:
            nn = self.nearest_neighbor_distances()
            typical = float(np.median(nn[nn > 0])) if np.any(nn > 0) else 0.0
            if typical > 0:
                object.__setattr__(self, "_index", _GridIndex(pts, typical / 2))

    @classmethod
    def uniform(cls, points, m: int, total_mass: float = 1.0) -> "PointCloud":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(len(pts), total_mass / len(pts)), m)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def _nn(self) -> np.ndarray:
        if len(self.points) == 1:
            return np.zeros(1)
        d, _ = cKDTree(self.points).query(self.points, k=2)
        return d[:, 1]

    def nearest_neighbor_distances(self) -> np.ndarray:
        """Distance from each point to its nearest other point (0 for duplicates)."""
        return self._nn.copy()

    def ball_indices(self, a, r: float) -> np.ndarray:
        """Sorted indices of cloud points x with |x - a| <= r."""
        if r < 0:
            raise ValueError("radius must be nonnegative")
        a = np.asarray(a, dtype=float)
        if math.isinf(r):
            return np.arange(len(self))
        idx = None
        # visiting a cell costs about as much as testing GRID_CELL_COST points directly
        if self._index is not None and self._index.candidate_count(a, r) * GRID_CELL_COST < len(self):
            idx = self._index.candidates(a, r)
            pts = self.points[idx]
        else:
            pts = self.points
        d2 = np.sum((pts - a) ** 2, axis=1)
        hit = d2 <= r * r
        out = np.nonzero(hit)[0] if idx is None else np.sort(idx[hit])
        return out

    def ball_indices_brute(self, a, r: float) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return np.nonzero(np.sum((self.points - a) ** 2, axis=1) <= r * r)[0]

    def ball_mass(self, a, r: float) -> float:
        return float(self.weights[self.ball_indices(a, r)].sum())

    def restrict(self, idx: np.ndarray) -> "PointCloud":
        return PointCloud(self.points[idx], self.weights[idx], self.m)

    def scaled_weights(self, factor: float) -> "PointCloud":
        return PointCloud(self.points, self.weights * factor, self.m)

    def with_weights(self, weights) -> "PointCloud":
        return PointCloud(self.points, weights, self.m)


def ball_mass(cloud: PointCloud, a, r: float) -> float:
    return cloud.ball_mass(a, r)


def require_ball(cloud: PointCloud, a, r: float) -> np.ndarray:
    idx = cloud.ball_indices(a, r)
    if len(idx) == 0:
        raise EmptyBall(f"no cloud points in the closed ball of radius {r:g}")
    return idx


def dyadic_radii(r0: float, depth: int) -> np.ndarray:
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return r0 * 2.0 ** -np.arange(depth)


@dataclass
class DensityProfile:
    radii: np.ndarray
    masses: np.ndarray
    ratios: np.ndarray
    omega_m: float
    m: int

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min())

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def empty(self) -> np.ndarray:
        return self.masses == 0

    def to_dict(self) -> dict:
        return {
            "radii": self.radii.tolist(),
            "ratios": self.ratios.tolist(),
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
        }


def density_profile(cloud: PointCloud, a, r0: float, depth: int) -> DensityProfile:
    """Ratios mu(B(a, r_k)) / (omega_m r_k^m) at r_k = r0 2^-k."""
    radii = dyadic_radii(r0, depth)
    omega = unit_ball_volume(cloud.m)
    masses = np.array([cloud.ball_mass(a, r) for r in radii])
    return DensityProfile(radii, masses, masses / (omega * radii**cloud.m), omega, cloud.m)


@dataclass(frozen=True)
class Stratum:
    j: int | None
    k: int | None

    @property
    def bounded(self) -> bool:
        return self.j is not None

    def to_dict(self) -> dict:
        return {"j": self.j, "k": self.k, "label": "unbounded" if self.j is None else f"A_{self.j},{self.k}"}


def _criterion(ratios: np.ndarray, radii: np.ndarray, cutoff: float, lower: float, upper: float) -> bool:
    tested = radii < cutoff
    if not np.any(tested):
        return False
    r = ratios[tested]
    return bool(np.all((r > lower) & (r <= upper)))


def stratify_point(profile: DensityProfile, j_max: int, k_max: int) -> Stratum:
    radii, ratios = profile.radii, profile.ratios
    for j in range(1, j_max + 1):
        if _criterion(ratios, radii, 1.0 / j, 1.0 / j, j):
            for k in range(1, k_max + 1):
                if _criterion(ratios, radii, 1.0 / k, 1.0 / (2 * j), j):
                    return Stratum(j, k)
            return Stratum(j, None)
    return Stratum(None, None)


def stratify(cloud: PointCloud, j_max: int, k_max: int, r0: float, depth: int = 8,
             min_radius: float | None = None, indices: Iterable[int] | None = None) -> list[Stratum]:
    """Density strata (j, k) per point.

    Radii below ``min_radius`` (default: twice the median nearest-neighbour
    spacing) are not tested: a finite cloud says nothing about densities
    there.
    """
    if j_max < 1 or k_max < 1:
        raise ValueError("j_max and k_max must be >= 1")
    if min_radius is None:
        nn = cloud.nearest_neighbor_distances()
        min_radius = 2.0 * float(np.median(nn))
    radii = dyadic_radii(r0, depth)
    radii = radii[radii >= min_radius]
    if radii.size == 0:
        radii = np.array([r0])
    omega = unit_ball_volume(cloud.m)
    idx = range(len(cloud)) if indices is None else indices
    out = []
    for i in idx:
        a = cloud.points[i]
        masses = np.array([cloud.ball_mass(a, r) for r in radii])
        prof = DensityProfile(radii, masses, masses / (omega * radii**cloud.m), omega, cloud.m)
        out.append(stratify_point(prof, j_max, k_max))
    return out


def cone_min_distance(b_minus_a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """inf over t > 0 of |t (b - a) - v|, in closed form."""
    u = np.atleast_2d(np.asarray(b_minus_a, dtype=float))
    v = np.asarray(v, dtype=float)
    vn = np.linalg.norm(v)
    un = np.linalg.norm(u, axis=1)
    out = np.full(len(u), vn)
    ok = un > 0
    cos = np.zeros(len(u))
    cos[ok] = (u[ok] @ v) / (un[ok] * vn)
    pos = ok & (cos > 0)
    out[pos] = vn * np.sqrt(np.clip(1 - cos[pos] ** 2, 0, None))
    return out


def cone_members(cloud: PointCloud, a, v, eps: float) -> np.ndarray:
    """Indices of points b in the cone E(a, v, eps)."""
    v = np.asarray(v, dtype=float)
    vn = float(np.linalg.norm(v))
    if vn == 0:
        raise ZeroDirection("cone direction must be nonzero")
    if eps <= 0:
        raise ValueError("eps must be positive")
    diff = cloud.points - np.asarray(a, dtype=float)
    dn = np.linalg.norm(diff, axis=1)
    if eps < vn:
        ok = dn > 0
        cos = np.full(len(dn), -np.inf)
        cos[ok] = (diff[ok] @ v) / (dn[ok] * vn)
        hit = cos > math.sqrt(1 - eps * eps / (vn * vn))
    else:
        # the infimum |v| at cos <= 0 is approached only as t -> 0 and never attained
        dmin = cone_min_distance(diff, v)
        hit = (dn > 0) & (dmin < eps)
    return np.nonzero(hit)[0]


def cone_members_by_definition(cloud: PointCloud, a, v, eps: float) -> np.ndarray:
    """Same set as ``cone_members``, via the closed-form minimum over t for every eps."""
    diff = cloud.points - np.asarray(a, dtype=float)
    dn = np.linalg.norm(diff, axis=1)
    dmin = cone_min_distance(diff, np.asarray(v, dtype=float))
    return np.nonzero((dn > 0) & (dmin < eps))[0]


@dataclass
class ContainmentDefect:
    ratio_form: float
    height_form: float


def tangent_containment_defect(cloud: PointCloud, a, T: Plane, r: float) -> ContainmentDefect:
    """Discrete versions of r^-m int |proj_perp(b-a)|/|b-a| and r^-m-1 int |proj_perp(b-a)| over B(a, r)."""
    if r <= 0:
        raise ValueError("r must be positive")
    a = np.asarray(a, dtype=float)
    idx = cloud.ball_indices(a, r)
    diff = cloud.points[idx] - a
    dn = np.linalg.norm(diff, axis=1)
    keep = dn > 0
    diff, dn, w = diff[keep], dn[keep], cloud.weights[idx][keep]
    heights = np.linalg.norm(T.reject(diff) if T.offset is None else T.linear().reject(diff), axis=1)
    m = cloud.m
    return ContainmentDefect(
        ratio_form=float(np.sum(w * heights / dn)) / r**m,
        height_form=float(np.sum(w * heights)) / r ** (m + 1),
    )


def chebyshev_excess_mass(weights: np.ndarray, values: np.ndarray, K: float,
                          mask: np.ndarray | None = None) -> tuple[float, float]:
    """(mass of {x in A : |f(x)| > K mean_A |f|}, mass(A))."""
    w = np.asarray(weights, dtype=float)
    f = np.abs(np.asarray(values, dtype=float))
    if mask is not None:
        w, f = w[mask], f[mask]
    total = float(w.sum())
    if total == 0:
        return 0.0, 0.0
    mean = float(np.sum(w * f)) / total
    return float(w[f > K * mean].sum()), total


def read_cloud_csv(path_or_text: str | Path, m: int, reference_mass: float = 1.0) -> PointCloud:
    """Parse ``x1,...,xn[,w]`` CSV; missing weights become reference_mass / count."""
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text(encoding="utf-8")
    else:
        text = path_or_text
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CsvFormatError("empty CSV input", line=1)
    header = [h.strip() for h in rows[0]]
    has_w = bool(header) and header[-1] == "w"
    coords = header[:-1] if has_w else header
    n = len(coords)
    if n == 0 or coords != [f"x{i + 1}" for i in range(n)]:
        bad = next((i for i, h in enumerate(coords) if h != f"x{i + 1}"), 0)
        raise CsvFormatError(f"header must be x1,...,xn[,w]; got {','.join(header)!r}", line=1, column=bad + 1)
    width = n + (1 if has_w else 0)
    pts, ws = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise CsvFormatError(f"expected {width} fields, got {len(row)}", line=lineno)
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                x = float(cell)
            except ValueError:
                raise CsvFormatError(f"not a number: {cell!r}", line=lineno, column=col) from None
            if not math.isfinite(x):
                raise CsvFormatError(f"non-finite value {cell!r}", line=lineno, column=col)
            vals.append(x)
        if has_w and vals[-1] <= 0:
            raise CsvFormatError("weights must be positive", line=lineno, column=width)
        pts.append(vals[:n])
        if has_w:
            ws.append(vals[-1])
    if not pts:
        raise CsvFormatError("cloud has no points", line=len(rows))
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    weights = np.array(ws) if has_w else np.full(len(pts), reference_mass / len(pts))
    return PointCloud(np.array(pts), weights, m)


def write_cloud_csv(cloud: PointCloud, path: str | Path, with_weights: bool = True) -> None:
    n = cloud.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n)] + (["w"] if with_weights else []))
        for x, wt in zip(cloud.points, cloud.weights):
            w.writerow([repr(float(c)) for c in x] + ([repr(float(wt))] if with_weights else []))

