"""Synthetic point clouds with known geometry: planes, spheres, segments, C^{1,beta} graphs, a Cantor set."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .geom import Plane, coordinate_plane, plane_from_vectors
from .measure import PointCloud, write_cloud_csv


@dataclass
class Fixture:
    """A generated cloud together with its analytic tangent planes and metadata."""

    cloud: PointCloud
    tangent: Callable[[np.ndarray], Plane] | None
    meta: dict
    graph: "C1BetaGraph | None" = None

    def tangent_at(self, i: int) -> Plane:
        if self.tangent is None:
            raise ValueError(f"{self.meta.get('generator')} fixture has no tangent planes")
        return self.tangent(self.cloud.points[i])


def _check_count(count: int) -> None:
    if count < 1:
        raise ValueError("sample count must be >= 1")


def _cube_samples(count: int, m: int, seed: int, sampling: str, half: float = 1.0) -> np.ndarray:
    if sampling == "grid":
        side = int(round(count ** (1.0 / m)))
        if side**m != count:
            raise ValueError(f"grid sampling needs a perfect {m}-th power count, got {count}")
        g = (np.arange(side) + 0.5) / side * 2 * half - half
        return np.stack(np.meshgrid(*([g] * m), indexing="ij"), axis=-1).reshape(-1, m)
    if sampling == "random":
        return np.random.default_rng(seed).uniform(-half, half, size=(count, m))
    raise ValueError(f"unknown sampling {sampling!r}")


def gen_plane(count: int, m: int = 2, n: int = 3, seed: int = 0, sampling: str = "random") -> Fixture:
    """Uniform samples of [-1, 1]^m x {0}, each carrying area / count."""
    _check_count(count)
    x = _cube_samples(count, m, seed, sampling)
    pts = np.hstack([x, np.zeros((count, n - m))])
    T = coordinate_plane(m, n)
    cloud = PointCloud(pts, np.full(count, 2.0**m / count), m)
    return Fixture(cloud, lambda _p: T, {"generator": "plane", "m": m, "n": n, "count": count,
                                           "seed": seed, "sampling": sampling})


def gen_segment(count: int, n: int = 2, seed: int = 0, sampling: str = "random") -> Fixture:
    """Samples of [-1, 1] e_1 in R^n (m = 1)."""
    _check_count(count)
    x = _cube_samples(count, 1, seed, sampling)
    pts = np.hstack([x, np.zeros((count, n - 1))])
    T = coordinate_plane(1, n)
    cloud = PointCloud(pts, np.full(count, 2.0 / count), 1)
    return Fixture(cloud, lambda _p: T, {"generator": "segment", "m": 1, "n": n, "count": count,
                                           "seed": seed, "sampling": sampling})


def sphere_area(m: int) -> float:
    """H^m of the unit sphere S^m."""
    return 2 * math.pi ** ((m + 1) / 2) / math.gamma((m + 1) / 2)


def gen_sphere(count: int, m: int = 1, n: int | None = None, seed: int = 0,
               sampling: str = "random") -> Fixture:
    """Samples of the unit m-sphere in R^(m+1) (padded with zeros up to R^n)."""
    _check_count(count)
    n = m + 1 if n is None else n
    if n < m + 1:
        raise ValueError("the m-sphere needs n >= m + 1")
    if sampling == "grid":
        if m != 1:
            raise ValueError("grid sampling of spheres is only available for m = 1")
        th = 2 * math.pi * np.arange(count) / count
        core = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        g = np.random.default_rng(seed).normal(size=(count, m + 1))
        core = g / np.linalg.norm(g, axis=1, keepdims=True)
    pts = np.hstack([core, np.zeros((count, n - m - 1))])

    def tangent(p: np.ndarray) -> Plane:
        u = p[: m + 1] / np.linalg.norm(p[: m + 1])
        rows = np.linalg.svd(u[None, :])[2][1:]  # complement of the normal inside R^(m+1)
        return Plane(np.hstack([rows, np.zeros((m, n - m - 1))]))

    cloud = PointCloud(pts, np.full(count, sphere_area(m) / count), m)
    return Fixture(cloud, tangent, {"generator": "sphere", "m": m, "n": n, "count": count,
                                     "seed": seed, "sampling": sampling})


@dataclass
class GraphSpec:
    """Lacunary C^{1,beta} graph f: [-1, 1]^m -> R^(n-m).

    f_k(x) = amplitude sum_{j<=depth} 4^(-j(1+beta)) sum_d sin(2 pi (4^j x_d + theta_kdj)) / (2 pi)
    with phases theta drawn from ``seed``.
    """

    m: int = 1
    n: int = 2
    hoelder_beta: float = 0.5
    series_depth: int = 8
    amplitude: float = 0.25
    seed: int = 0
    count: int = 2000
    sampling: str = "random"

    def validate(self) -> None:
        if not 0 < self.hoelder_beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if not 1 <= self.m < self.n:
            raise ValueError("need 1 <= m < n")
        if self.series_depth < 0:
            raise ValueError("series_depth must be >= 0")
        _check_count(self.count)


@dataclass
class C1BetaGraph:
    spec: GraphSpec
    phases: np.ndarray = field(repr=False)  # (n-m, m, depth+1)

    @classmethod
    def from_spec(cls, spec: GraphSpec) -> "C1BetaGraph":
        spec.validate()
        rng = np.random.default_rng(spec.seed)
        ph = rng.uniform(0.0, 1.0, size=(spec.n - spec.m, spec.m, spec.series_depth + 1))
        return cls(spec, ph)

    @property
    def freqs(self) -> np.ndarray:
        return 4.0 ** np.arange(self.spec.series_depth + 1)

    def _args(self, x: np.ndarray) -> np.ndarray:
        # (..., n-m, m, depth+1)
        return 2 * math.pi * (x[..., None, :, None] * self.freqs + self.phases)

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = self.spec.hoelder_beta
        c = self.spec.amplitude * self.freqs ** -(1 + b) / (2 * math.pi)
        return np.sum(np.sin(self._args(x)) * c, axis=(-1, -2))

    def Df(self, x) -> np.ndarray:
        """Jacobian of shape (..., n-m, m)."""
        x = np.asarray(x, dtype=float)
        c = self.spec.amplitude * self.freqs ** -self.spec.hoelder_beta
        return np.sum(np.cos(self._args(x)) * c, axis=-1)

    def F(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.concatenate([x, self.f(x)], axis=-1)

    def tangent(self, x) -> Plane:
        D = self.Df(np.asarray(x, dtype=float))
        return plane_from_vectors(np.hstack([np.eye(self.spec.m), D.T]))

    def area_element(self, x) -> np.ndarray:
        D = self.Df(x)
        G = np.eye(self.spec.m) + np.swapaxes(D, -1, -2) @ D
        return np.sqrt(np.linalg.det(G))

    def _g(self, h: np.ndarray) -> np.ndarray:
        """Upper bound for |Df_kd(x) - Df_kd(y)| when |x_d - y_d| <= h."""
        c = self.spec.amplitude * self.freqs ** -self.spec.hoelder_beta
        return np.sum(c * np.minimum(2.0, 2 * math.pi * np.multiply.outer(h, self.freqs)), axis=-1)

    def hoelder_bound(self) -> float:
        """Rigorous M with ||Df(x) - Df(y)|| <= M |x - y|^beta on [-1, 1]^m."""
        b = self.spec.hoelder_beta
        s = self.spec
        h = np.geomspace(1e-9, 2 * math.sqrt(s.m), 4000)
        g = self._g(h)
        # g is nondecreasing, so on [h_k, h_{k+1}] the ratio is at most g(h_{k+1}) / h_k^beta;
        # below h_0 every term is linear and g(h)/h^beta grows with h
        ratio = np.max(g[1:] / h[:-1] ** b)
        return float(math.sqrt(s.m * (s.n - s.m)) * ratio)

    def realized_seminorm(self, grid: int = 4097) -> float:
        """sup ||Df(x) - Df(y)|| / |x - y|^beta over a grid along the first axis direction."""
        b = self.spec.hoelder_beta
        t = np.linspace(-1.0, 1.0, grid)
        x = np.zeros((grid, self.spec.m))
        x[:, 0] = t
        D = self.Df(x).reshape(grid, -1)
        best = 0.0
        for s in range(0, grid, 512):
            diff = np.linalg.norm(D[s:s + 512, None, :] - D[None, :, :], axis=-1)
            dist = np.abs(t[s:s + 512, None] - t[None, :])
            ok = dist > 0
            best = max(best, float(np.max(diff[ok] / dist[ok] ** b)))
        return best

    def meta(self) -> dict:
        return {"generator": "c1beta", **asdict(self.spec), "beta": self.spec.hoelder_beta,
                "depth": self.spec.series_depth, "M": self.hoelder_bound()}


def gen_c1beta_graph(spec: GraphSpec) -> Fixture:
    """Graph samples F(x) = (x, f(x)) with weights area / count times the area element."""
    graph = C1BetaGraph.from_spec(spec)
    x = _cube_samples(spec.count, spec.m, spec.seed, spec.sampling)
    pts = graph.F(x)
    w = (2.0**spec.m / spec.count) * graph.area_element(x)
    cloud = PointCloud(pts, w, spec.m)
    return Fixture(cloud, lambda p: graph.tangent(p[: spec.m]), graph.meta(), graph)


def gen_cantor4(level: int) -> Fixture:
    """Centers of the 4^level squares of the four-corner Cantor construction in [0, 1]^2."""
    if level < 1:
        raise ValueError("level must be >= 1")
    centers = np.array([[0.5, 0.5]])
    side = 1.0
    for _ in range(level):
        side /= 4
        off = 1.5 * side  # center of a corner subsquare relative to the parent center
        shifts = np.array([[-off, -off], [off, -off], [-off, off], [off, off]])
        centers = (centers[:, None, :] + shifts[None]).reshape(-1, 2)
    N = len(centers)
    cloud = PointCloud(centers, np.full(N, 1.0 / N), 1)
    return Fixture(cloud, None, {"generator": "cantor4", "level": level, "m": 1, "n": 2, "count": N})


def write_fixture(fixture: Fixture, csv_path: str | Path) -> Path:
    """Write the cloud CSV and a JSON sidecar ``<csv>.json`` with the metadata."""
    csv_path = Path(csv_path)
    write_cloud_csv(fixture.cloud, csv_path)
    side = csv_path.with_suffix(csv_path.suffix + ".json")
    side.write_text(json.dumps(fixture.meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return side
