"""Analysis pipeline, refinement sweeps and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .balanced import fat_simplex_search
from .energy import beta_number, j_energy, k_energy, menger_energy
from .errors import EmptyBall, NoFatTuple
from .generators import GraphSpec, gen_c1beta_graph
from .measure import PointCloud, density_profile, stratify
from .tangent import TangentParams, default_M, dyadic_plane_sequence

SCHEMA = 1


@dataclass
class AnalysisConfig:
    m: int
    l: int = 2
    p: float = 2.0
    alpha: float = 0.5
    kind: str = "kappa"
    r0: float | None = None
    depth: int = 6
    budget: int = 100_000
    seed: int = 0
    points: int = 10
    sigma: float = 0.5
    j_max: int = 8
    k_max: int = 8


def _clean(x):
    """Replace non-finite floats (not valid JSON) by None, recursively."""
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        return _clean(x.item())
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def default_r0(cloud: PointCloud) -> float:
    span = np.ptp(cloud.points, axis=0)
    return 0.25 * float(np.max(span)) if np.max(span) > 0 else 1.0


def effective_depth(cloud: PointCloud, r0: float, depth: int, spacing_factor: float = 3.0) -> int:
    """Number of dyadic radii from r0 that stay above a few nearest-neighbour spacings (at least 2)."""
    floor = spacing_factor * float(np.median(cloud.nearest_neighbor_distances()))
    radii = r0 * 2.0 ** -np.arange(depth)
    return max(2, int(np.sum(radii >= floor)))


def select_points(n_points: int, count: int, seed: int) -> np.ndarray:
    k = min(count, n_points)
    return np.sort(np.random.default_rng(seed).choice(n_points, size=k, replace=False))


def analyze_point(cloud: PointCloud, i: int, cfg: AnalysisConfig, r0: float, depth: int) -> dict:
    a = cloud.points[i]
    m = cloud.m
    rec: dict = {"id": int(i), "point": a.tolist(), "flags": []}
    stratum = stratify(cloud, cfg.j_max, cfg.k_max, r0, cfg.depth, indices=[i])[0]
    rec["stratum"] = stratum.to_dict()
    rec["density_profile"] = density_profile(cloud, a, r0, cfg.depth).to_dict()
    A = float(stratum.j) if stratum.bounded else 2.0
    radii = r0 * 2.0 ** -np.arange(depth)
    delta = min(fat_simplex_search(cloud, a, r, cfg.sigma, cfg.budget, cfg.seed) for r in radii)
    rec["fat_delta"] = delta
    M = default_M(m, A, cfg.sigma)
    rec["M"] = M
    ok = True
    if delta > 0:
        params = TangentParams(kind=cfg.kind, l=cfg.l, p=cfg.p, alpha=cfg.alpha, delta=delta,
                               M=M, budget=cfg.budget, seed=cfg.seed)
        try:
            est = dyadic_plane_sequence(cloud, a, r0, depth, params)
            d = est.to_dict()
            rec["tangent"] = {k: d[k] for k in ("limit_plane", "alpha_fit", "r_squared", "fit_flag",
                                                 "fit_pairs", "drift", "radii", "certificates_ok",
                                                 "plane_certificates", "chebyshev", "lower_bound_ok")}
            rec["energy_per_scale"] = d["energy"]
            ok &= est.certificates_ok()
            if not est.certificates_ok():
                rec["flags"].append("certificate_failed")
        except NoFatTuple as exc:
            rec["tangent"] = None
            rec["flags"].append(f"no_fat_tuple: {exc}")
            ok = False
    else:
        rec["tangent"] = None
        rec["flags"].append("no_fat_delta")
        ok = False
    rec["energy"] = k_energy(cloud, cfg.kind, a, r0, cfg.l, cfg.p, cfg.alpha,
                             budget=cfg.budget, seed=cfg.seed).to_dict()
    rec["beta"] = beta_number(cloud, a, r0, cfg.p).to_dict()
    rec["j_energy"] = {"value": j_energy(cloud, (a, r0), cfg.p, 2.0, cfg.depth),
                       "mode": "exhaustive", "stderr": 0.0}
    rec["ok"] = bool(ok)
    return rec


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def analyze(cloud: PointCloud, cfg: AnalysisConfig, input_path: str | None = None) -> dict:
    r0 = cfg.r0 if cfg.r0 is not None else default_r0(cloud)
    idx = select_points(len(cloud), cfg.points, cfg.seed)
    depth = effective_depth(cloud, r0, cfg.depth)
    records = [analyze_point(cloud, int(i), cfg, r0, depth) for i in idx]
    deltas = np.array([r["fat_delta"] for r in records])
    menger = menger_energy(cloud, budget=cfg.budget, seed=cfg.seed)
    report = {
        "schema": SCHEMA,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "input": {"path": input_path, "sha256": file_digest(input_path) if input_path else None,
                  "count": len(cloud), "n": cloud.n, "m": cloud.m},
        "config": {**asdict(cfg), "r0": r0, "effective_depth": depth},
        "versions": {"mrect": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "points": records,
        "global": {
            "menger_energy": menger.to_dict(),
            "j_energy": {"value": j_energy(cloud, None, cfg.p, 2.0, cfg.depth),
                         "mode": "exhaustive", "stderr": 0.0},
            "fat_delta": {"values": deltas.tolist(), "min": float(deltas.min()),
                          "median": float(np.median(deltas)), "max": float(deltas.max())},
        },
    }
    report["certificates_ok"] = all(r["ok"] for r in records)
    return report


def write_scales_csv(report: dict, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["point_id", "radius", "drift", "energy", "energy_mode", "density_ratio"])
        for rec in report["points"]:
            t = rec.get("tangent")
            dens = rec["density_profile"]
            if t is None:
                continue
            for k, r in enumerate(t["radii"]):
                e = rec["energy_per_scale"][k]
                w.writerow([rec["id"], repr(r), repr(t["drift"][k]), repr(e["value"]), e["mode"],
                            repr(dens["ratios"][k]) if k < len(dens["ratios"]) else ""])


@dataclass
class SweepTrend:
    beta: float
    alpha: float
    kind: str
    counts: list[int]
    base_x: list[float]
    values: np.ndarray  # (len(counts), len(base_x))
    modes: list[list[str]] = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        return self.values / self.values[0]

    def spread(self) -> np.ndarray:
        """max / min of each base point's estimates across refinements."""
        return self.values.max(axis=0) / self.values.min(axis=0)

    def increasing(self) -> np.ndarray:
        return np.all(np.diff(self.values, axis=0) > 0, axis=0)

    def growth(self) -> np.ndarray:
        return self.values[-1] / self.values[0]

    def classify(self, bounded_factor: float = 2.0, growth_factor: float = 4.0) -> str:
        if np.all(self.spread() <= bounded_factor):
            return "bounded"
        if np.all(self.increasing()) and np.all(self.growth() >= growth_factor):
            return "growing"
        return "mixed"

    def to_dict(self) -> dict:
        return {"beta": self.beta, "alpha": self.alpha, "kind": self.kind, "counts": self.counts,
                "base_x": self.base_x, "values": self.values.tolist(),
                "spread": self.spread().tolist(), "growth": self.growth().tolist(),
                "increasing": self.increasing().tolist(), "trend": self.classify()}


def run_sweep(betas, alphas, kinds, counts, l: int = 3, p: float = 2.0, r: float = 0.25,
              base_x=None, seed: int = 0, m: int = 1, n: int = 2, budget: int = 100_000,
              sampling: str = "grid") -> list[SweepTrend]:
    """k_energy at fixed graph points F(x_b) on clouds of increasing sample count."""
    if not betas or not alphas or not kinds or not counts:
        raise ValueError("sweep grids must be nonempty")
    if base_x is None:
        base_x = np.linspace(-0.4, 0.4, 5).tolist()
    out = []
    for beta in betas:
        fixtures = [gen_c1beta_graph(GraphSpec(m=m, n=n, hoelder_beta=beta, count=N, seed=seed,
                                               sampling=sampling)) for N in counts]
        for kind in kinds:
            for alpha in alphas:
                vals, modes = [], []
                for fx in fixtures:
                    row, mrow = [], []
                    for x in base_x:
                        a = fx.graph.F(np.full(m, x))
                        try:
                            e = k_energy(fx.cloud, kind, a, r, l, p, alpha, budget=budget, seed=seed)
                            row.append(e.value)
                            mrow.append(e.mode)
                        except EmptyBall:
                            row.append(float("nan"))
                            mrow.append("empty")
                    vals.append(row)
                    modes.append(mrow)
                out.append(SweepTrend(beta, alpha, str(kind), list(counts), list(base_x),
                                      np.array(vals), modes))
    return out


def write_sweep_csv(trends: list[SweepTrend], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "alpha", "kind", "base_x", "count", "value", "mode", "ratio_to_first"])
        for t in trends:
            for i, N in enumerate(t.counts):
                for j, x in enumerate(t.base_x):
                    w.writerow([t.beta, t.alpha, t.kind, repr(x), N, repr(float(t.values[i, j])),
                                t.modes[i][j], repr(float(t.ratios[i, j]))])
