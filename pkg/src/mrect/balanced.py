"""Fat simplices and the balanced/concentrated dichotomy for balls of a point cloud."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EXHAUSTIVE_CAP, decode_indices
from .errors import NoValidBranch
from .geom import Plane, wedge_norm_batch
from .measure import PointCloud, require_ball

GAMMA_LADDER = tuple(2.0**-i for i in range(1, 13))


def x_delta_member(a, r: float, delta: float, tuple_points) -> bool:
    """True iff |(b_1 - a) ^ ... ^ (b_m - a)| >= delta r^m."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(tuple_points, dtype=float).reshape(-1, a.shape[0])
    return bool(wedge_norm_batch(b - a) >= delta * r ** b.shape[0])


def corollary_t(gamma: float, m: int) -> float:
    """Perturbation radius factor t = (1 + gamma^m / 2)^(1/m) - 1."""
    return (1.0 + 0.5 * gamma**m) ** (1.0 / m) - 1.0


@dataclass
class FatSimplexStat:
    delta: float
    fraction: float
    mode: str
    stderr: float = 0.0
    tuples_evaluated: int = 0

    def to_dict(self) -> dict:
        return {"delta": self.delta, "fraction": self.fraction, "mode": self.mode,
                "stderr": self.stderr, "tuples_evaluated": self.tuples_evaluated}


@dataclass
class _FatSample:
    """Gram volumes and weight products of m-tuples from a ball, normalized by mass^m."""

    grams: np.ndarray
    weights: np.ndarray
    mode: str
    scale: float  # multiplies the weight sum to give the fraction

    def fraction(self, threshold: float) -> tuple[float, float]:
        hit = self.weights * (self.grams >= threshold)
        if self.mode == "exhaustive":
            return float(min(1.0, hit.sum() * self.scale)), 0.0
        k = len(hit)
        est = float(hit.mean() * self.scale)
        se = float(hit.std(ddof=1) * self.scale / math.sqrt(k)) if k > 1 else float("inf")
        return min(1.0, max(0.0, est)), se


def _fat_sample(cloud: PointCloud, a, r: float, budget: int, seed: int, cap: int) -> _FatSample:
    idx = require_ball(cloud, a, r)
    a = np.asarray(a, dtype=float)
    pts, w = cloud.points[idx], cloud.weights[idx]
    m, nb = cloud.m, len(idx)
    mass = float(w.sum())
    total = nb**m
    if total <= cap:
        rows = decode_indices(np.arange(total), nb, m)
        mode, scale = "exhaustive", 1.0 / mass**m
    else:
        rows = np.random.default_rng(seed).integers(0, nb, size=(budget, m))
        mode, scale = "monte_carlo", float(total) / mass**m
    grams = np.concatenate([wedge_norm_batch(pts[rows[s:s + 65536]] - a)
                            for s in range(0, len(rows), 65536)])
    return _FatSample(grams, np.prod(w[rows], axis=1), mode, scale)


def fat_fraction(cloud: PointCloud, a, r: float, delta: float, budget: int = 100_000,
                 seed: int = 0, cap: int = EXHAUSTIVE_CAP) -> FatSimplexStat:
    """Weighted share of m-tuples from B(a, r) lying in X_delta(a, r)."""
    if r <= 0:
        raise ValueError("r must be positive")
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    s = _fat_sample(cloud, a, r, budget, seed, cap)
    frac, se = s.fraction(delta * r**cloud.m)
    return FatSimplexStat(delta, frac, s.mode, se, len(s.grams))


def fat_simplex_search(cloud: PointCloud, a, r: float, sigma: float, budget: int = 100_000,
                       seed: int = 0, resolution: float = 1e-3, cap: int = EXHAUSTIVE_CAP) -> float:
    """Largest delta (to ``resolution``) with fat_fraction(delta) >= sigma; 0 if none."""
    if not 0 < sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    s = _fat_sample(cloud, a, r, budget, seed, cap)
    rm = r**cloud.m

    def ok(d: float) -> bool:
        return s.fraction(d * rm)[0] >= sigma

    if ok(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class Balanced:
    points: np.ndarray  # x_{k+1}, ..., x_m
    planes: list[Plane]  # L_{k+1}, ..., L_m (linear)
    masses: np.ndarray  # mass of B(x_j, tr) within B(a, r)
    gamma: float
    t: float
    kind: str = field(default="balanced", init=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "points": self.points.tolist(), "masses": self.masses.tolist(),
                "gamma": self.gamma, "t": self.t}


@dataclass
class Concentrated:
    lam: int
    plane: Plane  # L_lambda (linear); centers lie in b + L_lambda
    centers: np.ndarray
    masses: np.ndarray  # mass of B(y_i, 4 gamma r)
    gamma: float
    t: float
    kind: str = field(default="concentrated", init=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam, "centers": self.centers.tolist(),
                "masses": self.masses.tolist(), "gamma": self.gamma, "t": self.t,
                "plane": self.plane.to_dict()}


Dichotomy = Balanced | Concentrated


def _dist_to_linear(v: np.ndarray, basis: np.ndarray) -> np.ndarray:
    if basis.shape[0] == 0:
        return np.linalg.norm(v, axis=-1)
    return np.linalg.norm(v - (v @ basis.T) @ basis, axis=-1)


def _extend(basis: np.ndarray, v: np.ndarray) -> np.ndarray:
    w = v - (v @ basis.T) @ basis if basis.shape[0] else v.copy()
    w = w - (w @ basis.T) @ basis if basis.shape[0] else w
    return np.vstack([basis, w / np.linalg.norm(w)])


def _masses_within(pts: np.ndarray, w: np.ndarray, centers: np.ndarray, radius: float) -> np.ndarray:
    out = np.empty(len(centers))
    step = max(1, 2_000_000 // max(len(pts), 1))
    for s in range(0, len(centers), step):
        d = np.linalg.norm(centers[s:s + step, None, :] - pts[None, :, :], axis=-1)
        out[s:s + step] = (d <= radius) @ w
    return out


def balanced_invariants(d: Dichotomy, a, b, r: float, mass: float, m: int, n: int, k: int) -> dict:
    """Check a dichotomy outcome against its branch invariants; returns {name: bool}."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    g = d.gamma
    if isinstance(d, Balanced):
        gamma1 = 2.0 ** (n + 1)
        seps = [True]
        for j, x in enumerate(d.points):
            prev = d.planes[j - 1].basis if j > 0 else _base_basis(d, k, n)
            seps.append(bool(_dist_to_linear(x - b, prev) > g * r))
        return {
            "count": len(d.points) == m - k,
            "separation": all(seps),
            "in_ball": bool(np.all(np.linalg.norm(d.points - a, axis=1) <= r * (1 + 1e-12))),
            "mass": bool(np.all(d.masses >= d.t**n * mass / gamma1)),
        }
    gamma2 = 4.0 * 20.0**m
    c = d.centers
    N = len(c)
    disjoint = True
    if N > 1:
        dd = np.linalg.norm(c[:, None] - c[None], axis=-1)
        disjoint = bool(np.all(dd[~np.eye(N, dtype=bool)] > 80 * g * r))
    on_plane = bool(N == 0 or np.all(_dist_to_linear(c - b, d.plane.basis) <= 1e-9 * max(r, 1.0)))
    density = d.masses / (4 * g * r) ** m >= g ** -(m - d.lam) * mass / (gamma2 * r**m)
    return {
        "lambda_range": k <= d.lam < m,
        "count": N >= 1 and N <= gamma2 * g ** -d.lam,
        "disjoint": disjoint,
        "in_ball": bool(np.all(np.linalg.norm(c - a, axis=1) <= r * (1 + 1e-12))),
        "on_plane": on_plane,
        "total_mass": bool(d.masses.sum() >= mass / gamma2),
        "density": bool(np.all(density)),
    }


def _base_basis(d, k: int, n: int) -> np.ndarray:
    return d.planes[0].basis[:k] if d.planes else np.zeros((0, n))


def balanced_dichotomy(cloud: PointCloud, a, b, r: float, t: float, gamma: float,
                       k: int = 0, L_k: Plane | None = None) -> Dichotomy:
    """Greedy construction of either balanced points x_{k+1..m} or concentration centers.

    Each x_j is the ball point of largest mass(B(x, tr) within B(a, r)) among
    points with dist(x - b, L_{j-1}) > gamma r (lowest index on ties).  If that
    largest mass drops to eps * mass(B(a, r)), eps = 2^-(n+1) t^n, the cloud is
    concentrated near b + L_lambda and centers are extracted from a net of the
    strip.  The returned branch has had its invariants checked.
    """
    m, n = cloud.m, cloud.n
    if not (0 < t < 1 and 0 < gamma < 1):
        raise ValueError("t and gamma must lie in (0, 1)")
    if not 0 <= k < m:
        raise ValueError(f"k must lie in 0..{m - 1}")
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    idx = require_ball(cloud, a, r)
    pts, w = cloud.points[idx], cloud.weights[idx]
    mass = float(w.sum())
    basis = np.zeros((0, n)) if L_k is None else np.asarray(L_k.basis, dtype=float)
    if basis.shape[0] != k:
        raise ValueError(f"L_k must have dimension {k}")
    eps = 2.0 ** -(n + 1) * t**n
    local = _masses_within(pts, w, pts, t * r)

    chosen, planes, chosen_mass = [], [], []
    lam = None
    for _ in range(k, m):
        cand = _dist_to_linear(pts - b, basis) > gamma * r
        s = float(local[cand].max()) if np.any(cand) else 0.0
        if s <= eps * mass:
            lam = basis.shape[0]
            break
        j = int(np.flatnonzero(cand & (local == s))[0])
        chosen.append(pts[j])
        chosen_mass.append(s)
        basis = _extend(basis, pts[j] - b)
        planes.append(Plane(basis.copy()))

    failures: dict = {}
    if lam is None:
        out = Balanced(np.array(chosen), planes, np.array(chosen_mass), gamma, t)
        checks = balanced_invariants(out, a, b, r, mass, m, n, k)
        if all(checks.values()):
            return out
        failures["balanced"] = checks
        raise NoValidBranch("balanced branch failed its invariants", failures=failures)

    out = _concentrate(pts, w, b, r, gamma, t, lam, basis, mass, a)
    checks = balanced_invariants(out, a, b, r, mass, m, n, k)
    if all(checks.values()):
        return out
    failures["concentrated"] = checks
    raise NoValidBranch("concentrated branch failed its invariants", failures=failures)


def _concentrate(pts, w, b, r, gamma, t, lam, basis, mass, a) -> Concentrated:
    n = pts.shape[1]
    m_strip = _dist_to_linear(pts - b, basis) <= gamma * r
    proj = b + ((pts[m_strip] - b) @ basis.T) @ basis if lam else np.broadcast_to(b, (int(m_strip.sum()), n))
    # greedy net: net points pairwise > gamma r apart, every projection within gamma r of one
    net: list[np.ndarray] = []
    covered = np.zeros(len(proj), dtype=bool)
    for i in range(len(proj)):
        if covered[i]:
            continue
        net.append(proj[i])
        covered |= np.linalg.norm(proj - proj[i], axis=1) <= gamma * r
    net_arr = np.array(net).reshape(-1, n)
    net_arr = net_arr[np.linalg.norm(net_arr - a, axis=1) <= r]
    # the stated bound (4 gamma)^-lam undercounts a gamma r/2-packing of an r-ball; the
    # actual net size keeps the discard-mass step valid
    K = max((4 * gamma) ** -lam, float(len(net_arr)), 1.0)
    big = _masses_within(pts, w, net_arr, 4 * gamma * r)
    keep = big >= mass / (4 * K)
    J, Jm = net_arr[keep], big[keep]
    order = np.lexsort((np.arange(len(J)), -Jm))
    centers, cmass = [], []
    for i in order:
        if all(np.linalg.norm(J[i] - y) > 80 * gamma * r for y in centers):
            centers.append(J[i])
            cmass.append(Jm[i])
    return Concentrated(lam, Plane(basis.copy()), np.array(centers).reshape(-1, n),
                        np.array(cmass), gamma, t)


def certify_dichotomy(cloud: PointCloud, a, r: float, gammas=GAMMA_LADDER, t: float | None = None,
                      b=None) -> Dichotomy:
    """Run the dichotomy for decreasing gamma until a branch certifies.

    With ``t=None`` the perturbation radius t = (1 + gamma^m / 2)^(1/m) - 1 is used.
    """
    b = a if b is None else b
    failures = {}
    for g in gammas:
        tt = corollary_t(g, cloud.m) if t is None else t
        try:
            return balanced_dichotomy(cloud, a, b, r, tt, g)
        except NoValidBranch as exc:
            failures[g] = exc.failures
    raise NoValidBranch("no gamma on the ladder certified a branch", failures=failures)
