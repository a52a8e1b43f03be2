"""Multi-point curvature energies, beta numbers and the J functional on point clouds.

The essential supremum over tail variables becomes a maximum over the cloud
atoms in the ball: for a discrete measure whose atoms all carry positive
weight this is the exact essential supremum, not an approximation.  Tuples
may repeat points (the product measure does not exclude diagonals); such
tuples are degenerate and contribute 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .curvatures import CurvatureKind, k_integrand_batch
from .errors import EmptyBall
from .geom import Plane
from .measure import PointCloud, require_ball
from .parallel import map_chunks, pairwise_sum

EXHAUSTIVE_CAP = 2_000_000
CHUNK_TUPLES = 1 << 15
DEFAULT_BUDGET = 100_000


@dataclass
class EnergyEstimate:
    value: float
    stderr: float
    tuples_evaluated: int
    mode: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "tuples_evaluated": self.tuples_evaluated,
            "mode": self.mode,
            "params": self.params,
        }


def decode_indices(flat: np.ndarray, base: int, digits: int) -> np.ndarray:
    """Mixed-radix digits of ``flat`` (most significant first), shape (len, digits)."""
    out = np.empty((len(flat), digits), dtype=np.int64)
    x = np.array(flat, dtype=np.int64)
    for d in range(digits - 1, -1, -1):
        out[:, d] = x % base
        x //= base
    return out


@dataclass
class _Ball:
    idx: np.ndarray
    pts: np.ndarray
    w: np.ndarray
    a: np.ndarray
    m: int

    @property
    def size(self) -> int:
        return len(self.idx)


def _ball(cloud: PointCloud, a, r: float) -> _Ball:
    idx = require_ball(cloud, a, r)
    return _Ball(idx, cloud.points[idx], cloud.weights[idx], np.asarray(a, dtype=float), cloud.m)


def _assemble(ball: _Ball, lead: np.ndarray, tail: np.ndarray | None) -> np.ndarray:
    """Tuples (a, lead..., tail...) for every (lead row, tail row) pair, lead-major."""
    B = lead.shape[0]
    n = ball.pts.shape[1]
    head = np.broadcast_to(ball.a, (B, 1, n))
    lead_pts = ball.pts[lead]
    if tail is None or tail.shape[1] == 0:
        return np.concatenate([head, lead_pts], axis=1)
    T = tail.shape[0]
    tail_pts = ball.pts[tail]
    P = np.concatenate([
        np.broadcast_to(head[:, None], (B, T, 1, n)),
        np.broadcast_to(lead_pts[:, None], (B, T) + lead_pts.shape[1:]),
        np.broadcast_to(tail_pts[None], (B,) + tail_pts.shape),
    ], axis=2)
    return P.reshape(B * T, P.shape[2], n)


def mc_tail_count(budget: int) -> int:
    """Tail rows used per leading tuple in Monte Carlo mode."""
    return max(1, math.isqrt(budget))


def _tail_rows(ball: _Ball, t: int, cap: int, budget: int, rng: np.random.Generator | None):
    """All tail index tuples when affordable, else a uniform sample of ``budget`` of them."""
    if t == 0:
        return None, True
    total = ball.size ** t
    if total <= cap:
        return decode_indices(np.arange(total), ball.size, t), True
    if rng is None:
        rng = np.random.default_rng(0)
    return rng.integers(0, ball.size, size=(max(1, budget), t)), False


def _kernels(ball: _Ball, kind, lead: np.ndarray, tails, l: int, p: float, alpha: float) -> np.ndarray:
    """Max of the integrand over the tail rows, for each leading row."""
    if tails is None:
        return k_integrand_batch(kind, _assemble(ball, lead, None), l, p, alpha)
    T = tails.shape[0]
    rows = max(1, CHUNK_TUPLES // T)
    out = np.empty(lead.shape[0])
    for s in range(0, lead.shape[0], rows):
        L = lead[s:s + rows]
        vals = k_integrand_batch(kind, _assemble(ball, L, tails), l, p, alpha)
        out[s:s + rows] = vals.reshape(len(L), T).max(axis=1)
    return out


def _check_params(m: int, l: int, p: float, alpha: float) -> None:
    if not 1 <= l <= m + 2:
        raise ValueError(f"l must lie in 1..{m + 2}, got {l}")
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")


def k_kernel(cloud: PointCloud, kind, a, r: float, l: int, p: float, alpha: float,
             leading=None, budget: int = DEFAULT_BUDGET, seed: int = 0,
             cap: int = EXHAUSTIVE_CAP) -> float:
    """Kernel value at a leading (l-1)-tuple of points: max of the integrand over tail tuples in B(a, r)."""
    m = cloud.m
    _check_params(m, l, p, alpha)
    ball = _ball(cloud, a, r)
    lead_pts = np.zeros((0, cloud.n)) if leading is None else np.asarray(leading, dtype=float).reshape(-1, cloud.n)
    if lead_pts.shape[0] != l - 1:
        raise ValueError(f"expected {l - 1} leading points, got {lead_pts.shape[0]}")
    # append the leading points as extra atoms so they can be indexed like ball points
    ext = _Ball(ball.idx, np.vstack([ball.pts, lead_pts]), ball.w, ball.a, m)
    lead = np.arange(ball.size, ball.size + l - 1)[None, :]
    t = m + 2 - l
    rng = np.random.default_rng(seed)
    tails, _ = _tail_rows(ball, t, cap, budget, rng)
    return float(_kernels(ext, kind, lead, tails, l, p, alpha)[0])


def _exhaustive_lead_sum(ball: _Ball, kind, l: int, p: float, alpha: float, tails) -> tuple[float, int]:
    nb = ball.size
    lead_total = nb ** (l - 1)
    per = 1 if tails is None else tails.shape[0]
    rows = max(1, CHUNK_TUPLES // per)
    starts = list(range(0, lead_total, rows))

    def chunk(s: int) -> float:
        lead = decode_indices(np.arange(s, min(s + rows, lead_total)), nb, l - 1)
        wprod = np.prod(ball.w[lead], axis=1)
        return pairwise_sum(wprod * _kernels(ball, kind, lead, tails, l, p, alpha))

    return pairwise_sum(map_chunks(chunk, starts)), lead_total * per


def k_energy(cloud: PointCloud, kind, a, r: float, l: int, p: float, alpha: float,
             budget: int = DEFAULT_BUDGET, seed: int = 0, cap: int = EXHAUSTIVE_CAP) -> EnergyEstimate:
    """(l-1)-fold weighted sum over leading tuples in B(a, r) of the kernel."""
    m = cloud.m
    _check_params(m, l, p, alpha)
    if r <= 0:
        raise ValueError("r must be positive")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    kind = CurvatureKind.parse(kind)
    params = {"l": l, "p": p, "alpha": alpha, "kind": kind.value,
              "a": np.asarray(a, dtype=float).tolist(), "r": r}
    ball = _ball(cloud, a, r)
    nb = ball.size
    t = m + 2 - l
    rng = np.random.default_rng(seed)

    if l == 1:
        tails, exact = _tail_rows(ball, t, cap, budget, rng)
        val = float(_kernels(ball, kind, np.zeros((1, 0), dtype=np.int64), tails, l, p, alpha)[0])
        return EnergyEstimate(val, 0.0, tails.shape[0], "exhaustive" if exact else "monte_carlo", params)

    lead_total = nb ** (l - 1)
    tail_total = nb ** t
    if lead_total * tail_total <= cap:
        tails, _ = _tail_rows(ball, t, cap, budget, rng)
        val, count = _exhaustive_lead_sum(ball, kind, l, p, alpha, tails)
        return EnergyEstimate(val, 0.0, count, "exhaustive", params)

    # budget bounds the kernel evaluations: sqrt(budget) shared tail rows times budget / tails leads
    tails, _ = _tail_rows(ball, t, mc_tail_count(budget), mc_tail_count(budget), rng)
    per = 1 if tails is None else tails.shape[0]
    n_lead = max(2, budget // per)
    lead = rng.integers(0, nb, size=(n_lead, l - 1))
    rows = max(1, CHUNK_TUPLES // per)
    starts = list(range(0, n_lead, rows))

    def chunk(s: int) -> np.ndarray:
        L = lead[s:s + rows]
        return np.prod(ball.w[L], axis=1) * _kernels(ball, kind, L, tails, l, p, alpha)

    g = np.concatenate(map_chunks(chunk, starts)) * float(lead_total)
    mean = pairwise_sum(g) / n_lead
    stderr = float(np.std(g, ddof=1) / math.sqrt(n_lead))
    return EnergyEstimate(mean, stderr, n_lead * per, "monte_carlo", params)


def menger_energy(cloud: PointCloud, ball: tuple | None = None, budget: int = DEFAULT_BUDGET,
                  seed: int = 0, cap: int = EXHAUSTIVE_CAP) -> EnergyEstimate:
    """Weighted (m+2)-fold sum of vol(T)^2 / diam(T)^((m+2)(m+1)) over tuples from ``ball`` (or all points)."""
    m = cloud.m
    if ball is None:
        idx = np.arange(len(cloud))
        params = {"ball": None}
    else:
        center, radius = ball
        idx = cloud.ball_indices(center, radius)
        params = {"ball": [np.asarray(center, dtype=float).tolist(), radius]}
    nb = len(idx)
    if nb == 0:
        return EnergyEstimate(0.0, 0.0, 0, "exhaustive", params)
    pts, w = cloud.points[idx], cloud.weights[idx]
    k = m + 2
    total = nb**k

    def integrand(rows: np.ndarray) -> np.ndarray:
        return np.prod(w[rows], axis=1) * k_integrand_batch(CurvatureKind.KAPPA, pts[rows], k, 2.0, 0.0)

    if total <= cap:
        starts = list(range(0, total, CHUNK_TUPLES))
        vals = map_chunks(lambda s: pairwise_sum(integrand(
            decode_indices(np.arange(s, min(s + CHUNK_TUPLES, total)), nb, k))), starts)
        return EnergyEstimate(pairwise_sum(vals), 0.0, total, "exhaustive", params)

    rng = np.random.default_rng(seed)
    rows = rng.integers(0, nb, size=(budget, k))
    starts = list(range(0, budget, CHUNK_TUPLES))
    g = np.concatenate(map_chunks(lambda s: integrand(rows[s:s + CHUNK_TUPLES]), starts)) * float(total)
    stderr = float(np.std(g, ddof=1) / math.sqrt(budget)) if budget > 1 else float("inf")
    return EnergyEstimate(pairwise_sum(g) / budget, stderr, budget, "monte_carlo", params)


@dataclass
class BetaNumber:
    value: float
    plane: Plane
    p: float
    x: np.ndarray
    r: float
    upper_bound: bool = False

    def to_dict(self) -> dict:
        return {"value": self.value, "p": self.p, "r": self.r, "upper_bound": self.upper_bound,
                "plane": self.plane.to_dict(), "mode": "exhaustive", "stderr": 0.0}


def weighted_pca_plane(pts: np.ndarray, w: np.ndarray, m: int) -> Plane:
    """Affine m-plane minimizing the weighted sum of squared distances."""
    c = (w @ pts) / w.sum()
    X = pts - c
    S = (X * w[:, None]).T @ X
    _, vecs = np.linalg.eigh(S)
    top = vecs[:, ::-1][:, :m].T
    q, _ = np.linalg.qr(top.T)
    return Plane(q.T.copy(), c)


def _distances(pts: np.ndarray, L: Plane) -> np.ndarray:
    X = pts - L.offset
    return np.linalg.norm(X - (X @ L.basis.T) @ L.basis, axis=1)


def _descend(pts: np.ndarray, w: np.ndarray, start: Plane, p: float) -> Plane:
    n, m = pts.shape[1], start.dim
    comp = np.linalg.svd(start.basis, full_matrices=True)[2][m:]  # normal directions

    def plane_of(theta: np.ndarray) -> Plane:
        shift = theta[: n - m]
        slope = theta[n - m:].reshape(n - m, m)
        frame = start.basis + slope.T @ comp
        q, _ = np.linalg.qr(frame.T)
        return Plane(q.T.copy(), start.offset + shift @ comp)

    def cost(theta: np.ndarray) -> float:
        return float(np.sum(w * _distances(pts, plane_of(theta)) ** p))

    theta0 = np.zeros((n - m) * (m + 1))
    f0 = cost(theta0)
    if f0 == 0:
        return start
    res = minimize(cost, theta0, method="Nelder-Mead",
                   options={"maxiter": 200, "fatol": 1e-8 * f0, "xatol": 1e-10})
    return plane_of(res.x) if res.fun < f0 else start


def beta_number(cloud: PointCloud, x, r: float, p: float = 2.0, q_mode: str = "auto") -> BetaNumber:
    """r^-1 (r^-m sum_{B(x,r)} w dist(y, L)^p)^(1/p) at the best plane L found.

    p = 2 is solved exactly by weighted PCA.  For other p the PCA plane is
    refined by Nelder-Mead descent (``q_mode="auto"``) and the result is an
    upper bound on the infimum; ``q_mode="pca"`` skips the descent.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    if q_mode not in ("auto", "pca"):
        raise ValueError("q_mode must be 'auto' or 'pca'")
    idx = cloud.ball_indices(x, r)
    if len(idx) == 0:
        raise EmptyBall(f"no cloud points in the closed ball of radius {r:g}")
    pts, w = cloud.points[idx], cloud.weights[idx]
    m = cloud.m
    L = weighted_pca_plane(pts, w, m)
    upper = False
    if p != 2.0:
        upper = True
        if q_mode == "auto" and len(idx) > m + 1:
            L = _descend(pts, w, L, p)
    inner = float(np.sum(w * _distances(pts, L) ** p))
    value = (inner / r**m) ** (1.0 / p) / r
    return BetaNumber(value, L, p, np.asarray(x, dtype=float), r, upper)


def cloud_diameter(cloud: PointCloud, idx: np.ndarray | None = None) -> float:
    pts = cloud.points if idx is None else cloud.points[idx]
    best = 0.0
    step = max(1, 1_000_000 // max(len(pts), 1))
    for s in range(0, len(pts), step):
        d2 = np.sum((pts[s:s + step, None, :] - pts[None, :, :]) ** 2, axis=-1)
        best = max(best, float(d2.max()))
    return math.sqrt(best)


def j_energy(cloud: PointCloud, ball: tuple | None = None, p: float = 2.0, q: float = 2.0,
             depth: int = 8) -> float:
    """int_B int_0^diam(B) beta_q(x, r)^p dr/r dmu(x), with dyadic radii weighted ln 2."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if ball is None:
        idx = np.arange(len(cloud))
        dB = cloud_diameter(cloud)
    else:
        center, radius = ball
        idx = cloud.ball_indices(center, radius)
        dB = 2.0 * float(radius)
    if len(idx) == 0 or dB == 0:
        return 0.0
    radii = dB * 2.0 ** -np.arange(depth)
    total = []
    for i in idx:
        x = cloud.points[i]
        s = pairwise_sum([beta_number(cloud, x, rj, q).value ** p for rj in radii])
        total.append(cloud.weights[i] * math.log(2.0) * s)
    return pairwise_sum(total)
