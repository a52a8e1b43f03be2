"""Approximating planes across dyadic scales, with Chebyshev bad-set filters.

At each radius a fat m-tuple (wedge volume >= delta r^m) whose curvature
kernel is not abnormally large is chosen, and its span is the plane at that
scale.  "Abnormally large" means exceeding M times the mean, so the discarded
tuples carry at most a 1/M share of the tuple mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvatures import CurvatureKind, k_integrand_batch, kappa_batch
from .energy import (CHUNK_TUPLES, EXHAUSTIVE_CAP, EnergyEstimate, _assemble, _Ball, _kernels,
                     _tail_rows, decode_indices, k_energy, mc_tail_count)
from .errors import NoFatTuple
from .geom import Plane, plane_distance, plane_from_vectors, wedge_norm_batch
from .measure import PointCloud, require_ball

DRIFT_FLOOR = 1e-13


def default_M(m: int, A: float, sigma: float) -> float:
    """Filter constant (2^(m + m^2) A^(2m) + 2) / sigma."""
    if A < 1 or not 0 < sigma <= 1:
        raise ValueError("need A >= 1 and sigma in (0, 1]")
    return (2.0 ** (m + m * m) * A ** (2 * m) + 2.0) / sigma


@dataclass
class TangentParams:
    kind: str = "kappa"
    l: int = 2
    p: float = 2.0
    alpha: float = 0.5
    delta: float = 0.1
    M: float | None = None
    A: float = 2.0
    sigma: float = 0.5
    budget: int = 100_000
    seed: int = 0
    cap: int = EXHAUSTIVE_CAP

    def resolved_M(self, m: int) -> float:
        return self.M if self.M is not None else default_M(m, self.A, self.sigma)

    def to_dict(self, m: int) -> dict:
        return {"kind": CurvatureKind.parse(self.kind).value, "l": self.l, "p": self.p,
                "alpha": self.alpha, "delta": self.delta, "M": self.resolved_M(m),
                "budget": self.budget, "seed": self.seed}


def _encode(rows: np.ndarray, base: int) -> np.ndarray:
    flat = np.zeros(len(rows), dtype=np.int64)
    for d in range(rows.shape[1]):
        flat = flat * base + rows[:, d]
    return flat


@dataclass
class BadSetFilter:
    """Predicate over m-tuples (given as indices into the cloud).

    ``kind`` is "Y" (kernel of the leading entries above M K / mu(B)^(l-1)),
    "Z" (points whose distance to a plane is an outlier; tuples are marked when
    any entry is such a point, which is the W set) or "none".
    """

    kind: str
    M: float
    threshold: float
    ball_idx: np.ndarray
    l: int = 1
    table: np.ndarray | None = None  # per leading tuple (Y) or per ball point (Z)
    energy: EnergyEstimate | None = None
    filtered_fraction: float | None = None
    _lazy: object = field(default=None, repr=False)

    @property
    def exhaustive(self) -> bool:
        return self.kind == "none" or self.table is not None

    def chebyshev_ok(self) -> bool | None:
        """Filtered mass share <= 1/M; None when only sampled."""
        if self.filtered_fraction is None:
            return None
        return self.filtered_fraction <= 1.0 / self.M

    def marks(self, tuples: np.ndarray) -> np.ndarray:
        tuples = np.atleast_2d(np.asarray(tuples, dtype=np.int64))
        if self.kind == "none":
            return np.zeros(len(tuples), dtype=bool)
        if self.kind == "Z":
            return np.isin(tuples, self.ball_idx[self.table]).any(axis=1)
        local = np.searchsorted(self.ball_idx, tuples)
        inside = local < len(self.ball_idx)
        if not np.all(inside) or not np.array_equal(self.ball_idx[local], tuples):
            raise ValueError("tuples must consist of points of the filter's ball")
        lead = local[:, : (self.l - 1)]
        if self.table is not None:
            vals = self.table[_encode(lead, len(self.ball_idx))]
        else:
            vals = self._lazy(lead)
        return vals > self.threshold


def _lead_table(ball: _Ball, kind, l: int, p: float, alpha: float) -> np.ndarray:
    """Exact kernel value for every leading (l-1)-tuple of ball points, flat mixed-radix order."""
    nb, m = ball.size, ball.m
    if l == m + 2:
        tails = np.arange(nb)[:, None]
        total = nb**m
        rows = max(1, CHUNK_TUPLES // nb)
        out = np.empty(total)
        for s in range(0, total, rows):
            lead = decode_indices(np.arange(s, min(s + rows, total)), nb, m)
            vals = k_integrand_batch(kind, _assemble(ball, lead, tails), l, p, alpha)
            out[s:s + len(lead)] = vals.reshape(len(lead), nb) @ ball.w
        return out
    tails, _ = _tail_rows(ball, m + 2 - l, EXHAUSTIVE_CAP * 1000, 1, None)
    lead = decode_indices(np.arange(nb ** (l - 1)), nb, l - 1)
    return _kernels(ball, kind, lead, tails, l, p, alpha)


def bad_set_Y(cloud: PointCloud, a, r: float, l: int, p: float, alpha: float, M: float,
              kind="kappa", budget: int = 100_000, seed: int = 0,
              cap: int = EXHAUSTIVE_CAP) -> BadSetFilter:
    """Leading-tuple filter at (a, r); empty for l = 1."""
    if M <= 1:
        raise ValueError("M must exceed 1")
    kind = CurvatureKind.parse(kind)
    m = cloud.m
    idx = require_ball(cloud, a, r)
    if l == 1:
        return BadSetFilter("none", M, math.inf, idx, l, filtered_fraction=0.0)
    ball = _Ball(idx, cloud.points[idx], cloud.weights[idx], np.asarray(a, dtype=float), m)
    nb, mass = ball.size, float(ball.w.sum())
    lead_n = m if l == m + 2 else l - 1
    if nb ** (m + 1) <= cap:
        table = _lead_table(ball, kind, l, p, alpha)
        lead_w = np.prod(ball.w[decode_indices(np.arange(nb**lead_n), nb, lead_n)], axis=1)
        K = float(np.sum(lead_w * table))
        energy = EnergyEstimate(K, 0.0, nb ** (m + 1), "exhaustive",
                                {"l": l, "p": p, "alpha": alpha, "kind": kind.value, "r": r})
        thr = M * K / mass**lead_n
        frac = float(np.sum(lead_w[table > thr]) / mass**lead_n)
        return BadSetFilter("Y", M, thr, idx, lead_n + 1, table, energy, frac)

    energy = k_energy(cloud, kind, a, r, l, p, alpha, budget=budget, seed=seed, cap=cap)
    thr = M * energy.value / mass**lead_n
    rng = np.random.default_rng(seed + 1)
    if l == m + 2:
        def lazy(lead: np.ndarray) -> np.ndarray:
            tails = np.arange(nb)[:, None]
            vals = k_integrand_batch(kind, _assemble(ball, lead, tails), l, p, alpha)
            return vals.reshape(len(lead), nb) @ ball.w
    else:
        tails, _ = _tail_rows(ball, m + 2 - l, mc_tail_count(budget), mc_tail_count(budget), rng)

        def lazy(lead: np.ndarray) -> np.ndarray:
            return _kernels(ball, kind, lead, tails, l, p, alpha)
    return BadSetFilter("Y", M, thr, idx, lead_n + 1, None, energy, None, lazy)


def outlier_filter_Z(cloud: PointCloud, a, r: float, Q: Plane, p: float, M: float) -> BadSetFilter:
    """Points c of B(a, r) with dist(c - a, Q)^p above M times its weighted mean; marks tuples touching them."""
    idx = require_ball(cloud, a, r)
    w = cloud.weights[idx]
    d = np.linalg.norm(Q.linear().reject(cloud.points[idx] - np.asarray(a, dtype=float)), axis=1) ** p
    mean = float(w @ d / w.sum())
    thr = M * mean
    bad = d > thr
    return BadSetFilter("Z", M, thr, idx, table=np.flatnonzero(bad),
                        filtered_fraction=float(w[bad].sum() / w.sum()))


@dataclass
class FatChoice:
    tuple_idx: np.ndarray
    vectors: np.ndarray
    gram: float
    plane: Plane
    candidates: int
    exhaustive: bool


def select_fat_tuple(cloud: PointCloud, a, r: float, delta: float, filters=(), budget: int = 100_000,
                     seed: int = 0, cap: int = EXHAUSTIVE_CAP, M: float | None = None) -> FatChoice:
    """First tuple of X_delta(a, r) unmarked by all filters, by decreasing wedge volume."""
    a = np.asarray(a, dtype=float)
    idx = require_ball(cloud, a, r)
    m, nb = cloud.m, len(idx)
    vecs = cloud.points[idx] - a
    total = nb**m
    exhaustive = total <= cap
    if exhaustive:
        local = decode_indices(np.arange(total), nb, m)
    else:
        local = np.random.default_rng(seed).integers(0, nb, size=(budget, m))
    grams = np.concatenate([wedge_norm_batch(vecs[local[s:s + 65536]])
                            for s in range(0, len(local), 65536)])
    fat = np.flatnonzero(grams >= delta * r**m)
    if len(fat) == 0:
        raise NoFatTuple(f"no tuple with wedge volume >= {delta:g} r^m at r = {r:g}",
                         delta=delta, M=M, radius=r)
    order = fat[np.lexsort((_encode(local[fat], nb), -grams[fat]))]
    for s in range(0, len(order), 256):
        batch = order[s:s + 256]
        glob = idx[local[batch]]
        bad = np.zeros(len(batch), dtype=bool)
        for f in filters:
            bad |= f.marks(glob)
        ok = np.flatnonzero(~bad & (grams[batch] > 0))
        if len(ok):
            j = batch[ok[0]]
            v = vecs[local[j]]
            return FatChoice(idx[local[j]], v, float(grams[j]), plane_from_vectors(v),
                             len(fat), exhaustive)
    raise NoFatTuple(f"every fat tuple at r = {r:g} is filtered out", delta=delta, M=M, radius=r)


def plane_at_scale(cloud: PointCloud, a, r: float, delta: float, filters=(), budget: int = 100_000,
                   seed: int = 0) -> Plane:
    return select_fat_tuple(cloud, a, r, delta, filters, budget, seed).plane


def plane_lemma_certificate(P: Plane, vectors: np.ndarray, r: float, slack: float = 1e-9) -> dict:
    """Check ||P - span(v)|| <= m eps / delta where |v_i| <= r, |v| wedge = delta r^m, heights <= eps r."""
    v = np.asarray(vectors, dtype=float)
    m = v.shape[0]
    gram = float(wedge_norm_batch(v))
    delta = gram / r**m
    eps = float(np.max(np.linalg.norm(P.linear().reject(v), axis=1))) / r
    applicable = bool(np.all(np.linalg.norm(v, axis=1) <= r * (1 + 1e-12)) and delta > 0 and eps < 1)
    out = {"delta": delta, "eps": eps, "applicable": applicable}
    if applicable:
        Q = plane_from_vectors(v)
        dist = plane_distance(P.linear(), Q)
        bound = m * eps / delta
        out.update(distance=dist, bound=bound, holds=bool(dist <= bound * (1 + slack) + slack))
    return out


def lower_bound_check(cloud: PointCloud, a, choice: FatChoice, r: float, slack: float = 1e-9) -> bool:
    """kappa(a, g, c) >= delta dist(c - a, P) / (2^m (m+1)! 2r) for every c in B(a, r)."""
    a = np.asarray(a, dtype=float)
    m = cloud.m
    idx = cloud.ball_indices(a, r)
    c = cloud.points[idx]
    delta = choice.gram / r**m
    g = a + choice.vectors
    P = np.concatenate([np.broadcast_to(a, (len(c), 1, cloud.n)),
                        np.broadcast_to(g, (len(c), m, cloud.n)), c[:, None, :]], axis=1)
    lhs = kappa_batch(P)
    dist = np.linalg.norm(choice.plane.reject(c - a), axis=1)
    rhs = delta * dist / (2**m * math.factorial(m + 1) * 2 * r)
    return bool(np.all(lhs >= rhs * (1 - slack) - slack * 1e-3))


@dataclass
class LogLogFit:
    slope: float | None
    r_squared: float | None
    flag: str  # ok | flat | insufficient
    pairs: int


def fit_loglog(radii, values, floor: float = DRIFT_FLOOR) -> LogLogFit:
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    use = values > floor
    if not np.any(use):
        return LogLogFit(None, None, "flat", 0)
    if use.sum() < 3:
        return LogLogFit(None, None, "insufficient", int(use.sum()))
    x, y = np.log(radii[use]), np.log(values[use])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return LogLogFit(float(coef[0]), r2, "ok", int(use.sum()))


@dataclass
class TangentEstimate:
    a: np.ndarray
    radii: np.ndarray
    planes: list[Plane]
    limit_plane: Plane
    drift: np.ndarray
    fit: LogLogFit
    energy: list[EnergyEstimate]
    tuples: list[np.ndarray]
    plane_certificates: list[dict]
    lower_bound_ok: list[bool]
    chebyshev: list[dict]
    M: float
    delta: float
    reference: str = "deepest"

    @property
    def alpha_fit(self) -> float | None:
        return self.fit.slope

    def certificates_ok(self) -> bool:
        planes_ok = all(c.get("holds", True) for c in self.plane_certificates)
        cheb_ok = all(v is not False for c in self.chebyshev for v in c.values())
        return planes_ok and all(self.lower_bound_ok) and cheb_ok

    def to_dict(self) -> dict:
        return {
            "a": self.a.tolist(),
            "radii": self.radii.tolist(),
            "planes": [P.basis.tolist() for P in self.planes],
            "limit_plane": self.limit_plane.basis.tolist(),
            "drift": self.drift.tolist(),
            "alpha_fit": self.fit.slope,
            "r_squared": self.fit.r_squared,
            "fit_flag": self.fit.flag,
            "fit_pairs": self.fit.pairs,
            "reference": self.reference,
            "energy": [e.to_dict() for e in self.energy],
            "plane_certificates": self.plane_certificates,
            "lower_bound_ok": self.lower_bound_ok,
            "chebyshev": self.chebyshev,
            "M": self.M,
            "delta": self.delta,
            "certificates_ok": self.certificates_ok(),
        }


def dyadic_plane_sequence(cloud: PointCloud, a, r0: float, depth: int,
                          params: TangentParams | None = None,
                          reference: Plane | None = None) -> TangentEstimate:
    """Planes at radii r0 2^-i, i < depth, their drift towards a limit plane and its decay rate.

    The limit is the deepest plane unless ``reference`` is given.  Against the
    deepest plane the two deepest scales are left out of the fit; against a
    reference every scale is used.
    """
    if depth < 2:
        raise ValueError("depth must be >= 2")
    params = params or TangentParams()
    a = np.asarray(a, dtype=float)
    m = cloud.m
    M = params.resolved_M(m)
    kind = CurvatureKind.parse(params.kind)
    l = params.l
    radii = r0 * 2.0 ** -np.arange(depth)
    planes, tuples, energies, lb, cheb, certs = [], [], [], [], [], []
    prev_Z: BadSetFilter | None = None
    for i, rho in enumerate(radii):
        Y = bad_set_Y(cloud, a, rho, l, params.p, params.alpha, M, kind, params.budget,
                      params.seed, params.cap)
        filters = [Y]
        if l == m + 2 and prev_Z is not None:
            filters.append(prev_Z)
        choice = select_fat_tuple(cloud, a, rho, params.delta, filters, params.budget,
                                  params.seed, params.cap, M)
        planes.append(choice.plane)
        tuples.append(choice.tuple_idx)
        energies.append(Y.energy if Y.energy is not None else
                        EnergyEstimate(0.0, 0.0, 0, "exhaustive", {"l": l}))
        lb.append(lower_bound_check(cloud, a, choice, rho))
        entry = {"Y": Y.chebyshev_ok()}
        if l == m + 2:
            prev_Z = outlier_filter_Z(cloud, a, rho, choice.plane, params.p, M)
            entry["Z"] = prev_Z.chebyshev_ok()
        cheb.append(entry)
        if i > 0:
            certs.append(plane_lemma_certificate(planes[i - 1], choice.vectors, rho))

    if reference is None:
        limit = planes[-1]
        drift = np.array([plane_distance(P, limit) for P in planes])
        fit = fit_loglog(radii[: depth - 2], drift[: depth - 2])
        ref = "deepest"
    else:
        limit = reference.linear()
        drift = np.array([plane_distance(P, limit) for P in planes])
        fit = fit_loglog(radii, drift)
        ref = "reference"
    return TangentEstimate(a, radii, planes, limit, drift, fit, energies, tuples, certs, lb,
                           cheb, M, params.delta, ref)


@dataclass
class ScaleProfile:
    """Per-radius scalar diagnostics at one base point."""

    radii: np.ndarray
    series: dict[str, np.ndarray]

    def max(self, name: str) -> float:
        return float(np.max(self.series[name]))

    def trend(self, name: str) -> LogLogFit:
        return fit_loglog(self.radii, self.series[name], floor=0.0)

    def to_dict(self) -> dict:
        out = {"radii": self.radii.tolist()}
        out.update({k: np.asarray(v).tolist() for k, v in self.series.items()})
        return out


def schatzle_diagnostic(cloud: PointCloud, a, T: Plane, alpha: float, r0: float, depth: int) -> ScaleProfile:
    """r^-m sum over b in B(a, r), b != a, of w_b |reject(T, b - a)| / |b - a|^(1 + alpha)."""
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    a = np.asarray(a, dtype=float)
    m = cloud.m
    radii = r0 * 2.0 ** -np.arange(depth)
    L = T.linear()
    vals = np.empty(depth)
    for i, r in enumerate(radii):
        idx = cloud.ball_indices(a, r)
        v = cloud.points[idx] - a
        d = np.linalg.norm(v, axis=1)
        keep = d > 0
        h = np.linalg.norm(L.reject(v[keep]), axis=1)
        vals[i] = float(cloud.weights[idx][keep] @ (h / d[keep] ** (1 + alpha))) / r**m
    return ScaleProfile(radii, {"schatzle": vals})


def taylor_sandwich_check(graph, x, y, slack: float = 1e-9) -> tuple[float, float, float]:
    """(|reject(Tan, F(y) - F(x))|, |f(y) - f(x) - Df(x)(y - x)|, 1 - |Df| / sqrt(1 + |Df|^2)).

    ``graph`` must provide ``F``, ``f``, ``Df`` and ``tangent`` at parameter points.
    Raises AssertionError if the two-sided bound fails.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    T = graph.tangent(x)
    lhs = float(np.linalg.norm(T.reject(graph.F(y) - graph.F(x))))
    D = np.atleast_2d(graph.Df(x))
    mid = float(np.linalg.norm(np.atleast_1d(graph.f(y) - graph.f(x) - D @ (y - x))))
    nD = float(np.linalg.svd(D, compute_uv=False)[0]) if D.size else 0.0
    factor = 1.0 - nD / math.sqrt(1.0 + nD * nD)
    scale = max(mid, 1e-300)
    assert lhs <= mid + slack * scale + 1e-15, (lhs, mid)
    assert lhs >= factor * mid - slack * scale - 1e-15, (lhs, factor * mid)
    return lhs, mid, factor
