"""Pointwise curvature kernels of an (m+2)-point simplex tuple.

Every kernel is a ratio of quantities of matched homogeneity, so it is
invariant under similarities, and every kernel is 0 on tuples of zero
diameter.  The ``*_batch`` functions work on arrays of shape (B, m+2, n).

Note on ``pm_sin``: the numerator wedge is anchored at a_0 for every vertex
index, as in the defining formula.  The wedge norm of the edge vectors does
not actually depend on the anchor, so this only matters for readers who
expect an anchor at a_i.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import RepeatedVertex
from .geom import as_points, diam_batch, pairwise_distances_batch, wedge_norm_batch


class CurvatureKind(str, Enum):
    KAPPA = "kappa"
    KAPPA_H = "kappa_h"
    KAPPA_MIN = "kappa_min"
    KAPPA_MAX = "kappa_max"
    KAPPA_DLS = "kappa_dls"

    @classmethod
    def parse(cls, value: "str | CurvatureKind") -> "CurvatureKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown curvature kind {value!r}; expected one of "
                             f"{[k.value for k in cls]}") from None


def _as_batch(T) -> tuple[np.ndarray, bool]:
    p = np.asarray(T.points if hasattr(T, "points") else T, dtype=float)
    if p.ndim == 2:
        return p[None], True
    return p, False


def _has_repeat(P: np.ndarray) -> np.ndarray:
    k = P.shape[1]
    out = np.zeros(P.shape[0], dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            out |= np.all(P[:, i] == P[:, j], axis=-1)
    return out


def _full_wedge(P: np.ndarray) -> np.ndarray:
    # a repeated vertex makes the tuple affinely dependent; clear the rounding residue of the minors
    W = wedge_norm_batch(P[:, 1:, :] - P[:, :1, :])
    W[_has_repeat(P)] = 0.0
    return W


def _facet_wedges(P: np.ndarray) -> np.ndarray:
    """Wedge norm of the facet opposite each vertex; shape (B, m+2)."""
    k = P.shape[1]
    out = np.empty((P.shape[0], k))
    for j in range(k):
        rest = np.delete(P, j, axis=1)
        out[:, j] = wedge_norm_batch(rest[:, 1:, :] - rest[:, :1, :])
    return out


def h_min_batch(P: np.ndarray, wedge: np.ndarray | None = None) -> np.ndarray:
    # dist(a_j, aff(others)) = |full wedge| / |facet_j wedge|; an affinely
    # dependent tuple has some vertex inside the hull of the rest, so h_min = 0.
    W = _full_wedge(P) if wedge is None else wedge
    facets = _facet_wedges(P).max(axis=1)
    out = np.zeros_like(W)
    ok = (W > 0) & (facets > 0)
    out[ok] = W[ok] / facets[ok]
    return out


def kappa_batch(P: np.ndarray) -> np.ndarray:
    m = P.shape[1] - 2
    d = diam_batch(P)
    vol = _full_wedge(P) / math.factorial(m + 1)
    out = np.zeros_like(d)
    ok = d > 0
    out[ok] = vol[ok] / d[ok] ** (m + 1)
    return out


def kappa_h_batch(P: np.ndarray) -> np.ndarray:
    d = diam_batch(P)
    h = h_min_batch(P)
    out = np.zeros_like(d)
    ok = d > 0
    out[ok] = h[ok] / d[ok]
    return out


def pm_sin_batch(P: np.ndarray, wedge: np.ndarray | None = None) -> np.ndarray:
    """p_m sin_i for every vertex i; shape (B, m+2), zero rows where the tuple is degenerate."""
    W = _full_wedge(P) if wedge is None else wedge
    dist = pairwise_distances_batch(P)
    k = P.shape[1]
    eye = np.eye(k, dtype=bool)
    prods = np.prod(np.where(eye, 1.0, dist), axis=2)
    out = np.zeros((P.shape[0], k))
    ok = W > 0
    if np.any(ok & np.any(prods == 0, axis=1)):
        raise RepeatedVertex("repeated vertex in a tuple with positive h_min")
    out[ok] = W[ok, None] / prods[ok]
    return out


def kappa_min_batch(P: np.ndarray) -> np.ndarray:
    return pm_sin_batch(P).min(axis=1)


def kappa_max_batch(P: np.ndarray) -> np.ndarray:
    return pm_sin_batch(P).max(axis=1)


def kappa_dls_batch(P: np.ndarray) -> np.ndarray:
    """Root-sum-square distance to the best affine m-plane over the diameter (exact via PCA)."""
    m = P.shape[1] - 2
    d = diam_batch(P)
    W = _full_wedge(P)
    centered = P - P.mean(axis=1, keepdims=True)
    s = np.linalg.svd(centered, compute_uv=False)  # descending, length min(m+2, n)
    # scatter has n eigenvalues s_i^2 (padded with zeros); keep all but the top m
    resid = np.sum(s[:, m:] ** 2, axis=1) if s.shape[1] > m else np.zeros(P.shape[0])
    out = np.zeros_like(d)
    ok = (d > 0) & (W > 0)
    out[ok] = np.sqrt(resid[ok]) / d[ok]
    return out


_BATCH = {
    CurvatureKind.KAPPA: kappa_batch,
    CurvatureKind.KAPPA_H: kappa_h_batch,
    CurvatureKind.KAPPA_MIN: kappa_min_batch,
    CurvatureKind.KAPPA_MAX: kappa_max_batch,
    CurvatureKind.KAPPA_DLS: kappa_dls_batch,
}


def curvature_batch(kind: CurvatureKind | str, P: np.ndarray) -> np.ndarray:
    return _BATCH[CurvatureKind.parse(kind)](np.asarray(P, dtype=float))


def k_integrand_batch(kind, P: np.ndarray, l: int, p: float, alpha: float) -> np.ndarray:
    """curvature(T)^p / diam(T)^(m(l-1) + alpha p), zero where diam vanishes."""
    P = np.asarray(P, dtype=float)
    m = P.shape[1] - 2
    if not 1 <= l <= m + 2:
        raise ValueError(f"l must lie in 1..{m + 2}, got {l}")
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    c = curvature_batch(kind, P)
    d = diam_batch(P)
    out = np.zeros_like(d)
    ok = (d > 0) & (c > 0)
    out[ok] = c[ok] ** p / d[ok] ** (m * (l - 1) + alpha * p)
    return out


def _scalar(fn, T) -> float:
    P, _ = _as_batch(as_points(T))
    return float(fn(P)[0])


def kappa(T) -> float:
    return _scalar(kappa_batch, T)


def h_min(T) -> float:
    return _scalar(h_min_batch, T)


def kappa_h(T) -> float:
    return _scalar(kappa_h_batch, T)


def pm_sin(T, i: int) -> float:
    P, _ = _as_batch(as_points(T))
    return float(pm_sin_batch(P)[0, i])


def kappa_min(T) -> float:
    return _scalar(kappa_min_batch, T)


def kappa_max(T) -> float:
    return _scalar(kappa_max_batch, T)


def kappa_dls(T) -> float:
    return _scalar(kappa_dls_batch, T)


def curvature(kind, T) -> float:
    P, _ = _as_batch(as_points(T))
    return float(curvature_batch(kind, P)[0])


def k_integrand(kind, T, l: int, p: float, alpha: float) -> float:
    P, _ = _as_batch(as_points(T))
    return float(k_integrand_batch(kind, P, l, p, alpha)[0])
