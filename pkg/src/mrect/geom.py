"""Small-dimension linear algebra on points, simplices and m-planes.

Planes are stored as an orthonormal row basis (shape ``(m, n)``) plus an
optional offset.  All routines accept plain sequences or numpy arrays; the
batched ``*_batch`` variants take a leading batch axis and are what the
energy code uses internally.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DegenerateSpan, DimensionMismatch

RANK_TOL = 1e-10
ORTHO_TOL = 1e-12

_MINOR_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _minor_columns(n: int, k: int) -> np.ndarray:
    key = (n, k)
    if key not in _MINOR_CACHE:
        _MINOR_CACHE[key] = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
    return _MINOR_CACHE[key]


def wedge_norm_batch(vectors: np.ndarray) -> np.ndarray:
    """|v_1 ^ ... ^ v_k| for a stack of k-frames of shape (..., k, n).

    Uses the Cauchy-Binet expansion into k x k minors, which keeps full
    relative accuracy for nearly dependent frames (sqrt(det Gram) loses half
    the digits there).
    """
    v = np.asarray(vectors, dtype=float)
    k, n = v.shape[-2], v.shape[-1]
    if k == 0:
        return np.ones(v.shape[:-2])
    if k > n:
        return np.zeros(v.shape[:-2])
    if k == 1:
        return np.linalg.norm(v[..., 0, :], axis=-1)
    if k == n:
        return np.abs(np.linalg.det(v))
    cols = _minor_columns(n, k)
    if k == 2:
        i, j = cols[:, 0], cols[:, 1]
        minors = v[..., 0, i] * v[..., 1, j] - v[..., 0, j] * v[..., 1, i]
        return np.sqrt(np.sum(minors * minors, axis=-1))
    if len(cols) <= 70:
        sub = v[..., cols]  # (..., k, C, k)
        sub = np.moveaxis(sub, -2, -3)  # (..., C, k, k)
        minors = np.linalg.det(sub)
        return np.sqrt(np.sum(minors * minors, axis=-1))
    s = np.linalg.svd(v, compute_uv=False)
    return np.prod(s, axis=-1)


def gram_volume(vectors: Sequence[Sequence[float]] | np.ndarray) -> float:
    """Wedge norm |v_1 ^ ... ^ v_k| = sqrt(det <v_i, v_j>)."""
    v = np.asarray(vectors, dtype=float)
    if v.ndim != 2:
        raise DimensionMismatch(f"expected a list of vectors of equal length, got shape {v.shape}")
    return float(wedge_norm_batch(v))


def pairwise_distances_batch(points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    diff = p[..., :, None, :] - p[..., None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def diam_batch(points: np.ndarray) -> np.ndarray:
    d = pairwise_distances_batch(points)
    return d.reshape(d.shape[:-2] + (-1,)).max(axis=-1)


def simplex_volume_batch(points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    edges = p[..., 1:, :] - p[..., :1, :]
    k = p.shape[-2] - 1
    return wedge_norm_batch(edges) / math.factorial(k)


@dataclass(frozen=True)
class SimplexTuple:
    """Ordered tuple (a_0, ..., a_{m+1}) of points in R^n."""

    points: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.points, dtype=float)
        if p.ndim != 2 or p.shape[0] < 2:
            raise DimensionMismatch(f"simplex tuple needs shape (m+2, n), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("simplex tuple has non-finite coordinates")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def m(self) -> int:
        return self.points.shape[0] - 2

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @cached_property
    def distances(self) -> np.ndarray:
        d = pairwise_distances_batch(self.points)
        d.setflags(write=False)
        return d

    def permuted(self, order: Sequence[int]) -> "SimplexTuple":
        return SimplexTuple(self.points[list(order)])


def as_points(T: SimplexTuple | Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    if isinstance(T, SimplexTuple):
        return T.points
    p = np.asarray(T, dtype=float)
    if p.ndim != 2:
        raise DimensionMismatch(f"expected shape (k, n), got {p.shape}")
    return p


def simplex_volume(T) -> float:
    """H^{m+1} of the convex hull of the m+2 points of T."""
    return float(simplex_volume_batch(as_points(T)))


def diam(T) -> float:
    if isinstance(T, SimplexTuple):
        return float(T.distances.max())
    return float(diam_batch(as_points(T)))


def _orthonormalize(vs: np.ndarray, tol: float) -> np.ndarray | None:
    """Modified Gram-Schmidt with one re-orthogonalization pass."""
    basis: list[np.ndarray] = []
    for v in vs:
        w = v.astype(float).copy()
        for _ in range(2):
            for q in basis:
                w -= (q @ w) * q
        nrm = np.linalg.norm(w)
        if nrm <= tol:
            return None
        basis.append(w / nrm)
    return np.array(basis).reshape(len(vs), vs.shape[1])


@dataclass(frozen=True)
class Plane:
    """An m-dimensional plane with orthonormal row basis; affine when ``offset`` is set."""

    basis: np.ndarray
    offset: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        b = np.array(self.basis, dtype=float)
        if b.ndim != 2:
            raise DimensionMismatch(f"plane basis must be 2-d, got shape {b.shape}")
        if b.shape[0] and not np.allclose(b @ b.T, np.eye(b.shape[0]), atol=ORTHO_TOL * 100):
            raise ValueError("plane basis is not orthonormal")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        if self.offset is not None:
            o = np.array(self.offset, dtype=float).reshape(b.shape[1])
            o.setflags(write=False)
            object.__setattr__(self, "offset", o)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient(self) -> int:
        return self.basis.shape[1]

    @cached_property
    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def linear(self) -> "Plane":
        return Plane(self.basis) if self.offset is not None else self

    def project(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.offset is not None:
            return self.offset + (v - self.offset) @ self.basis.T @ self.basis
        return v @ self.basis.T @ self.basis

    def reject(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.offset is not None:
            v = v - self.offset
        return v - v @ self.basis.T @ self.basis

    def to_dict(self) -> dict:
        out = {"basis": self.basis.tolist()}
        if self.offset is not None:
            out["offset"] = self.offset.tolist()
        return out


def plane_from_vectors(vs, offset=None) -> Plane:
    """Orthonormal plane spanned by ``vs``; raises DegenerateSpan for near-dependent input."""
    v = np.asarray(vs, dtype=float)
    if v.ndim != 2:
        raise DimensionMismatch(f"expected a list of vectors, got shape {v.shape}")
    m = v.shape[0]
    scale = float(np.max(np.linalg.norm(v, axis=1))) if m else 0.0
    rank_tol = RANK_TOL * scale**m
    if m > v.shape[1] or scale == 0.0 or gram_volume(v) <= rank_tol:
        raise DegenerateSpan(f"{m} vectors do not span an {m}-plane (gram volume <= {rank_tol:.3g})")
    basis = _orthonormalize(v, tol=RANK_TOL * scale * 1e-3)
    if basis is None:
        raise DegenerateSpan("orthonormalization broke down")
    return Plane(basis, offset)


def coordinate_plane(m: int, n: int) -> Plane:
    return Plane(np.eye(n)[:m])


def project(P: Plane, v) -> np.ndarray:
    return P.project(v)


def reject(P: Plane, v) -> np.ndarray:
    return P.reject(v)


def plane_distance(P: Plane, Q: Plane) -> float:
    """Operator norm ||proj_P - proj_Q|| for two linear planes of equal dimension."""
    if P.ambient != Q.ambient or P.dim != Q.dim:
        raise DimensionMismatch(
            f"planes must share ambient and intrinsic dimension, got {P.dim}/{P.ambient} vs {Q.dim}/{Q.ambient}")
    s = np.linalg.svd(P.projector - Q.projector, compute_uv=False)
    return float(min(1.0, s[0])) if s.size else 0.0


def affine_hull(points, rank_tol: float = 1e-12) -> Plane:
    """Smallest affine plane through ``points`` (rank-revealing; may be lower dimensional)."""
    p = np.asarray(points, dtype=float)
    base = p[0]
    d = p[1:] - base
    if d.size == 0:
        return Plane(np.zeros((0, p.shape[1])), base)
    _, s, vt = np.linalg.svd(d, full_matrices=False)
    scale = max(float(s[0]) if s.size else 0.0, 1e-300)
    keep = s > rank_tol * scale
    return Plane(vt[keep], base)


def dist_to_affine(x, A: Plane) -> float:
    x = np.asarray(x, dtype=float)
    v = x - A.offset if A.offset is not None else x
    return float(np.linalg.norm(v - v @ A.basis.T @ A.basis))


def tilt_norm(eta_norm: float) -> float:
    """||proj_S - proj_T|| for the graph S of a linear map T -> T^perp of operator norm ``eta_norm``."""
    if eta_norm < 0:
        raise ValueError("eta_norm must be nonnegative")
    if math.isinf(eta_norm):
        return 1.0
    return eta_norm / math.sqrt(1.0 + eta_norm * eta_norm)


def graph_plane(eta: np.ndarray, base: Plane | None = None) -> Plane:
    """Plane {v + eta(v) : v in base} for a linear map given as an (n-m) x m matrix.

    Without ``base`` the base plane is span(e_1..e_m) and eta maps into
    span(e_{m+1}..e_n).
    """
    eta = np.asarray(eta, dtype=float)
    k, m = eta.shape
    n = m + k
    if base is None:
        frame = np.hstack([np.eye(m), eta.T])
    else:
        comp = orthogonal_complement(base)
        frame = base.basis + eta.T @ comp.basis
        n = base.ambient
    assert frame.shape == (m, n)
    return plane_from_vectors(frame)


def orthogonal_complement(P: Plane) -> Plane:
    n = P.ambient
    if P.dim == 0:
        return Plane(np.eye(n))
    u, s, _ = np.linalg.svd(P.basis.T, full_matrices=True)
    return Plane(u[:, P.dim:].T.copy())


def operator_norm(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[0])


def unit_ball_volume(m: int) -> float:
    """Lebesgue measure of the unit ball in R^m."""
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)
