from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrect.errors import DegenerateSpan, DimensionMismatch
from mrect.geom import (Plane, SimplexTuple, affine_hull, coordinate_plane, diam, dist_to_affine,
                        gram_volume, graph_plane, operator_norm, plane_distance, plane_from_vectors,
                        project, reject, simplex_volume, tilt_norm, wedge_norm_batch)

from conftest import random_orthogonal


def det_gram(vs):
    v = np.asarray(vs, dtype=float)
    return math.sqrt(max(0.0, np.linalg.det(v @ v.T)))


class TestGramVolume:
    def test_orthonormal_pair(self):
        assert gram_volume([[1, 0, 0], [0, 1, 0]]) == pytest.approx(1.0)

    def test_dependent_pair(self):
        assert gram_volume([[1, 2, 3], [2, 4, 6]]) == pytest.approx(0.0, abs=1e-12)

    def test_sheared_square(self):
        assert gram_volume([[1, 0], [1, 1]]) == pytest.approx(1.0)

    def test_ragged_input_rejected(self):
        with pytest.raises(DimensionMismatch):
            gram_volume([1.0, 2.0])

    def test_matches_gram_determinant(self, rng):
        for k, n in [(1, 3), (2, 3), (2, 5), (3, 4), (3, 6), (4, 8)]:
            v = rng.normal(size=(k, n))
            assert gram_volume(v) == pytest.approx(det_gram(v), rel=1e-10)

    def test_permutation_and_rotation_invariance(self, rng):
        for k, n in [(2, 3), (3, 5)]:
            v = rng.normal(size=(k, n))
            base = gram_volume(v)
            assert gram_volume(v[rng.permutation(k)]) == pytest.approx(base, rel=1e-9)
            Q = random_orthogonal(rng, n)
            assert gram_volume(v @ Q.T) == pytest.approx(base, rel=1e-9)

    def test_batch_shape(self, rng):
        v = rng.normal(size=(7, 5, 2, 4))
        out = wedge_norm_batch(v)
        assert out.shape == (7, 5)
        assert out[3, 2] == pytest.approx(det_gram(v[3, 2]), rel=1e-10)


class TestSimplex:
    def test_right_triangle_area(self):
        assert simplex_volume([[0, 0], [1, 0], [0, 1]]) == pytest.approx(0.5)

    def test_collinear(self):
        assert simplex_volume([[0, 0], [1, 1], [3, 3]]) == pytest.approx(0.0, abs=1e-15)

    def test_unit_tetrahedron(self):
        assert simplex_volume([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]) == pytest.approx(1 / 6)

    def test_diam_examples(self):
        assert diam([[0, 0], [3, 4], [0, 1]]) == pytest.approx(5.0)
        assert diam([[2, 2], [2, 2], [2, 2]]) == 0.0
        assert diam([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]]) == pytest.approx(1.0)

    def test_tuple_permutation_permutes_table(self, rng):
        T = SimplexTuple(rng.normal(size=(4, 3)))
        order = [2, 0, 3, 1]
        P = T.permuted(order)
        assert np.allclose(P.distances, T.distances[np.ix_(order, order)])
        assert diam(P) == pytest.approx(diam(T))


class TestPlanes:
    def test_xy_plane(self):
        P = plane_from_vectors([[1, 0, 0], [0, 2, 0]])
        assert plane_distance(P, coordinate_plane(2, 3)) == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_span(self):
        with pytest.raises(DegenerateSpan):
            plane_from_vectors([[1, 0], [2, 0]])

    def test_normal_of_skew_plane(self):
        P = plane_from_vectors([[1, 1, 0], [0, 1, 1]])
        normal = np.array([1, -1, 1]) / math.sqrt(3)
        assert np.allclose(P.basis @ normal, 0, atol=1e-12)
        assert np.allclose(P.basis @ P.basis.T, np.eye(2), atol=1e-12)

    def test_project_reject_examples(self):
        P = coordinate_plane(2, 3)
        assert np.allclose(project(P, [1, 2, 3]), [1, 2, 0])
        assert np.allclose(reject(P, [1, 2, 3]), [0, 0, 3])
        assert np.allclose(reject(P, [4, -1, 0]), 0)
        line = Plane(np.array([[1, 1]]) / math.sqrt(2))
        assert np.allclose(project(line, [1, 0]), [0.5, 0.5])

    def test_affine_project_uses_offset(self):
        P = Plane(np.eye(3)[:2], offset=[0, 0, 1])
        assert np.allclose(P.reject([5, 5, 3]), [0, 0, 2])
        assert np.allclose(P.project([5, 5, 3]), [5, 5, 1])

    def test_non_orthonormal_basis_rejected(self):
        with pytest.raises(ValueError):
            Plane(np.array([[1.0, 1.0, 0.0]]))

    def test_pythagoras(self, rng):
        for m, n in [(1, 2), (2, 3), (2, 5), (3, 6)]:
            P = plane_from_vectors(rng.normal(size=(m, n)))
            v = rng.normal(size=(50, n))
            p, q = P.project(v), P.reject(v)
            lhs = np.sum(p * p, axis=1) + np.sum(q * q, axis=1)
            assert np.allclose(lhs, np.sum(v * v, axis=1), rtol=1e-10)
            assert np.all(np.abs(np.sum(p * q, axis=1)) <= 1e-10 * np.sum(v * v, axis=1))


class TestPlaneDistance:
    def test_examples(self):
        x = coordinate_plane(1, 2)
        y = Plane(np.array([[0.0, 1.0]]))
        diag = Plane(np.array([[1.0, 1.0]]) / math.sqrt(2))
        assert plane_distance(x, x) == 0.0
        assert plane_distance(x, y) == pytest.approx(1.0)
        assert plane_distance(x, diag) == pytest.approx(1 / math.sqrt(2))
        assert plane_distance(x, diag) == pytest.approx(tilt_norm(1.0), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            plane_distance(coordinate_plane(1, 3), coordinate_plane(2, 3))

    def test_symmetric_and_equals_max_rejection(self, rng):
        for m, n in [(1, 3), (2, 4), (2, 3), (3, 5)]:
            P = plane_from_vectors(rng.normal(size=(m, n)))
            Q = plane_from_vectors(rng.normal(size=(m, n)))
            d = plane_distance(P, Q)
            assert d == pytest.approx(plane_distance(Q, P), abs=1e-12)
            # max over unit u in Q of |reject(P, u)| is the top singular value of reject(P) restricted to Q
            alt = operator_norm(P.reject(Q.basis))
            assert d == pytest.approx(alt, abs=1e-8)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31 - 1))
    def test_graph_tilt_identity(self, m, k, seed):
        r = np.random.default_rng(seed)
        eta = r.normal(size=(k, m)) * np.exp(r.uniform(-4, 3))
        S = graph_plane(eta)
        d = plane_distance(S, coordinate_plane(m, m + k))
        assert d == pytest.approx(tilt_norm(operator_norm(eta)), abs=1e-8)


class TestAffine:
    def test_examples(self):
        z0 = Plane(np.eye(3)[:2], offset=[0, 0, 0])
        assert dist_to_affine([0, 0, 1], z0) == pytest.approx(1.0)
        assert dist_to_affine([3, -2, 0], z0) == 0.0
        assert dist_to_affine([1, 1], Plane(np.eye(2)[:1], offset=[0, 0])) == pytest.approx(1.0)

    def test_affine_hull_drops_rank(self):
        A = affine_hull([[0, 0, 0], [1, 1, 1], [2, 2, 2]])
        assert A.dim == 1
        assert dist_to_affine([1, 0, 0], A) == pytest.approx(math.sqrt(2 / 3))


class TestTilt:
    def test_values(self):
        assert tilt_norm(0.0) == 0.0
        assert tilt_norm(1.0) == pytest.approx(1 / math.sqrt(2))
        assert tilt_norm(math.inf) == 1.0
        with pytest.raises(ValueError):
            tilt_norm(-1.0)

    def test_squared_form(self):
        for e in [0.1, 0.7, 3.0]:
            assert tilt_norm(e) ** 2 == pytest.approx(e * e / (1 + e * e))

    def test_strictly_increasing(self):
        vals = [tilt_norm(e) for e in np.geomspace(1e-6, 1e6, 200)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1.0
