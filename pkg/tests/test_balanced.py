from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrect.balanced import (Balanced, Concentrated, balanced_dichotomy, balanced_invariants, certify_dichotomy,
                            corollary_t, fat_fraction, fat_simplex_search, x_delta_member)
from mrect.errors import EmptyBall, NoValidBranch
from mrect.geom import Plane, gram_volume
from mrect.measure import PointCloud


def disc_cloud(count, seed=0, n=3):
    r = np.random.default_rng(seed)
    rad = np.sqrt(r.uniform(0, 1, count))
    th = r.uniform(0, 2 * math.pi, count)
    pts = np.zeros((count, n))
    pts[:, 0], pts[:, 1] = rad * np.cos(th), rad * np.sin(th)
    return PointCloud(pts, np.full(count, math.pi / count), 2)


def line_cloud_m2(count, seed=0):
    r = np.random.default_rng(seed)
    pts = np.zeros((count, 3))
    pts[:, 0] = r.uniform(-1, 1, count)
    return PointCloud(pts, np.full(count, 2.0 / count), 2)


class TestMembership:
    def test_examples(self):
        assert x_delta_member([0, 0], 1.0, 1.0, [[1, 0]])
        assert not x_delta_member([0, 0, 0], 1.0, 0.1, [[1, 0, 0], [2, 0, 0]])
        assert x_delta_member([0, 0, 0], 1.0, 1.0, [[1, 0, 0], [0, 1, 0]])

    def test_corollary_t(self):
        for g in (0.5, 0.1):
            for m in (1, 2, 3):
                t = corollary_t(g, m)
                assert (1 + t) ** m == pytest.approx(1 + 0.5 * g**m)


class TestFatFraction:
    def test_delta_zero_is_everything(self):
        c = disc_cloud(40)
        assert fat_fraction(c, [0, 0, 0], 1.0, 0.0).fraction == pytest.approx(1.0)

    def test_collinear_is_zero(self):
        c = line_cloud_m2(40)
        assert fat_fraction(c, [0, 0, 0], 1.0, 0.01).fraction == 0.0
        assert fat_simplex_search(c, [0, 0, 0], 1.0, 0.5) == 0.0

    def test_decreasing_in_delta_and_positive(self):
        c = disc_cloud(60, seed=2)
        fr = [fat_fraction(c, [0, 0, 0], 1.0, d).fraction for d in np.linspace(0, 1, 11)]
        assert all(y <= x for x, y in zip(fr, fr[1:]))
        assert fr[1] > 0.3

    def test_exhaustive_matches_loops(self):
        c = disc_cloud(15, seed=4)
        a, r, d = np.zeros(3), 0.8, 0.2
        idx = c.ball_indices(a, r)
        mass = c.weights[idx].sum()
        hit = sum(c.weights[i] * c.weights[j] for i in idx for j in idx
                  if gram_volume(c.points[[i, j]] - a) >= d * r**2)
        st = fat_fraction(c, a, r, d)
        assert st.mode == "exhaustive"
        assert st.fraction == pytest.approx(hit / mass**2, rel=1e-12)

    def test_monte_carlo(self):
        c = disc_cloud(200, seed=5)
        exact = fat_fraction(c, [0, 0, 0], 1.0, 0.2).fraction
        mc = fat_fraction(c, [0, 0, 0], 1.0, 0.2, budget=50_000, seed=1, cap=100)
        assert mc.mode == "monte_carlo"
        assert abs(mc.fraction - exact) <= 4 * mc.stderr

    def test_search_monotone_in_sigma(self):
        c = disc_cloud(80, seed=6)
        ds = [fat_simplex_search(c, [0, 0, 0], 1.0, s) for s in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert all(y <= x for x, y in zip(ds, ds[1:]))
        assert ds[2] > 0.1

    def test_search_uniform_over_interior(self):
        c = disc_cloud(400, seed=7)
        vals = [fat_simplex_search(c, c.points[i], 0.3, 0.5) for i in range(400)
                if np.linalg.norm(c.points[i]) < 0.5][:20]
        assert min(vals) > 0.1

    def test_empty_ball(self):
        with pytest.raises(EmptyBall):
            fat_fraction(disc_cloud(10), [5, 5, 5], 0.1, 0.5)


class TestDichotomy:
    def test_disc_is_balanced(self):
        c = disc_cloud(300, seed=1)
        a = np.zeros(3)
        d = balanced_dichotomy(c, a, a, 1.0, corollary_t(0.5, 2), 0.5)
        assert isinstance(d, Balanced)
        checks = balanced_invariants(d, a, a, 1.0, c.ball_mass(a, 1.0), 2, 3, 0)
        assert all(checks.values())

    def test_line_is_concentrated(self):
        c = line_cloud_m2(200, seed=3)
        a = np.zeros(3)
        for g in (0.5, 0.2, 0.05):
            d = balanced_dichotomy(c, a, a, 1.0, corollary_t(g, 2), g)
            assert isinstance(d, Concentrated)
            assert d.lam == 1
            assert all(balanced_invariants(d, a, a, 1.0, c.ball_mass(a, 1.0), 2, 3, 0).values())

    def test_continues_from_given_plane(self):
        c = disc_cloud(300, seed=2)
        a = np.zeros(3)
        L1 = Plane(np.array([[1.0, 0.0, 0.0]]))
        d = balanced_dichotomy(c, a, a, 1.0, corollary_t(0.5, 2), 0.5, k=1, L_k=L1)
        assert isinstance(d, Balanced) and len(d.points) == 1
        assert abs(d.points[0][1]) > 0.5
        with pytest.raises(ValueError):
            balanced_dichotomy(c, a, a, 1.0, 0.1, 0.5, k=1)

    def test_empty_ball(self):
        with pytest.raises(EmptyBall):
            balanced_dichotomy(disc_cloud(20), [9, 9, 9], [9, 9, 9], 0.5, 0.1, 0.5)

    def test_parameter_checks(self):
        c = disc_cloud(20)
        with pytest.raises(ValueError):
            balanced_dichotomy(c, np.zeros(3), np.zeros(3), 1.0, 1.5, 0.5)
        with pytest.raises(ValueError):
            balanced_dichotomy(c, np.zeros(3), np.zeros(3), 1.0, 0.1, 0.5, k=2)

    def test_certify_searches_gamma(self):
        c = disc_cloud(300, seed=8)
        d = certify_dichotomy(c, np.zeros(3), 1.0)
        assert d.gamma in [2.0**-i for i in range(1, 13)]
        assert d.t == pytest.approx(corollary_t(d.gamma, 2))

    def test_empty_ladder_reports_no_branch(self):
        with pytest.raises(NoValidBranch):
            certify_dichotomy(disc_cloud(30), np.zeros(3), 1.0, gammas=())

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([0.9, 0.5, 0.3, 0.1]), st.floats(0.01, 0.9))
    def test_random_clouds_get_a_verified_branch(self, seed, g, t):
        r = np.random.default_rng(seed)
        m = int(r.integers(1, 3))
        n = m + int(r.integers(1, 3))
        N = int(r.integers(3, 40))
        pts = r.normal(size=(N, n)) * r.uniform(0.05, 1, size=n)
        c = PointCloud(pts, np.exp(3 * r.normal(size=N)), m)
        a = pts[0]
        d = balanced_dichotomy(c, a, a, 1.0, t, g)
        assert all(balanced_invariants(d, a, a, 1.0, c.ball_mass(a, 1.0), m, n, 0).values())

    def test_fat_simplex_from_balanced_points(self):
        for seed in range(5):
            c = disc_cloud(300, seed=seed)
            a = np.zeros(3)
            g = 0.25
            t = corollary_t(g, 2)
            d = balanced_dichotomy(c, a, a, 1.0, t, g)
            assert isinstance(d, Balanced)
            assert gram_volume(d.points - a) >= g**2
            assert x_delta_member(a, 1.0, g**2, d.points)

    def test_perturbation_keeps_half_volume(self):
        r = np.random.default_rng(0)
        for seed in range(5):
            c = disc_cloud(300, seed=seed)
            a = np.zeros(3)
            for g in (0.5, 0.25, 0.1):
                t = corollary_t(g, 2)
                d = balanced_dichotomy(c, a, a, 1.0, t, g)
                assert isinstance(d, Balanced)
                for _ in range(200):
                    step = r.normal(size=d.points.shape)
                    step *= t * r.uniform(0, 1, (len(step), 1)) / np.linalg.norm(step, axis=1, keepdims=True)
                    assert gram_volume(d.points + step - a) >= 0.5 * g**2
