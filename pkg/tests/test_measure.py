from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrect.errors import CsvFormatError, DimensionMismatch, ZeroDirection
from mrect.generators import gen_plane
from mrect.geom import Plane, coordinate_plane
from mrect.measure import (PointCloud, ball_mass, chebyshev_excess_mass, cone_members,
                           cone_members_by_definition, density_profile, read_cloud_csv, stratify,
                           tangent_containment_defect, write_cloud_csv)


def line_cloud(xs, weights=None):
    pts = np.column_stack([xs, np.zeros(len(xs))])
    return PointCloud(pts, np.ones(len(xs)) if weights is None else weights, 1)


class TestPointCloud:
    def test_validation(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((0, 2)), np.zeros(0), 1)
        with pytest.raises(DimensionMismatch):
            PointCloud(np.zeros((3, 2)), np.ones(2), 1)
        with pytest.raises(ValueError):
            PointCloud(np.zeros((3, 2)), [1, 0, 1], 1)
        with pytest.raises(ValueError):
            PointCloud(np.zeros((3, 2)), np.ones(3), 2)

    def test_ball_mass_examples(self):
        c = line_cloud([0.0, 1.0, 2.0])
        assert ball_mass(c, [0.5, 0.0], 0.0) == 0.0
        assert ball_mass(c, [1.0, 0.0], 1.0) == 3.0  # closed ball keeps both ends
        assert ball_mass(c, [0.0, 0.0], 10.0) == c.total_mass

    def test_grid_index_matches_brute_force(self, rng):
        pts = rng.normal(size=(3000, 3)) * [1.0, 1.0, 0.05]
        c = PointCloud(pts, rng.uniform(0.5, 1.5, size=3000), 2)
        assert c._index is not None
        for i in range(1000):
            a = rng.normal(size=3) * 1.5
            r = float(rng.uniform(0, 1.2 if i % 2 else 0.06))
            assert np.array_equal(c.ball_indices(a, r), c.ball_indices_brute(a, r))

    def test_ball_mass_monotone_in_r(self, rng):
        c = PointCloud(rng.normal(size=(400, 2)), np.ones(400), 1)
        a = rng.normal(size=2)
        masses = [c.ball_mass(a, r) for r in np.linspace(0, 4, 200)]
        assert all(y >= x for x, y in zip(masses, masses[1:]))

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            line_cloud([0.0]).ball_indices([0, 0], -1.0)


class TestDensity:
    def test_plane_interior_ratio_near_one(self):
        fx = gen_plane(40_000, m=2, n=3, seed=3)
        prof = density_profile(fx.cloud, [0.0, 0.0, 0.0], 0.5, 3)
        assert np.allclose(prof.ratios, 1.0, atol=0.1)
        assert np.all(np.diff(prof.radii) < 0)

    def test_far_point_all_zero(self):
        fx = gen_plane(500, seed=1)
        prof = density_profile(fx.cloud, [0.0, 0.0, 50.0], 1.0, 4)
        assert np.all(prof.ratios == 0) and np.all(prof.empty)

    def test_linear_in_mass(self):
        fx = gen_plane(500, seed=1)
        a = fx.cloud.points[0]
        p1 = density_profile(fx.cloud, a, 0.5, 4)
        p2 = density_profile(fx.cloud.scaled_weights(2.0), a, 0.5, 4)
        assert np.allclose(p2.ratios, 2 * p1.ratios)


class TestStratify:
    def test_plane_interior_small_j(self):
        fx = gen_plane(4096, m=2, n=3, seed=0, sampling="grid")
        c = fx.cloud
        inner = np.flatnonzero(np.max(np.abs(c.points[:, :2]), axis=1) < 0.5)
        labels = stratify(c, 8, 8, r0=0.4, depth=6, indices=inner)
        assert all(s.bounded and s.j <= 2 for s in labels)

    def test_isolated_point_unbounded(self):
        pts = np.vstack([gen_plane(1024, m=2, n=3, seed=0).cloud.points, [[40.0, 40.0, 0.0]]])
        c = PointCloud(pts, np.full(len(pts), 4.0 / 1024), 2)
        s = stratify(c, 8, 8, r0=0.4, depth=5, indices=[len(pts) - 1])[0]
        assert not s.bounded
        assert s.to_dict()["label"] == "unbounded"

    def test_labels_nested(self, rng):
        # the j criterion is monotone: checking j+1 on a point labelled j also passes
        from mrect.measure import _criterion, density_profile as prof
        c = gen_plane(2000, seed=4).cloud
        for i in rng.choice(len(c), 30, replace=False):
            p = prof(c, c.points[i], 0.4, 5)
            for j in range(1, 6):
                if _criterion(p.ratios, p.radii, 1.0 / j, 1.0 / j, j):
                    assert _criterion(p.ratios, p.radii, 1.0 / j, 1.0 / (j + 1), j + 1)

    def test_unbounded_fraction_shrinks_with_samples(self):
        fracs = []
        for count in (256, 4096):
            c = gen_plane(count, seed=5).cloud
            inner = np.flatnonzero(np.max(np.abs(c.points[:, :2]), axis=1) < 0.5)
            labels = stratify(c, 2, 2, r0=0.4, depth=6, indices=inner)
            fracs.append(np.mean([not s.bounded for s in labels]))
        assert fracs[1] <= fracs[0]
        assert fracs[1] < 0.05


class TestCones:
    def test_parallel_always_member(self):
        c = line_cloud([0.0, 1.0, 3.0])
        for eps in (1e-6, 0.5, 2.0, 10.0):
            assert 1 in cone_members(c, [0, 0], [2.0, 0.0], eps)
            assert 0 not in cone_members(c, [0, 0], [2.0, 0.0], eps)

    def test_perpendicular_not_member(self):
        c = PointCloud([[0.0, 0.0], [0.0, 1.0]], [1, 1], 1)
        assert 1 not in cone_members(c, [0, 0], [1.0, 0.0], 0.5)

    def test_zero_direction(self):
        with pytest.raises(ZeroDirection):
            cone_members(line_cloud([0.0, 1.0]), [0, 0], [0, 0], 0.1)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.01, 3.0))
    def test_two_characterizations_agree(self, seed, eps):
        r = np.random.default_rng(seed)
        pts = r.normal(size=(60, 3))
        c = PointCloud(pts, np.ones(60), 1)
        a, v = r.normal(size=3), r.normal(size=3)
        assert np.array_equal(cone_members(c, a, v, eps), cone_members_by_definition(c, a, v, eps))

    def test_closed_form_minimum_matches_grid(self, rng):
        from mrect.measure import cone_min_distance
        for _ in range(20):
            u, v = rng.normal(size=2), rng.normal(size=2)
            ts = np.geomspace(1e-6, 1e3, 20001)
            grid = np.min(np.linalg.norm(ts[:, None] * u - v, axis=1))
            assert cone_min_distance(u, v)[0] == pytest.approx(grid, abs=1e-3)


class TestContainmentDefect:
    def test_cloud_in_plane(self):
        c = gen_plane(500, seed=2).cloud
        d = tangent_containment_defect(c, c.points[0], coordinate_plane(2, 3), 0.5)
        assert d.ratio_form == 0.0 and d.height_form == 0.0

    def test_perpendicular_plane(self):
        c = line_cloud(np.linspace(-1, 1, 41))
        a = np.zeros(2)
        T = Plane(np.array([[0.0, 1.0]]))
        r = 0.5
        d = tangent_containment_defect(c, a, T, r)
        mass_without_a = c.ball_mass(a, r) - 1.0
        assert d.ratio_form == pytest.approx(mass_without_a / r)

    def test_height_form_below_ratio_form(self, rng):
        c = PointCloud(rng.normal(size=(300, 3)), rng.uniform(0.1, 1, 300), 2)
        T = Plane(np.linalg.qr(rng.normal(size=(3, 2)))[0].T)
        for r in (0.3, 1.0, 2.0):
            d = tangent_containment_defect(c, c.points[0], T, r)
            assert d.height_form <= d.ratio_form + 1e-15


class TestChebyshev:
    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(1.0, 50.0))
    def test_excess_mass_bound(self, seed, K):
        r = np.random.default_rng(seed)
        w = r.uniform(0.01, 2, 200)
        f = r.standard_cauchy(200)
        mask = r.uniform(size=200) < 0.7
        excess, total = chebyshev_excess_mass(w, f, K, mask)
        assert excess <= total / K * (1 + 1e-12)


class TestCsv:
    def test_round_trip(self, tmp_path, rng):
        c = PointCloud(rng.normal(size=(20, 3)), rng.uniform(0.1, 1, 20), 2)
        path = tmp_path / "c.csv"
        write_cloud_csv(c, path)
        back = read_cloud_csv(path, 2)
        assert np.array_equal(back.points, c.points)
        assert np.array_equal(back.weights, c.weights)

    def test_missing_weights_use_reference_mass(self):
        c = read_cloud_csv("x1,x2\n0,0\n1,0\n2,0\n3,0\n", 1, reference_mass=2.0)
        assert np.allclose(c.weights, 0.5)

    @pytest.mark.parametrize("text,line,column", [
        ("x1,y2\n0,0\n", 1, 2),
        ("x1,x2\n0,0\n1,abc\n", 3, 2),
        ("x1,x2,w\n0,0,1\n1,1\n", 3, None),
        ("x1,x2,w\n0,0,-1\n", 2, 3),
        ("x1,x2\n0,nan\n", 2, 2),
    ])
    def test_errors_carry_position(self, text, line, column):
        with pytest.raises(CsvFormatError) as info:
            read_cloud_csv(text, 1)
        assert info.value.line == line
        assert info.value.column == column

    def test_m_not_below_n(self):
        with pytest.raises(ValueError):
            read_cloud_csv("x1,x2\n0,0\n1,1\n", 2)

    def test_empty_cloud(self):
        with pytest.raises(CsvFormatError):
            read_cloud_csv("x1,x2\n\n", 1)
