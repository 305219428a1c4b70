import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractube import geometry as geo


def unit2(theta):
    return (math.cos(theta), math.sin(theta))


class TestDirectionNet:
    def test_planar_count_s4(self):
        # brute force over candidate counts: largest n with 2 sin(pi/n) >= 1/4
        best = max(n for n in range(3, 200) if 2 * math.sin(math.pi / n) >= 0.25)
        assert best == 25
        net = geo.build_direction_net(2, 4)
        assert net.size == 25
        assert net.size <= 4 ** 4

    def test_planar_separation_exact(self):
        net = geo.build_direction_net(2, 4)
        assert geo.net_min_pairwise_distance(net) >= net.separation - 1e-15

    def test_planar_covering_audit(self):
        net = geo.build_direction_net(2, 3)
        assert geo.covering_audit(net, 100_000, seed=7) == 0

    def test_sphere_net_d3(self):
        net = geo.build_direction_net(3, 3, seed=11)
        assert geo.net_min_pairwise_distance(net) >= net.separation * (1 - 1e-12)
        assert net.size <= 3 ** 6
        assert net.pool_mesh == pytest.approx(1 / 12)
        assert geo.covering_audit(net, 100_000, seed=5) == 0

    def test_nearest_member(self):
        net = geo.build_direction_net(2, 5)
        for theta in (0.0, 0.3, 2.0, 5.1):
            e = unit2(theta)
            i = net.nearest(e)
            m = net.members_array()
            dists = np.linalg.norm(m - np.asarray(e), axis=1)
            assert dists[i] == pytest.approx(dists.min())
            assert dists[i] <= net.separation + 1e-12

    def test_csv_rows(self):
        net = geo.build_direction_net(2, 3, level=2)
        rows = net.to_csv_rows()
        assert rows[0][0] == 2
        assert len(rows) == net.size
        assert len(rows[0]) == 2 + 2


class TestCube:
    def setup_method(self):
        self.frame = geo.orthonormal_frame((1.0, 0.0))
        self.cube = geo.make_cube((0.0, 0.0), 0.5, self.frame)

    def test_center_inside(self):
        assert geo.cube_contains(self.cube, (0.0, 0.0))

    def test_corner_inside_closed(self):
        corner = 0.5 * self.frame[0] + 0.5 * self.frame[1]
        assert geo.cube_contains(self.cube, corner)

    def test_outside_one_axis(self):
        p = 1.01 * 0.5 * self.frame[1]
        assert not geo.cube_contains(self.cube, p)

    def test_bad_frame_rejected(self):
        with pytest.raises(ValueError):
            geo.make_cube((0.0, 0.0), 0.5, [(1.0, 0.0), (1.0, 0.0)])


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(0, 2 * math.pi), d=st.integers(min_value=2, max_value=5))
def test_frame_orthonormal_property(theta, d):
    rng = np.random.default_rng(int(theta * 1000) + d)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    frame = geo.orthonormal_frame(v)
    assert np.allclose(frame @ frame.T, np.eye(d), atol=1e-10)
    assert np.allclose(frame[0], v)


class TestSegmentDistance:
    def test_on_segment(self):
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 1.0)
        assert geo.segment_distance((0.5, 0.0), seg) == 0.0

    def test_beyond_endpoint(self):
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 1.0)
        assert geo.segment_distance((1.7, 0.0), seg) == pytest.approx(0.7)

    def test_perpendicular_foot(self):
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 1.0)
        assert geo.segment_distance((0.0, 0.3), seg) == pytest.approx(0.3)

    @settings(max_examples=40, deadline=None)
    @given(
        px=st.floats(-3, 3), py=st.floats(-3, 3),
        theta=st.floats(0, 2 * math.pi), a=st.floats(0.1, 2.0),
    )
    def test_matches_dense_sampling(self, px, py, theta, a):
        seg = geo.make_segment((0.0, 0.0), unit2(theta), a)
        ts = np.linspace(-a, a, 2001)
        pts = np.asarray(seg.center) + ts[:, None] * np.asarray(seg.direction)
        brute = np.min(np.linalg.norm(pts - np.array([px, py]), axis=1))
        fast = geo.segment_distance((px, py), seg)
        assert fast <= brute + 1e-12
        assert fast >= brute - a * 2e-3   # sampling resolution


class TestSeparatedPoints:
    def test_count_from_ratio(self):
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 0.5)
        h = 1.5 * (16 / 81) / 4  # 2/27
        pts = geo.separated_points(seg, h)
        assert len(pts) == 14
        assert len(pts) == geo.separated_count(seg.length, h)

    def test_h_equals_length(self):
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 0.5)
        pts = geo.separated_points(seg, 1.0)
        assert len(pts) == 2
        a, b = seg.endpoints()
        assert np.allclose(pts[0], a)
        assert np.allclose(pts[-1], b)

    def test_bad_spacing(self):
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 0.5)
        with pytest.raises(ValueError):
            geo.separated_points(seg, 0.0)
        with pytest.raises(ValueError):
            geo.separated_points(seg, 1.5)

    @settings(max_examples=60, deadline=None)
    @given(a=st.floats(0.05, 2.0), ratio=st.floats(0.01, 1.0))
    def test_separated_and_maximal(self, a, ratio):
        seg = geo.make_segment((0.0, 0.0), (0.0, 1.0), a)
        h = ratio * seg.length
        pts = geo.separated_points(seg, h)
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        # separation: every gap >= h; maximality on an interval with both
        # endpoints present: every gap < 2h
        assert np.all(gaps >= h - 1e-12 * max(1.0, h))
        assert np.all(gaps < 2 * h * (1 + 1e-9))
        assert np.allclose(pts[0], seg.endpoints()[0])
        assert np.allclose(pts[-1], seg.endpoints()[1])


class TestCubeCover:
    def test_count_unit_segment(self):
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 0.5)
        w = 16 / 81
        cubes = geo.cube_cover(seg, w)
        assert len(cubes) == 4
        assert geo.strict_count_ok(seg.length, w, len(cubes))

    def test_threshold_at_4w(self):
        w = 0.1
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 2 * w)
        cubes = geo.cube_cover(seg, w)
        assert len(cubes) == 3
        assert geo.strict_count_ok(seg.length, w, len(cubes))

    def test_threshold_just_above_4w(self):
        # covering forces a fourth cube once spacing would exceed 2w, and the
        # strict count bound still holds: 4 < (4w + delta)/w
        w = 0.1
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), (4 * w + 1e-9) / 2)
        cubes = geo.cube_cover(seg, w)
        assert len(cubes) == 4
        gaps = np.diff([geo.axial_coordinate(c.center, seg.center, seg.direction) for c in cubes])
        assert np.all(gaps <= 2 * w * (1 + 1e-12))
        assert geo.strict_count_ok(seg.length, w, len(cubes))

    def test_short_segment_bound_unattainable(self):
        q = 1.2
        w = 0.1
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), q * w)  # length 2Qw
        cubes = geo.cube_cover(seg, w)
        assert len(cubes) == 3
        assert not geo.strict_count_ok(seg.length, w, len(cubes))  # flagged, not fatal

    def test_centers_on_segment_shared_frame(self):
        seg = geo.make_segment((0.0, 0.0), unit2(0.7), 0.5)
        cubes = geo.cube_cover(seg, 0.05)
        frames = {c.frame for c in cubes}
        assert len(frames) == 1
        for c in cubes:
            assert geo.segment_distance(c.center, seg) < 1e-12

    def test_cover_correctness_sampled(self):
        rng = np.random.default_rng(42)
        seg = geo.make_segment((0.2, -0.1), unit2(1.1), 0.5)
        w = 16 / 81
        cubes = geo.cube_cover(seg, w)
        a, _ = seg.endpoints()
        e = np.asarray(seg.direction)
        n = np.array([-e[1], e[0]])
        failures = 0
        for _ in range(100_000):
            t = rng.uniform(-seg.half_length, seg.half_length)
            r = rng.uniform(-w, w)
            p = np.asarray(seg.center) + t * e + r * n
            assert geo.segment_distance(p, seg) <= w * (1 + 1e-12)
            if not any(geo.cube_contains(c, p) for c in cubes):
                failures += 1
        assert failures == 0

    def test_invalid_width(self):
        seg = geo.make_segment((0.0, 0.0), (1.0, 0.0), 0.5)
        with pytest.raises(ValueError):
            geo.cube_cover(seg, 0.0)
        with pytest.raises(ValueError):
            geo.cube_cover(seg, 0.6)


class TestScalarHelpers:
    def test_line_point_distance_matches_array_version(self):
        seg = geo.make_segment((0.1, 0.4), unit2(2.2), 0.7)
        p = (0.5, -0.2)
        d1 = geo.segment_distance(p, seg)
        d2 = geo.line_point_distance(p, seg.center, seg.direction, seg.half_length)
        assert d2 == pytest.approx(d1, rel=1e-12)

    def test_mp_operands(self):
        import mpmath as mp

        mp.mp.dps = 50
        center = (mp.mpf("0.1"), mp.mpf("0.2"))
        direction = (mp.mpf(1), mp.mpf(0))
        p = (mp.mpf("0.1"), mp.mpf("0.2") + mp.mpf("1e-30"))
        d = geo.line_point_distance(p, center, direction, mp.mpf("0.5"))
        assert mp.almosteq(d, mp.mpf("1e-30"))
