import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from riskscreen.pathframe import PathFrame, PathPoint, curvature, local_to_path, path_to_world, world_to_path


class TestCurvature:
    def test_zero(self):
        assert curvature(0.0, 2.7) == 0.0

    def test_worked_example(self):
        assert curvature(0.1, 2.7) == pytest.approx(float(oracles.curvature("0.1", "2.7")), rel=1e-12)

    def test_odd(self):
        assert curvature(-0.1, 2.7) == -curvature(0.1, 2.7)

    def test_clamped(self):
        assert curvature(1.4, 0.5) == 1.0
        assert curvature(-1.4, 0.5) == -1.0

    def test_bad_wheelbase(self):
        with pytest.raises(ValueError):
            curvature(0.1, 0.0)


def test_frame_clamps_kappa():
    assert PathFrame((0.0, 0.0), 0.0, 3.0).kappa == 1.0


class TestWorldToPath:
    def test_straight_axis_aligned(self):
        q = world_to_path(PathFrame((0.0, 0.0), 0.0, 0.0), (5.0, 2.0))
        assert (q.s, q.t) == (5.0, 2.0)

    def test_quarter_arc(self):
        frame = PathFrame((0.0, 0.0), 0.0, 0.1)
        # centre (0, 10); after 90 degrees of left turn the point is (10, 10)
        q = world_to_path(frame, (10.0, 10.0))
        assert q.s == pytest.approx(10 * math.pi / 2, abs=1e-9)
        assert q.t == pytest.approx(0.0, abs=1e-9)

    def test_inside_of_left_turn_is_positive(self):
        q = world_to_path(PathFrame((0.0, 0.0), 0.0, 0.1), (0.0, 3.0))
        assert q.s == pytest.approx(0.0, abs=1e-12) and q.t == pytest.approx(3.0, abs=1e-12)

    @pytest.mark.parametrize("kappa", [0.0, 0.3, -0.7])
    def test_origin(self, kappa):
        q = world_to_path(PathFrame((3.0, -4.0), 1.1, kappa), (3.0, -4.0))
        assert q.s == 0.0 and q.t == 0.0

    def test_half_turn_wraps_behind(self):
        frame = PathFrame((0.0, 0.0), 0.0, 0.1)
        ahead = world_to_path(frame, (-1.0, 20.0))  # just past half a circle
        assert ahead.s < 0

    @given(st.floats(-40, 40), st.floats(-15, 15))
    def test_seam_continuity(self, x, y):
        straight = world_to_path(PathFrame((0.0, 0.0), 0.0, 0.0), (x, y))
        for kappa in (1e-7, -1e-7, 1.1e-6, -1.1e-6):
            bent = world_to_path(PathFrame((0.0, 0.0), 0.0, kappa), (x, y))
            tol = 1e-3 if abs(kappa) < 1e-6 else 5e-3
            assert abs(bent.s - straight.s) < tol and abs(bent.t - straight.t) < tol

    @given(st.floats(-1, 1), st.floats(-30, 30), st.floats(-15, 15))
    def test_mirror_symmetry(self, kappa, x, y):
        a = world_to_path(PathFrame((0.0, 0.0), 0.0, kappa), (x, y))
        b = world_to_path(PathFrame((0.0, 0.0), 0.0, -kappa), (x, -y))
        assert b.s == pytest.approx(a.s, abs=1e-9)
        assert b.t == pytest.approx(-a.t, abs=1e-9)


class TestPathToWorld:
    def test_rotated_straight(self):
        x, y = path_to_world(PathFrame((0.0, 0.0), math.pi / 2, 0.0), PathPoint(5.0, 2.0))
        assert x == pytest.approx(-2.0, abs=1e-12) and y == pytest.approx(5.0, abs=1e-12)

    @pytest.mark.parametrize("kappa", [0.0, 0.2, -1.0])
    def test_zero_maps_to_origin(self, kappa):
        assert path_to_world(PathFrame((1.5, 2.5), 0.3, kappa), PathPoint(0.0, 0.0)) == pytest.approx((1.5, 2.5))

    def test_beyond_centre_rejected(self):
        with pytest.raises(ValueError):
            path_to_world(PathFrame((0.0, 0.0), 0.0, 0.5), PathPoint(1.0, 2.0))

    def test_round_trip_1000_points(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(1000):
            kappa = rng.uniform(-1, 1) if rng.random() > 0.2 else 0.0
            frame = PathFrame(tuple(rng.uniform(-100, 100, 2)), rng.uniform(-math.pi, math.pi), kappa)
            limit = math.pi / abs(kappa) if abs(kappa) > 1e-6 else 50.0
            s = rng.uniform(-1, 1) * min(50.0, 0.999 * limit)
            t = rng.uniform(-1, 1) * (min(15.0, 0.9 / abs(kappa)) if kappa else 15.0)
            back = world_to_path(frame, path_to_world(frame, PathPoint(s, t)))
            worst = max(worst, abs(back.s - s), abs(back.t - t))
        assert worst < 1e-9

    @settings(max_examples=300)
    @given(st.floats(-1, 1), st.floats(-50, 50), st.floats(-15, 15), st.floats(-math.pi, math.pi))
    def test_world_round_trip(self, kappa, u, w, heading):
        frame = PathFrame((10.0, -5.0), heading, kappa)
        if abs(kappa) > 1e-9 and abs(w - 1 / kappa) < 1e-3 and abs(u) < 1e-3:
            return  # the arc centre itself has no path coordinates
        p = (10.0 + u, -5.0 + w)
        back = path_to_world(frame, world_to_path(frame, p))
        assert back[0] == pytest.approx(p[0], abs=1e-6) and back[1] == pytest.approx(p[1], abs=1e-6)


def test_vectorised_matches_scalar():
    rng = np.random.default_rng(1)
    u, w = rng.uniform(-20, 20, 50), rng.uniform(-10, 10, 50)
    s, t = local_to_path(u, w, 0.25)
    for i in range(50):
        q = world_to_path(PathFrame((0.0, 0.0), 0.0, 0.25), (u[i], w[i]))
        assert (q.s, q.t) == (s[i], t[i])
