import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import frozen
from conftest import make_agent
from riskscreen.drf import (DrfParams, default_grid, drf_at, drf_grid, ego_path, height, lookahead, smooth_speed,
                            width)
from riskscreen.grid import GridSpec
from riskscreen.pathframe import PathPoint, path_to_world

P = DrfParams()


class TestParams:
    @pytest.mark.parametrize("field", ["H0", "s_min", "d_s", "gamma_s", "k", "w0", "wheelbase"])
    def test_positive_required(self, field):
        with pytest.raises(ValueError):
            DrfParams(**{field: 0.0})

    @pytest.mark.parametrize("field", ["beta_w", "k_i"])
    def test_nonnegative_required(self, field):
        DrfParams(**{field: 0.0})
        with pytest.raises(ValueError):
            DrfParams(**{field: -0.1})

    def test_lookahead_at_rest_must_exceed_s_min(self):
        with pytest.raises(ValueError):
            DrfParams(s_min=3.0)


class TestSmoothSpeed:
    def test_at_rest(self):
        assert smooth_speed(0.0, P) == pytest.approx(frozen.SOFTPLUS_AT_0, rel=1e-12)

    def test_at_v0(self):
        assert smooth_speed(1.0, P) == pytest.approx(frozen.SOFTPLUS_AT_V0, rel=1e-12)
        assert smooth_speed(1.0, P) == pytest.approx(1 + math.log(2) / 2, rel=1e-15)

    def test_asymptote(self):
        assert abs(smooth_speed(30.0, P) - 30.0) < 1e-9
        assert abs(smooth_speed(50.0, P) - 50.0) < 1e-8

    def test_no_overflow(self):
        assert smooth_speed(1e6, P) == 1e6

    @given(st.floats(0, 14.5))
    def test_strictly_above_v_and_v0_before_linear_branch(self, v):
        sv = smooth_speed(v, P)
        assert sv > v and sv > P.v0

    @given(st.floats(0, 200))
    def test_never_below_v_or_v0(self, v):
        sv = smooth_speed(v, P)
        assert sv >= v and sv > P.v0

    def test_vectorised(self):
        v = np.array([0.0, 1.0, 10.0])
        assert np.allclose(smooth_speed(v, P), [smooth_speed(x, P) for x in v], rtol=0, atol=0)


class TestLookahead:
    def test_worked_examples(self):
        assert lookahead(10.0, P) == pytest.approx(frozen.LOOKAHEAD_AT_10, rel=1e-12)
        assert lookahead(0.0, P) == pytest.approx(frozen.LOOKAHEAD_AT_0, rel=1e-12)
        assert lookahead(15.0, P) == pytest.approx(frozen.LOOKAHEAD_AT_15, rel=1e-12)

    def test_linear_in_smoothed_speed(self):
        for v in (0.0, 3.0, 17.0):
            assert lookahead(v, P) == 2.0 * smooth_speed(v, P)

    @given(st.floats(0.1, 3.0), st.floats(0.1, 2.0), st.floats(0.0, 3.0), st.floats(0.2, 5.0))
    def test_strictly_increasing(self, d_s, gamma_s, v0, k):
        try:
            params = DrfParams(d_s=d_s, gamma_s=gamma_s, v0=v0, k=k, s_min=1e-3)
        except ValueError:
            return
        s = [lookahead(float(v), params) for v in range(31)]
        assert all(b > a for a, b in zip(s, s[1:]))


class TestHeight:
    def test_zero_at_s_max(self):
        assert height(50.0, 50.0, P) == 0.0

    def test_peak_at_s_min(self):
        assert height(1.0, 50.0, P) == 1.0

    def test_worked_example(self):
        assert height(25.5, 50.0, P) == pytest.approx(frozen.HEIGHT_AT_25_5, rel=1e-12)

    def test_flat_below_s_min_and_zero_behind(self):
        assert height(0.5, 50.0, P) == 1.0
        assert height(0.0, 50.0, P) == 0.0
        assert height(-3.0, 50.0, P) == 0.0

    def test_continuous_at_s_max(self):
        assert height(50.0 - 1e-7, 50.0, P) < 1e-16

    def test_non_increasing(self):
        s = np.linspace(1.0, 50.0, 2001)
        a = height(s, 50.0, P)
        assert np.all(np.diff(a) <= 0)


class TestWidth:
    def test_no_steering(self):
        assert width(10.0, 0.0, DrfParams(w0=0.5)) == pytest.approx(1.5, rel=1e-15)

    def test_worked_example(self):
        params = DrfParams(beta_w=0.1, w0=0.5, k_i=0.3)
        assert width(10.0, 0.2, params) == pytest.approx(frozen.WIDTH_STEERED, rel=1e-12)

    def test_even_in_delta(self):
        assert width(7.0, -0.3, P) == width(7.0, 0.3, P)

    def test_floor_below_s_min(self):
        assert width(-5.0, 0.0, P) == width(1.0, 0.0, P)
        assert width(-5.0, 0.0, P) >= P.w0


class TestDrfAt:
    ego = make_agent(p=(2.0, 1.0), v=(10.0, 0.0))

    def test_on_path(self):
        s_max = lookahead(10.0, P)
        assert drf_at(self.ego, (12.0, 1.0)) == pytest.approx(height(10.0, s_max, P), rel=1e-12)

    def test_one_sigma(self):
        s_max = lookahead(10.0, P)
        sig = width(10.0, 0.0, P)
        value = drf_at(self.ego, (12.0, 1.0 + sig))
        assert value == pytest.approx(height(10.0, s_max, P) * frozen.GAUSS_ONE_SIGMA, rel=1e-12)

    def test_behind_and_beyond(self):
        assert drf_at(self.ego, (1.0, 1.0)) == 0.0
        assert drf_at(self.ego, (2.0 + lookahead(10.0, P) + 0.01, 1.0)) == 0.0

    def test_lateral_gaussian_ratio_on_arc(self):
        ego = make_agent(v=(8.0, 0.0), delta=0.2)
        frame = ego_path(ego, P)
        s = 6.0
        sig = width(s, 0.2, P)
        base = drf_at(ego, path_to_world(frame, PathPoint(s, 0.0)))
        for t in np.linspace(-4, 4, 17):
            ratio = drf_at(ego, path_to_world(frame, PathPoint(s, float(t)))) / base
            assert ratio == pytest.approx(math.exp(-t * t / (2 * sig * sig)), rel=1e-12)

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 30), st.floats(-1, 1))
    def test_bounded(self, x, y, speed, delta):
        ego = make_agent(v=(speed, 0.0), delta=delta)
        assert 0.0 <= drf_at(ego, (x, y)) <= P.H0


class TestDrfGrid:
    def test_slow_ego_patch(self):
        ego = make_agent(v=(0.01, 0.0))
        spec = GridSpec(5.0, 10.0, 5.0, 0.25)
        f = drf_grid(ego, spec)
        u, _ = spec.local_centers()
        s_max = lookahead(0.01, P)
        nz = f.values > 0
        assert nz.any()
        assert u[nz].max() < s_max and u[nz].min() > 0

    def test_bounded_by_h0(self):
        ego = make_agent(v=(12.0, 3.0), delta=0.3)
        f = drf_grid(ego, default_grid(ego, P))
        assert f.values.max() <= P.H0 and f.values.min() >= 0

    def test_peak_stable_under_refinement(self):
        ego = make_agent(v=(10.0, 0.0), delta=0.05)
        coarse = drf_grid(ego, GridSpec(5.0, 40.0, 15.0, 0.5)).values.max()
        fine = drf_grid(ego, GridSpec(5.0, 40.0, 15.0, 0.25)).values.max()
        assert abs(fine - coarse) <= 0.02 * fine

    def test_matches_pointwise(self):
        ego = make_agent(p=(3.0, -2.0), v=(6.0, 6.0), delta=-0.2)
        f = drf_grid(ego, GridSpec(3.0, 20.0, 6.0, 1.0))
        xs, ys = f.world_centers()
        for r, c in [(0, 0), (6, 10), (3, 17), (9, 22)]:
            assert f.values[r, c] == pytest.approx(drf_at(ego, (xs[r, c], ys[r, c])), rel=1e-9, abs=1e-15)


class TestDefaultGrid:
    def test_minimum_front(self):
        g = default_grid(make_agent(v=(5.0, 0.0)), P)
        assert (g.s_back, g.s_front, g.half_width_lat, g.resolution) == (5.0, 40.0, 15.0, 0.5)

    def test_front_grows_with_speed(self):
        g = default_grid(make_agent(v=(25.0, 0.0)), P)
        assert g.s_front == math.ceil(lookahead(25.0, P) + 10.0) == 60.0
