"""Driver risk field: speed-adaptive lookahead with a Gaussian lateral profile."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, Pose, ScalarField
from .pathframe import PathFrame, curvature, local_to_path, world_to_path
from .scenario import DEFAULT_WHEELBASE, AgentState

SOFTPLUS_LINEAR = 30.0


@dataclass(frozen=True)
class DrfParams:
    H0: float = 1.0
    s_min: float = 1.0
    d_s: float = 2.0
    gamma_s: float = 1.0
    v0: float = 1.0
    k: float = 2.0
    beta_w: float = 0.1
    w0: float = 1.0
    k_i: float = 0.5
    wheelbase: float = DEFAULT_WHEELBASE

    def __post_init__(self):
        positive = {"H0": self.H0, "s_min": self.s_min, "d_s": self.d_s, "gamma_s": self.gamma_s,
                    "k": self.k, "w0": self.w0, "wheelbase": self.wheelbase}
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"DrfParams.{name} must be positive, got {value}")
        if self.beta_w < 0 or self.k_i < 0:
            raise ValueError("DrfParams.beta_w and k_i must be non-negative")
        if not lookahead(0.0, self) > self.s_min:
            raise ValueError("lookahead at rest must exceed s_min")


def smooth_speed(v, params: DrfParams):
    """Softplus-smoothed speed, v0 + ln(1 + exp(k(v - v0))) / k.

    Past k(v - v0) > 30 the correction is below double precision and v is
    returned unchanged.
    """
    v = np.asarray(v, dtype=float)
    z = params.k * (v - params.v0)
    out = np.where(z > SOFTPLUS_LINEAR, v,
                   params.v0 + np.log1p(np.exp(np.minimum(z, SOFTPLUS_LINEAR))) / params.k)
    return float(out) if out.ndim == 0 else out


def lookahead(v, params: DrfParams):
    """Maximum lookahead distance s_max(v) = d_s * smooth_speed(v)^gamma_s."""
    return params.d_s * smooth_speed(v, params) ** params.gamma_s


def height(s, s_max: float, params: DrfParams):
    s = np.asarray(s, dtype=float)
    s_eff = np.clip(s, params.s_min, s_max)
    a = params.H0 * (s_max - s_eff) ** 2 / (s_max - params.s_min) ** 2
    out = np.where((s <= 0) | (s >= s_max), 0.0, a)
    return float(out) if out.ndim == 0 else out


def width(s, delta: float, params: DrfParams):
    s_eff = np.maximum(np.asarray(s, dtype=float), params.s_min)
    out = params.beta_w * s_eff + params.w0 + params.k_i * abs(delta) * s_eff
    return float(out) if out.ndim == 0 else out


def ego_path(ego: AgentState, params: DrfParams) -> PathFrame:
    return PathFrame(ego.p, ego.theta, curvature(ego.steering, params.wheelbase))


def drf_local(s, t, speed: float, delta: float, params: DrfParams):
    """DRF at path coordinates (s, t) for an ego at `speed` and steering `delta`."""
    s_max = lookahead(speed, params)
    t = np.asarray(t, dtype=float)
    sigma = width(s, delta, params)
    return height(s, s_max, params) * np.exp(-(t * t) / (2.0 * sigma * sigma))


def drf_at(ego: AgentState, p, params: DrfParams = DrfParams()) -> float:
    q = world_to_path(ego_path(ego, params), p)
    return float(drf_local(q.s, q.t, ego.speed, ego.steering, params))


def drf_on_spec(ego: AgentState, spec: GridSpec, params: DrfParams) -> np.ndarray:
    """DRF at every cell centre of an ego-anchored, heading-aligned grid."""
    u, w = spec.local_centers()
    s, t = local_to_path(u, w, curvature(ego.steering, params.wheelbase))
    return drf_local(s, t, ego.speed, ego.steering, params)


def drf_grid(ego: AgentState, grid: GridSpec, params: DrfParams = DrfParams()) -> ScalarField:
    return ScalarField(grid, Pose(ego.p[0], ego.p[1], ego.theta), drf_on_spec(ego, grid, params))


def default_grid(ego: AgentState, params: DrfParams, s_back: float = 5.0, half_width_lat: float = 15.0,
                 resolution: float = 0.5, front_min: float = 40.0, front_margin: float = 10.0) -> GridSpec:
    """Grid covering the ego's DRF support with margin."""
    s_front = max(front_min, math.ceil(lookahead(ego.speed, params) + front_margin))
    return GridSpec(s_back, float(s_front), half_width_lat, resolution)
