"""Collision-severity cost: pairwise interaction cost diffused around obstacle boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import GridSpec, Pose, ScalarField
from .scenario import AgentState

KERNEL_CUTOFF = 6.0  # kernel support in units of sigma_c; exp(-18) ~ 1.5e-8 beyond


@dataclass(frozen=True)
class CostParams:
    c_base: float = 1.0
    w_b: float = 1.0
    w_a: float = 1.0
    w_r: float = 1.0
    sigma_c: float = 2.0

    def __post_init__(self):
        if min(self.c_base, self.w_b, self.w_a, self.w_r) < 0:
            raise ValueError("CostParams weights and c_base must be non-negative")
        if not self.sigma_c > 0:
            raise ValueError(f"CostParams.sigma_c must be positive, got {self.sigma_c}")


@dataclass(frozen=True)
class Obb:
    center: tuple[float, float]
    heading: float
    half_length: float
    half_width: float

    def __post_init__(self):
        if not (self.half_length > 0 and self.half_width > 0):
            raise ValueError("box half extents must be positive")


def obb_of(agent: AgentState) -> Obb:
    return Obb(agent.p, agent.theta, 0.5 * agent.length, 0.5 * agent.width)


def pair_cost(ego: AgentState, obstacle: AgentState, params: CostParams = CostParams()) -> float:
    """Interaction cost of `obstacle` as seen by `ego`.

    Baseline term plus log-damped absolute and relative kinetic energy, both
    using the obstacle's mass.
    """
    m = obstacle.mass
    vj = obstacle.v
    dvx, dvy = vj[0] - ego.v[0], vj[1] - ego.v[1]
    return (params.w_b * params.c_base
            + params.w_a * math.log1p(0.5 * m * (vj[0] ** 2 + vj[1] ** 2))
            + params.w_r * math.log1p(0.25 * m * (dvx * dvx + dvy * dvy)))


def obb_distance_xy(x, y, box: Obb):
    """Distance from points to a box; zero inside or on the boundary."""
    c, s = math.cos(box.heading), math.sin(box.heading)
    dx = np.asarray(x, dtype=float) - box.center[0]
    dy = np.asarray(y, dtype=float) - box.center[1]
    lu = np.abs(c * dx + s * dy) - box.half_length
    lw = np.abs(-s * dx + c * dy) - box.half_width
    return np.hypot(np.maximum(lu, 0.0), np.maximum(lw, 0.0))


def obb_distance(p, box: Obb) -> float:
    return float(obb_distance_xy(p[0], p[1], box))


def gauss_weight(d, params: CostParams = CostParams()):
    d = np.asarray(d, dtype=float)
    out = np.exp(-0.5 * (d / params.sigma_c) ** 2)
    return float(out) if out.ndim == 0 else out


def _kernel(d, params: CostParams):
    d = np.asarray(d, dtype=float)
    return np.where(d > KERNEL_CUTOFF * params.sigma_c, 0.0, np.exp(-0.5 * (d / params.sigma_c) ** 2))


def cost_contribution(p, obstacle: AgentState, cost: float, params: CostParams = CostParams()) -> float:
    """Cost of one obstacle at a point: its pair cost times the diffusion weight."""
    if cost < 0:
        raise ValueError("pair cost must be non-negative")
    return cost * float(_kernel(obb_distance(p, obb_of(obstacle)), params))


def cost_layer(x, y, obstacle: AgentState, cost: float, params: CostParams):
    return cost * _kernel(obb_distance_xy(x, y, obb_of(obstacle)), params)


def cost_map(ego: AgentState, obstacles: Sequence[AgentState], grid: GridSpec,
             params: CostParams = CostParams()) -> ScalarField:
    """Summed cost field on the ego-anchored grid, one layer per obstacle.

    Layers are summed in obstacle order so the total is bit-stable.
    """
    anchor = Pose(ego.p[0], ego.p[1], ego.theta)
    uu, ww = grid.local_centers()
    xs, ys = anchor.to_world(uu, ww)
    total = np.zeros(grid.shape)
    layers = {}
    for ob in obstacles:
        if ob.agent_id == ego.agent_id:
            raise ValueError("ego must not be listed among its own obstacles")
        layer = cost_layer(xs, ys, ob, pair_cost(ego, ob, params), params)
        layers[ob.agent_id] = layer
        total = total + layer
    return ScalarField(grid, anchor, total, layers)
