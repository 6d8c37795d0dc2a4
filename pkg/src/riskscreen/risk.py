"""Comprehensive risk: DRF times cost map, integrated per agent and frame."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cost import CostParams, Obb, _kernel, cost_map, obb_distance_xy, pair_cost
from .drf import DrfParams, default_grid, drf_grid, drf_on_spec
from .grid import GridSpec, ScalarField
from .scenario import AgentState, Scene, natural_key


@dataclass(frozen=True)
class GridDefaults:
    s_back: float = 5.0
    half_width_lat: float = 15.0
    resolution: float = 0.5
    front_min: float = 40.0
    front_margin: float = 10.0

    def __post_init__(self):
        if min(self.s_back, self.half_width_lat, self.resolution, self.front_min) <= 0 or self.front_margin < 0:
            raise ValueError("grid extents and resolution must be positive")


@dataclass(frozen=True)
class RiskModel:
    drf: DrfParams = field(default_factory=DrfParams)
    cost: CostParams = field(default_factory=CostParams)
    grid: GridDefaults = field(default_factory=GridDefaults)

    def grid_for(self, ego: AgentState) -> GridSpec:
        g = self.grid
        return default_grid(ego, self.drf, g.s_back, g.half_width_lat, g.resolution, g.front_min, g.front_margin)


@dataclass(frozen=True)
class RiskRecord:
    scene_id: str
    agent_id: str
    frame: int
    t: float
    total: float
    per_obstacle: Mapping[str, float]

    def to_dict(self) -> dict:
        return {"scene_id": self.scene_id, "agent_id": self.agent_id, "frame": self.frame, "t": self.t,
                "total": self.total, "per_obstacle": dict(self.per_obstacle)}


@dataclass(frozen=True)
class RiskSeries:
    scene_id: str
    agent_id: str
    records: tuple[RiskRecord, ...]

    @property
    def values(self) -> np.ndarray:
        return np.array([r.total for r in self.records])


@dataclass(frozen=True)
class ScenarioScore:
    scene_id: str
    score: float
    aggregator: str
    label: int | None = None


@dataclass(frozen=True, eq=False)
class FusedRisk:
    field: ScalarField
    total: float
    per_obstacle: dict[str, float]


def fuse(drf: ScalarField, cost: ScalarField) -> FusedRisk:
    """Cellwise product of DRF and cost, integrated over cell area.

    Each obstacle's share is the DRF integrated against its own cost layer,
    so the shares add up to the total.
    """
    if not drf.same_grid(cost):
        raise ValueError("DRF and cost fields must share grid spec and anchor")
    area = drf.spec.cell_area
    fused = drf.values * cost.values
    per = {key: area * float(np.sum(drf.values * layer)) for key, layer in cost.layers.items()}
    return FusedRisk(ScalarField(drf.spec, drf.anchor, fused), area * float(np.sum(fused)), per)


def frame_fields(ego: AgentState, obstacles: Sequence[AgentState], model: RiskModel = RiskModel()):
    """Full DRF, cost and fused fields for one agent at one frame."""
    spec = model.grid_for(ego)
    d = drf_grid(ego, spec, model.drf)
    c = cost_map(ego, obstacles, spec, model.cost)
    return d, c, fuse(d, c)


def frame_risk(ego: AgentState, obstacles: Sequence[AgentState], model: RiskModel = RiskModel()):
    """(total, per-obstacle) risk for one agent at one frame.

    Same quantity as ``fuse`` on the full fields, but the cost is evaluated
    only on cells where the DRF is non-zero and in ego axes.
    """
    spec = model.grid_for(ego)
    drf = drf_on_spec(ego, spec, model.drf)
    mask = drf > 0
    per: dict[str, float] = {}
    if not obstacles or not mask.any():
        return 0.0, {ob.agent_id: 0.0 for ob in obstacles}
    uu, ww = spec.local_centers()
    u, w, dv = uu[mask], ww[mask], drf[mask]
    area = spec.cell_area
    c, s = math.cos(ego.theta), math.sin(ego.theta)
    cost_cells = np.zeros_like(dv)
    reach = (math.hypot(spec.s_front + spec.s_back, 2 * spec.half_width_lat)
             + model.cost.sigma_c * 6.0)
    for ob in obstacles:
        dx, dy = ob.p[0] - ego.p[0], ob.p[1] - ego.p[1]
        if math.hypot(dx, dy) - 0.5 * math.hypot(ob.length, ob.width) > reach:
            per[ob.agent_id] = 0.0
            continue
        box_local = _local_box(dx, dy, ob, c, s, ego.theta)
        layer = pair_cost(ego, ob, model.cost) * _kernel(obb_distance_xy(u, w, box_local), model.cost)
        per[ob.agent_id] = area * float(np.sum(dv * layer))
        cost_cells = cost_cells + layer
    return area * float(np.sum(dv * cost_cells)), per


def _local_box(dx, dy, ob, c, s, heading):
    return Obb((c * dx + s * dy, -s * dx + c * dy), ob.theta - heading, 0.5 * ob.length, 0.5 * ob.width)


def agent_risk_series(scene: Scene, agent_id: str, model: RiskModel = RiskModel()) -> RiskSeries:
    """Risk of one agent over the scene's F future frames, from the logged states."""
    records = []
    for i, frame in enumerate(scene.future, start=1):
        try:
            ego = frame.get(agent_id)
        except KeyError:
            raise KeyError(f"agent {agent_id} missing from scene {scene.scene_id} future frame {i}") from None
        obstacles = [s for s in frame.states if s.agent_id != agent_id]
        total, per = frame_risk(ego, obstacles, model)
        records.append(RiskRecord(scene.scene_id, agent_id, i, frame.t, total, per))
    return RiskSeries(scene.scene_id, agent_id, tuple(records))


def scene_risk(scene: Scene, model: RiskModel = RiskModel()) -> list[RiskSeries]:
    return [agent_risk_series(scene, a, model) for a in scene.agent_ids]


_QUANTILE = re.compile(r"^quantile[(:]\s*([0-9.eE+-]+)\s*\)?$")
AGGREGATORS = ("max_max", "max_mean", "mean_max")


def check_aggregator(aggregator: str) -> float | None:
    """Validate an aggregator name; returns q for quantile aggregators."""
    if aggregator in AGGREGATORS:
        return None
    m = _QUANTILE.match(aggregator)
    if m:
        q = float(m.group(1))
        if 0.0 <= q <= 1.0:
            return q
    raise ValueError(f"unknown aggregator {aggregator!r}")


def aggregate(series_values: Sequence[Sequence[float]], aggregator: str = "max_max") -> float:
    if not series_values:
        raise ValueError("cannot aggregate an empty series set")
    q = check_aggregator(aggregator)
    arrays = [np.asarray(v, dtype=float) for v in series_values]
    if q is not None:
        return float(np.quantile(np.concatenate(arrays), q))
    if aggregator == "max_max":
        return max(float(a.max()) for a in arrays)
    if aggregator == "max_mean":
        return max(float(a.mean()) for a in arrays)
    return float(np.mean([a.max() for a in arrays]))


def scenario_score(series_set: Sequence[RiskSeries], aggregator: str = "max_max",
                   label: int | None = None) -> ScenarioScore:
    """Pool every agent's risk series into one scene score."""
    if not series_set:
        raise ValueError("scenario_score needs at least one series")
    series_set = sorted(series_set, key=lambda s: natural_key(s.agent_id))
    score = aggregate([s.values for s in series_set], aggregator)
    return ScenarioScore(series_set[0].scene_id, score, aggregator, label)
