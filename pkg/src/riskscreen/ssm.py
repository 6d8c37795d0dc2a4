"""Surrogate safety measures used as screening baselines: TTC, THW, DRAC, PET."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from typing import IO, Iterable, Sequence

import numpy as np

from .scenario import AgentState, Scene

GAP_FLOOR = 0.01  # m
CLOSING_EPS = 1e-6  # m/s
THW_CONE = math.radians(15.0)
THW_SPEED_FLOOR = 0.1  # m/s
PET_FLOOR = 0.01  # s; inverse PET is taken against this floor
PET_CELL = 0.5  # m
METRICS = ("inv_ttc", "inv_thw", "drac", "inv_pet")
INF = math.inf


def _radius(a: AgentState) -> float:
    return 0.5 * math.hypot(a.length, a.width)


def _gap_closing(a: AgentState, b: AgentState) -> tuple[float, float]:
    dx, dy = b.p[0] - a.p[0], b.p[1] - a.p[1]
    dvx, dvy = b.v[0] - a.v[0], b.v[1] - a.v[1]
    dist = math.hypot(dx, dy)
    gap = max(dist - _radius(a) - _radius(b), GAP_FLOOR)
    if dist == 0.0:
        # coincident centres: treat any relative motion as closing
        return gap, math.hypot(dvx, dvy)
    return gap, -(dx * dvx + dy * dvy) / dist


def ttc(a: AgentState, b: AgentState) -> float:
    """Time to collision between circumscribed circles; inf when not closing."""
    gap, closing = _gap_closing(a, b)
    return gap / closing if closing > CLOSING_EPS else INF


def drac(a: AgentState, b: AgentState) -> float:
    """Deceleration rate needed to avoid the crash, closing^2 / (2 gap)."""
    gap, closing = _gap_closing(a, b)
    return closing * closing / (2.0 * gap) if closing > 0 else 0.0


def thw(follower: AgentState, leader: AgentState) -> float:
    """Time headway of `follower` behind `leader`; inf unless leader is ahead within the cone."""
    speed = follower.speed
    if speed < THW_SPEED_FLOOR:
        return INF
    dx, dy = leader.p[0] - follower.p[0], leader.p[1] - follower.p[1]
    if dx == 0.0 and dy == 0.0:
        return INF
    bearing = math.remainder(math.atan2(dy, dx) - follower.theta, 2.0 * math.pi)
    if abs(bearing) > THW_CONE:
        return INF
    along = dx * math.cos(follower.theta) + dy * math.sin(follower.theta)
    gap = max(along - 0.5 * (follower.length + leader.length), GAP_FLOOR)
    return gap / speed


def inverse(x: float, floor: float = 0.0) -> float:
    if math.isinf(x):
        return 0.0
    return 1.0 / max(x, floor) if floor > 0 else 1.0 / x


def _occupied_cells(a: AgentState, cell: float) -> np.ndarray:
    """Integer (ix, iy) of cells whose centres lie inside the agent's box."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    hl, hw = 0.5 * a.length, 0.5 * a.width
    ex = abs(c) * hl + abs(s) * hw
    ey = abs(s) * hl + abs(c) * hw
    ix = np.arange(math.floor((a.p[0] - ex) / cell), math.ceil((a.p[0] + ex) / cell) + 1)
    iy = np.arange(math.floor((a.p[1] - ey) / cell), math.ceil((a.p[1] + ey) / cell) + 1)
    gx, gy = np.meshgrid(ix, iy, indexing="ij")
    dx = (gx + 0.5) * cell - a.p[0]
    dy = (gy + 0.5) * cell - a.p[1]
    inside = (np.abs(c * dx + s * dy) <= hl) & (np.abs(-s * dx + c * dy) <= hw)
    return np.stack([gx[inside], gy[inside]], axis=1)


def _occupancy(frames_states: Sequence[AgentState], cell: float) -> dict[tuple[int, int], tuple[int, int]]:
    """cell -> (first frame, last frame) occupied."""
    occ: dict[tuple[int, int], tuple[int, int]] = {}
    for k, st in enumerate(frames_states):
        for ix, iy in _occupied_cells(st, cell).tolist():
            key = (ix, iy)
            first_last = occ.get(key)
            occ[key] = (k, k) if first_last is None else (first_last[0], k)
    return occ


def pet(scene: Scene, cell: float = PET_CELL, frames=None) -> dict[tuple[str, str], float]:
    """Post-encroachment time per agent pair over shared occupancy cells.

    For every cell both agents occupy, the gap between one agent's last
    occupied frame and the other's first is measured as
    ``(first_b - last_a - 1) * dt``, i.e. from the first unoccupied frame.
    Overlapping occupancy gives 0. Pairs sharing no cell get inf.
    """
    if cell <= 0:
        raise ValueError("PET cell size must be positive")
    frames = scene.future if frames is None else frames
    ids = scene.agent_ids
    occ = {a: _occupancy([fr.get(a) for fr in frames], cell) for a in ids}
    out = {}
    for a, b in combinations(ids, 2):
        best = INF
        oa, ob = occ[a], occ[b]
        for key in oa.keys() & ob.keys():
            fa, la = oa[key]
            fb, lb = ob[key]
            if la < fb:
                gap = (fb - la - 1) * scene.dt
            elif lb < fa:
                gap = (fa - lb - 1) * scene.dt
            else:
                gap = 0.0
            best = min(best, gap)
        out[(a, b)] = best
    return out


@dataclass(frozen=True)
class SsmRecord:
    scene_id: str
    frame: int
    pair: tuple[str, str]
    ttc: float
    thw: float
    drac: float
    inv_ttc: float
    inv_thw: float
    inv_pet: float

    def metric(self, name: str) -> float:
        return getattr(self, name)


def frame_records(scene: Scene, cell: float = PET_CELL) -> list[SsmRecord]:
    """One record per future frame and unordered agent pair."""
    pets = pet(scene, cell)
    out = []
    for i, frame in enumerate(scene.future, start=1):
        states = {s.agent_id: s for s in frame.states}
        for a, b in combinations(scene.agent_ids, 2):
            sa, sb = states[a], states[b]
            t = ttc(sa, sb)
            h = min(thw(sa, sb), thw(sb, sa))
            out.append(SsmRecord(scene.scene_id, i, (a, b), t, h, drac(sa, sb),
                                 inverse(t), inverse(h), inverse(pets[(a, b)], PET_FLOOR)))
    return out


def ssm_scene_score(scene: Scene, metric: str, cell: float = PET_CELL) -> float:
    """Maximum of a per-frame per-pair metric over the future window; 0 without pairs."""
    if metric not in METRICS:
        raise ValueError(f"unsupported SSM metric {metric!r}")
    return scene_scores(frame_records(scene, cell))[metric] if len(scene.agent_ids) > 1 else 0.0


def scene_scores(records: Iterable[SsmRecord]) -> dict[str, float]:
    scores = dict.fromkeys(METRICS, 0.0)
    for r in records:
        for m in METRICS:
            scores[m] = max(scores[m], r.metric(m))
    return scores


SSM_COLUMNS = ("scene_id", "frame", "agent_a", "agent_b", "ttc", "thw", "drac", "inv_ttc", "inv_thw", "inv_pet")


def write_ssm_csv(records: Iterable[SsmRecord], fh: IO[str], header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(SSM_COLUMNS)
    for r in records:
        w.writerow([r.scene_id, r.frame, r.pair[0], r.pair[1], repr(r.ttc), repr(r.thw), repr(r.drac),
                    repr(r.inv_ttc), repr(r.inv_thw), repr(r.inv_pet)])
