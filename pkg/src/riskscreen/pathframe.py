"""Ego path coordinates (arc length s, lateral offset t) on a constant-curvature arc."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_CURVATURE = 1.0
STRAIGHT_EPS = 1e-6


def curvature(delta: float, wheelbase: float) -> float:
    """Bicycle-model path curvature, clamped to +-1 1/m."""
    if wheelbase <= 0:
        raise ValueError("wheelbase must be positive")
    return min(max(math.tan(delta) / wheelbase, -MAX_CURVATURE), MAX_CURVATURE)


@dataclass(frozen=True)
class PathFrame:
    origin: tuple[float, float]
    heading: float
    kappa: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kappa", min(max(float(self.kappa), -MAX_CURVATURE), MAX_CURVATURE))

    @property
    def straight(self) -> bool:
        return abs(self.kappa) < STRAIGHT_EPS


@dataclass(frozen=True)
class PathPoint:
    s: float
    t: float


def local_to_path(u, w, kappa: float):
    """Path coordinates of points given in ego axes (u forward, w left).

    The arc is centred at (0, 1/kappa). With D the distance to the centre in
    units of the radius, t = sign(kappa) * (R - d) is rewritten as
    (2w - kappa(u^2 + w^2)) / (1 + D) so it stays exact as kappa -> 0.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if abs(kappa) < STRAIGHT_EPS:
        return u.copy(), w.copy()
    ak = abs(kappa)
    c = 1.0 - kappa * w
    s = np.arctan2(ak * u, c) / ak
    t = (2.0 * w - kappa * (u * u + w * w)) / (1.0 + np.hypot(kappa * u, c))
    return s, t


def path_to_local(s, t, kappa: float):
    """Inverse of :func:`local_to_path` for points not beyond the arc centre."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if abs(kappa) < STRAIGHT_EPS:
        return s.copy(), t.copy()
    ak = abs(kappa)
    sign = 1.0 if kappa > 0 else -1.0
    rho = 1.0 / ak
    if np.any(sign * t >= rho):
        raise ValueError("lateral offset reaches the arc centre; inverse is degenerate")
    phi = s * ak
    u = (rho - sign * t) * np.sin(phi)
    # rho * (1 - cos phi) written with sin^2 to avoid cancellation on wide arcs
    w = sign * 2.0 * rho * np.sin(0.5 * phi) ** 2 + t * np.cos(phi)
    return u, w


def _to_local(frame: PathFrame, x, y):
    c, s = math.cos(frame.heading), math.sin(frame.heading)
    dx = np.asarray(x, dtype=float) - frame.origin[0]
    dy = np.asarray(y, dtype=float) - frame.origin[1]
    return c * dx + s * dy, -s * dx + c * dy


def world_to_path_xy(frame: PathFrame, x, y):
    """Vectorised world -> (s, t)."""
    u, w = _to_local(frame, x, y)
    return local_to_path(u, w, frame.kappa)


def world_to_path(frame: PathFrame, p) -> PathPoint:
    s, t = world_to_path_xy(frame, p[0], p[1])
    return PathPoint(float(s), float(t))


def path_to_world(frame: PathFrame, q: PathPoint) -> tuple[float, float]:
    u, w = path_to_local(q.s, q.t, frame.kappa)
    c, s = math.cos(frame.heading), math.sin(frame.heading)
    return (frame.origin[0] + c * float(u) - s * float(w), frame.origin[1] + s * float(u) + c * float(w))
