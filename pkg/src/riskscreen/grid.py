"""Ego-anchored rectangular grids and the fields that live on them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO, Mapping

import numpy as np

MAX_CELLS = 1_000_000


@dataclass(frozen=True)
class GridSpec:
    """Cell lattice in ego axes.

    Cells tile u in [-s_back, s_front] and w in [-half_width_lat,
    half_width_lat], with extents rounded outward to whole cells. Cell edges
    lie on multiples of `resolution`, so the ego's lateral axis u = 0 (where
    the DRF switches on) is a cell boundary and halving the resolution splits
    every cell into four.
    """

    s_back: float
    s_front: float
    half_width_lat: float
    resolution: float

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("grid resolution must be positive")
        if min(self.s_back, self.s_front, self.half_width_lat) <= 0:
            raise ValueError("grid extents must be positive")
        if self.rows * self.cols > MAX_CELLS:
            raise ValueError(f"grid has {self.rows * self.cols} cells, limit is {MAX_CELLS}")

    def _n(self, extent: float) -> int:
        return math.ceil(extent / self.resolution - 1e-9)

    @property
    def cols(self) -> int:
        return self._n(self.s_back) + self._n(self.s_front)

    @property
    def rows(self) -> int:
        return 2 * self._n(self.half_width_lat)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def cell_area(self) -> float:
        return self.resolution ** 2

    def local_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1-D forward (per column) and lateral (per row) centre coordinates."""
        return _axes(self)

    def local_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(u, w) of every cell centre, each shaped (rows, cols)."""
        return _mesh(self)


@lru_cache(maxsize=64)
def _axes(spec: GridSpec):
    r = spec.resolution
    u = (np.arange(-spec._n(spec.s_back), spec._n(spec.s_front)) + 0.5) * r
    w = (np.arange(-spec._n(spec.half_width_lat), spec._n(spec.half_width_lat)) + 0.5) * r
    u.flags.writeable = False
    w.flags.writeable = False
    return u, w


@lru_cache(maxsize=64)
def _mesh(spec: GridSpec):
    u, w = _axes(spec)
    uu, ww = np.meshgrid(u, w)
    uu.flags.writeable = False
    ww.flags.writeable = False
    return uu, ww


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def to_world(self, u, w):
        c, s = math.cos(self.heading), math.sin(self.heading)
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        return self.x + c * u - s * w, self.y + s * u + c * w

    def to_local(self, x, y):
        c, s = math.cos(self.heading), math.sin(self.heading)
        dx = np.asarray(x, dtype=float) - self.x
        dy = np.asarray(y, dtype=float) - self.y
        return c * dx + s * dy, -s * dx + c * dy


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Row-major cell values on a GridSpec placed at `anchor`.

    `layers` optionally carries per-source contributions (obstacle id ->
    array) whose sum is `values`.
    """

    spec: GridSpec
    anchor: Pose
    values: np.ndarray
    layers: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        frozen = {}
        for key, layer in self.layers.items():
            layer = np.array(layer, dtype=float)
            if layer.shape != self.spec.shape:
                raise ValueError(f"layer {key!r} shape mismatch")
            layer.flags.writeable = False
            frozen[key] = layer
        object.__setattr__(self, "layers", frozen)

    def world_centers(self):
        uu, ww = self.spec.local_centers()
        return self.anchor.to_world(uu, ww)

    def same_grid(self, other: "ScalarField") -> bool:
        return self.spec == other.spec and self.anchor == other.anchor


def write_field_csv(f: ScalarField, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    s = f.spec
    w.writerow(["spec", repr(s.s_back), repr(s.s_front), repr(s.half_width_lat), repr(s.resolution)])
    w.writerow(["anchor", repr(f.anchor.x), repr(f.anchor.y), repr(f.anchor.heading)])
    w.writerow(["row", "col", "x", "y", "value"])
    xs, ys = f.world_centers()
    for r in range(s.rows):
        for c in range(s.cols):
            w.writerow([r, c, repr(float(xs[r, c])), repr(float(ys[r, c])), repr(float(f.values[r, c]))])


def read_field_csv(fh: IO[str]) -> ScalarField:
    rows = csv.reader(fh)
    head = next(rows)
    anchor = next(rows)
    if head[0] != "spec" or anchor[0] != "anchor":
        raise ValueError("not a field CSV")
    spec = GridSpec(*map(float, head[1:5]))
    pose = Pose(*map(float, anchor[1:4]))
    next(rows)
    values = np.zeros(spec.shape)
    for r, c, _x, _y, v in rows:
        values[int(r), int(c)] = float(v)
    return ScalarField(spec, pose, values)
