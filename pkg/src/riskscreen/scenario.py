"""Trajectory ingestion, scene windowing, steering estimation and synthetic scenes."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

KINDS = ("car", "truck", "pedestrian", "bicycle", "other")

DEFAULT_MASS = {"car": 1500.0, "truck": 8000.0, "bicycle": 90.0, "pedestrian": 75.0, "other": 1500.0}
DEFAULT_FOOTPRINT = {
    "car": (4.5, 1.8),
    "truck": (10.0, 2.5),
    "bicycle": (1.8, 0.6),
    "pedestrian": (0.6, 0.6),
    "other": (4.5, 1.8),
}

MAX_STEER = math.pi / 3
DEFAULT_WHEELBASE = 2.7
STEER_SPEED_FLOOR = 0.5
TIME_TOL = 1e-6

REQUIRED_COLUMNS = (
    "case_id", "track_id", "frame_id", "timestamp_ms", "agent_type",
    "x", "y", "vx", "vy", "psi_rad", "length", "width",
)
OPTIONAL_COLUMNS = ("mass_kg", "steering_rad")

# INTERACTION uses "pedestrian/bicycle" for vulnerable road users
_TYPE_ALIASES = {
    "car": "car",
    "truck": "truck",
    "bus": "truck",
    "pedestrian": "pedestrian",
    "pedestrian/bicycle": "pedestrian",
    "bicycle": "bicycle",
    "cyclist": "bicycle",
}


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


def natural_key(s: str):
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


@dataclass(frozen=True)
class AgentState:
    agent_id: str
    t: float
    p: tuple[float, float]
    v: tuple[float, float]
    theta: float
    delta: float | None
    length: float
    width: float
    mass: float
    kind: str = "car"

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0 and self.mass > 0):
            raise ValueError(f"agent {self.agent_id}: length, width and mass must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"agent {self.agent_id}: unknown kind {self.kind!r}")
        object.__setattr__(self, "agent_id", str(self.agent_id))
        object.__setattr__(self, "p", (float(self.p[0]), float(self.p[1])))
        object.__setattr__(self, "v", (float(self.v[0]), float(self.v[1])))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        if self.delta is not None:
            object.__setattr__(self, "delta", min(max(float(self.delta), -MAX_STEER), MAX_STEER))

    @property
    def speed(self) -> float:
        return math.hypot(*self.v)

    @property
    def steering(self) -> float:
        """Steering angle, treating an unknown value as straight ahead."""
        return 0.0 if self.delta is None else self.delta


@dataclass(frozen=True)
class Frame:
    t: float
    states: tuple[AgentState, ...]

    def __post_init__(self):
        ids = [s.agent_id for s in self.states]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate agent ids in frame at t={self.t}")
        for s in self.states:
            if abs(s.t - self.t) > TIME_TOL:
                raise ValueError(f"agent {s.agent_id} has t={s.t}, frame has t={self.t}")

    def get(self, agent_id: str) -> AgentState:
        for s in self.states:
            if s.agent_id == agent_id:
                return s
        raise KeyError(agent_id)


@dataclass(frozen=True)
class Scene:
    scene_id: str
    frames: tuple[Frame, ...]
    T: int
    F: int
    dt: float
    label: int | None = None
    case_id: str = ""

    def __post_init__(self):
        if self.T < 1 or self.F < 1:
            raise ValueError("T and F must be at least 1")
        if len(self.frames) != self.T + self.F:
            raise ValueError(f"scene {self.scene_id}: expected {self.T + self.F} frames, got {len(self.frames)}")
        for a, b in zip(self.frames, self.frames[1:]):
            if abs((b.t - a.t) - self.dt) > TIME_TOL:
                raise ValueError(f"scene {self.scene_id}: frame spacing {b.t - a.t} != dt {self.dt}")
        if self.label not in (None, 0, 1):
            raise ValueError("label must be 0, 1 or None")

    @property
    def agent_ids(self) -> list[str]:
        return sorted({s.agent_id for s in self.frames[0].states}, key=natural_key)

    @property
    def future(self) -> tuple[Frame, ...]:
        return self.frames[self.T:]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class Track:
    case_id: str
    agent_id: str
    frame_ids: tuple[int, ...]
    states: tuple[AgentState, ...]

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class TrackTable:
    tracks: tuple[Track, ...]
    dt: Mapping[str, float] = field(default_factory=dict)

    def __len__(self):
        return len(self.tracks)

    @property
    def case_ids(self) -> list[str]:
        return sorted({t.case_id for t in self.tracks}, key=natural_key)


class TrackParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def _float(row, key, line, default=None):
    raw = (row.get(key) or "").strip()
    if raw == "":
        if default is not None:
            return default
        raise TrackParseError(f"missing value for {key!r}", line)
    try:
        return float(raw)
    except ValueError:
        raise TrackParseError(f"bad number {raw!r} in column {key!r}", line) from None


def parse_tracks(source: IO[bytes] | IO[str] | str | Path) -> TrackTable:
    """Read a tracks CSV into per-agent time-ordered state sequences.

    Rows are grouped by (case_id, track_id) and sorted by frame_id. Missing
    mass falls back to the per-kind default; missing steering stays None and
    is filled later by :func:`estimate_steering`.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return parse_tracks(fh)
    text = source.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return TrackTable(())
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise TrackParseError(f"missing required columns: {', '.join(missing)}", 1)

    rows: dict[tuple[str, str], list[tuple[int, AgentState]]] = {}
    for row in reader:
        line = reader.line_num
        if None in row:
            raise TrackParseError("too many fields", line)
        case_id = (row["case_id"] or "").strip()
        agent_id = (row["track_id"] or "").strip()
        if not case_id or not agent_id:
            raise TrackParseError("empty case_id or track_id", line)
        try:
            frame_id = int(float(row["frame_id"]))
        except (TypeError, ValueError):
            raise TrackParseError(f"bad frame_id {row['frame_id']!r}", line) from None
        kind = _TYPE_ALIASES.get((row["agent_type"] or "").strip().lower(), "other")
        t = _float(row, "timestamp_ms", line) / 1000.0
        x, y = _float(row, "x", line), _float(row, "y", line)
        vx, vy = _float(row, "vx", line), _float(row, "vy", line)
        # pedestrians in INTERACTION carry no yaw; fall back to the velocity direction
        heading = _float(row, "psi_rad", line, default=math.atan2(vy, vx))
        length = _float(row, "length", line, default=DEFAULT_FOOTPRINT[kind][0])
        width = _float(row, "width", line, default=DEFAULT_FOOTPRINT[kind][1])
        mass = _float(row, "mass_kg", line, default=DEFAULT_MASS[kind])
        steer_raw = (row.get("steering_rad") or "").strip()
        delta = _float(row, "steering_rad", line) if steer_raw else None
        try:
            state = AgentState(agent_id, t, (x, y), (vx, vy), heading, delta, length, width, mass, kind)
        except ValueError as exc:
            raise TrackParseError(str(exc), line) from None
        rows.setdefault((case_id, agent_id), []).append((frame_id, state))

    tracks = []
    for (case_id, agent_id), items in rows.items():
        items.sort(key=lambda it: it[0])
        frame_ids = tuple(f for f, _ in items)
        states = tuple(s for _, s in items)
        for (f0, s0), (f1, s1) in zip(items, items[1:]):
            if f1 == f0 or s1.t <= s0.t:
                raise TrackParseError(
                    f"track {agent_id} in case {case_id}: timestamps not strictly increasing at frame {f1}"
                )
        tracks.append(Track(case_id, agent_id, frame_ids, states))
    tracks.sort(key=lambda tr: (natural_key(tr.case_id), natural_key(tr.agent_id)))

    dt = {}
    for case_id in {tr.case_id for tr in tracks}:
        steps = [
            (b.t - a.t) / (fb - fa)
            for tr in tracks if tr.case_id == case_id
            for (fa, a), (fb, b) in zip(zip(tr.frame_ids, tr.states), zip(tr.frame_ids[1:], tr.states[1:]))
        ]
        dt[case_id] = float(np.median(steps)) if steps else 0.1
    return TrackTable(tuple(tracks), dt)


def estimate_steering(track: Sequence[AgentState], wheelbase: float = DEFAULT_WHEELBASE) -> list[float]:
    """Bicycle-model steering angle from heading changes.

    Interior frames use a central difference of the wrapped heading; the two
    endpoints copy their nearest interior value.
    """
    n = len(track)
    if n == 0:
        return []
    if n == 1:
        return [0.0]

    def steer(yaw_rate, speed):
        d = math.atan(wheelbase * yaw_rate / max(speed, STEER_SPEED_FLOOR))
        return min(max(d, -MAX_STEER), MAX_STEER)

    if n == 2:
        a, b = track
        d = steer(wrap_angle(b.theta - a.theta) / (b.t - a.t), 0.5 * (a.speed + b.speed))
        return [d, d]
    out = [0.0] * n
    for i in range(1, n - 1):
        prev, nxt = track[i - 1], track[i + 1]
        yaw_rate = wrap_angle(nxt.theta - prev.theta) / (nxt.t - prev.t)
        out[i] = steer(yaw_rate, track[i].speed)
    out[0], out[-1] = out[1], out[-2]
    return out


def _with_steering(track: Track, wheelbase: float) -> Track:
    if all(s.delta is not None for s in track.states):
        return track
    est = estimate_steering(track.states, wheelbase)
    states = tuple(s if s.delta is not None else replace(s, delta=d) for s, d in zip(track.states, est))
    return replace(track, states=states)


def build_scenes(
    tracks: TrackTable,
    T: int = 10,
    F: int = 30,
    stride: int = 10,
    wheelbase: float = DEFAULT_WHEELBASE,
) -> list[Scene]:
    """Cut fixed-length windows of T+F frames from every case.

    Windows start every `stride` frames from the first frame of the case.
    Only agents present on every frame of a window are kept; windows with no
    such agent are skipped. Output is ordered by (case_id, window start).
    """
    if T < 1 or F < 1 or stride < 1:
        raise ValueError("T, F and stride must be at least 1")
    n = T + F
    scenes = []
    by_case: dict[str, list[Track]] = {}
    for tr in tracks.tracks:
        by_case.setdefault(tr.case_id, []).append(_with_steering(tr, wheelbase))
    for case_id in sorted(by_case, key=natural_key):
        case_tracks = by_case[case_id]
        index = [dict(zip(tr.frame_ids, tr.states)) for tr in case_tracks]
        first = min(tr.frame_ids[0] for tr in case_tracks)
        last = max(tr.frame_ids[-1] for tr in case_tracks)
        dt = tracks.dt.get(case_id, 0.1)
        for start in range(first, last - n + 2, stride):
            window = range(start, start + n)
            present = [i for i, tr in enumerate(case_tracks)
                       if tr.frame_ids[0] <= start and tr.frame_ids[-1] >= start + n - 1
                       and all(f in index[i] for f in window)]
            if not present:
                continue
            present.sort(key=lambda i: natural_key(case_tracks[i].agent_id))
            frames = tuple(
                Frame(index[present[0]][f].t, tuple(index[i][f] for i in present)) for f in window
            )
            scenes.append(Scene(f"{case_id}/{start}", frames, T, F, dt, None, case_id))
    return scenes


# --- synthetic scenes -------------------------------------------------------

SYNTH_KINDS = ("safe_follow", "rear_end", "crossing", "stationary")
HAZARD_OFFSET = 1.0  # s; crossing arrival offsets at or below this are hazardous


def _car(agent_id, t, x, y, vx, vy, heading):
    length, width = DEFAULT_FOOTPRINT["car"]
    return AgentState(agent_id, t, (x, y), (vx, vy), heading, 0.0, length, width, DEFAULT_MASS["car"], "car")


def _draw(rng: np.random.Generator, params: Mapping, key: str, lo: float, hi: float) -> float:
    value = rng.uniform(lo, hi)  # always consumed so the stream does not depend on params
    return float(params[key]) if key in params else float(value)


def _check_range(name, value, lo, hi):
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")


def synth_scene(
    kind: str,
    params: Mapping[str, float] | None = None,
    seed: int = 0,
    T: int = 10,
    F: int = 30,
    dt: float = 0.1,
    scene_id: str | None = None,
) -> Scene:
    """Deterministic labeled test scene.

    Knobs not supplied in `params` are drawn from a generator seeded by `seed`:

    safe_follow: speed, gap (center gap, >= 20 m). Equal speeds, label 0.
    rear_end: leader_speed, follower_speed, gap. Constant velocities; the
        follower must close to a center gap <= 0.5 m inside the window. Label 1.
    crossing: speed_a, speed_b, arrival (s, when A reaches the crossing point),
        offset (s, B arrives this much later), angle (rad between paths).
        Label 1 iff offset <= 1 s.
    stationary: gap (lateral spacing), count. All agents at rest, label 0.
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown synthetic scene kind {kind!r}")
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    n = T + F
    times = [round(i * dt * 1000.0) / 1000.0 for i in range(n)]
    horizon = times[-1]
    frames: list[list[AgentState]] = [[] for _ in range(n)]

    if kind == "safe_follow":
        speed = _draw(rng, params, "speed", 5.0, 28.0)
        headway = rng.uniform(2.0, 3.5)  # s; default gaps follow a two-second-or-more rule
        gap = float(params.get("gap", min(max(20.0, speed * headway), 100.0)))
        _check_range("speed", speed, 0.0, 30.0)
        _check_range("gap", gap, 20.0, 100.0)
        for i, t in enumerate(times):
            x = speed * t
            frames[i] = [_car("1", t, x, 0.0, speed, 0.0, 0.0), _car("2", t, x + gap, 0.0, speed, 0.0, 0.0)]
        label = 0
    elif kind == "rear_end":
        leader = _draw(rng, params, "leader_speed", 0.0, 15.0)
        closing = rng.uniform(3.0, 10.0)
        # default closure lands on a frame in the back half of the window
        closure_frame = int(rng.integers(T + F // 2, n - 3))
        follower = float(params.get("follower_speed", leader + closing))
        gap = float(params.get("gap", (follower - leader) * times[closure_frame]))
        _check_range("leader_speed", leader, 0.0, 30.0)
        _check_range("follower_speed", follower, 0.0, 30.0)
        _check_range("gap", gap, 1.0, 100.0)
        for i, t in enumerate(times):
            frames[i] = [_car("1", t, follower * t, 0.0, follower, 0.0, 0.0),
                         _car("2", t, gap + leader * t, 0.0, leader, 0.0, 0.0)]
        min_gap = min(abs(gap + (leader - follower) * t) for t in times)
        if min_gap > 0.5:
            raise ValueError(f"rear_end follower never closes within 0.5 m (min center gap {min_gap:.3f} m)")
        label = 1
    elif kind == "crossing":
        speed_a = _draw(rng, params, "speed_a", 8.0, 15.0)
        speed_b = _draw(rng, params, "speed_b", 8.0, 15.0)
        arrival = _draw(rng, params, "arrival", times[T] + 0.5, horizon)
        offset = _draw(rng, params, "offset", 0.0, 2.0)
        angle = _draw(rng, params, "angle", math.pi / 3, 2 * math.pi / 3)
        _check_range("speed_a", speed_a, 0.1, 30.0)
        _check_range("speed_b", speed_b, 0.1, 30.0)
        _check_range("offset", offset, 0.0, horizon)
        ca, sa = math.cos(angle), math.sin(angle)
        for i, t in enumerate(times):
            da = speed_a * (t - arrival)
            db = speed_b * (t - arrival - offset)
            frames[i] = [_car("1", t, da, 0.0, speed_a, 0.0, 0.0),
                         _car("2", t, db * ca, db * sa, speed_b * ca, speed_b * sa, angle)]
        label = int(offset <= HAZARD_OFFSET)
    else:
        gap = _draw(rng, params, "gap", 20.0, 60.0)
        count = int(params.get("count", 2))
        _check_range("gap", gap, 1.0, 100.0)
        for i, t in enumerate(times):
            frames[i] = [_car(str(j + 1), t, 0.0, j * gap, 0.0, 0.0, 0.0) for j in range(count)]
        label = 0

    sid = scene_id or f"{kind}-{seed}"
    return Scene(sid, tuple(Frame(t, tuple(fr)) for t, fr in zip(times, frames)), T, F, dt, label, sid)


def synth_pack(
    kinds: Iterable[str] = SYNTH_KINDS,
    count: int = 3,
    seed: int = 0,
    T: int = 10,
    F: int = 30,
    dt: float = 0.1,
) -> list[Scene]:
    """`count` scenes of each kind, seeded ``seed, seed+1, ...`` per kind."""
    if count < 1:
        raise ValueError("count must be at least 1")
    scenes = []
    for kind in kinds:
        for i in range(count):
            s = seed + i
            scenes.append(synth_scene(kind, None, s, T, F, dt, scene_id=f"{kind}_{s:04d}"))
    return scenes


def mixed_pack(n_hazard: int, n_safe: int, seed: int = 0, T: int = 10, F: int = 30, dt: float = 0.1) -> list[Scene]:
    """Screening pack with `n_hazard` label-1 and `n_safe` label-0 scenes.

    Kinds rotate through rear_end, crossing, safe_follow and stationary.
    Crossing offsets are drawn from one continuous range straddling the
    hazard threshold and labeled by it; a crossing goes to whichever quota
    its label fills, so the pack is balanced without a gap at the threshold.
    """
    rng = np.random.default_rng(seed)
    hazards: list[Scene] = []
    safes: list[Scene] = []
    turn = 0
    while len(hazards) < n_hazard or len(safes) < n_safe:
        s = int(rng.integers(2**31))
        kind = ("rear_end", "crossing", "safe_follow", "crossing", "stationary")[turn % 5]
        turn += 1
        params = {"offset": float(rng.uniform(0.0, 3.0))} if kind == "crossing" else None
        scene = synth_scene(kind, params, s, T, F, dt, scene_id=f"m{turn:04d}_{kind}")
        bucket = hazards if scene.label else safes
        if len(bucket) < (n_hazard if scene.label else n_safe):
            bucket.append(scene)
    return hazards + safes


# --- CSV export -------------------------------------------------------------

def write_tracks_csv(scenes: Sequence[Scene], fh: IO[str]) -> None:
    """Write scenes as a tracks CSV, one case per scene, frames numbered from 0."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REQUIRED_COLUMNS + OPTIONAL_COLUMNS)
    for scene in scenes:
        for frame_id, frame in enumerate(scene.frames):
            for s in frame.states:
                w.writerow([
                    scene.scene_id, s.agent_id, frame_id, round(s.t * 1000.0), s.kind,
                    repr(s.p[0]), repr(s.p[1]), repr(s.v[0]), repr(s.v[1]), repr(s.theta),
                    repr(s.length), repr(s.width), repr(s.mass),
                    "" if s.delta is None else repr(s.delta),
                ])


def write_labels_csv(scenes: Sequence[Scene], fh: IO[str]) -> None:
    """Labels sidecar keyed by the scene id `build_scenes` gives the single window of each case."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["scene_id", "case_id", "label"])
    for scene in scenes:
        w.writerow([f"{scene.scene_id}/0", scene.scene_id, "" if scene.label is None else scene.label])


def read_labels_csv(source: str | Path) -> dict[str, int]:
    """Map scene_id (and case_id) to label."""
    out: dict[str, int] = {}
    with open(source, newline="") as fh:
        for row in csv.DictReader(fh):
            raw = (row.get("label") or "").strip()
            if raw == "":
                continue
            label = int(float(raw))
            if row.get("case_id"):
                out.setdefault(row["case_id"], label)
            if row.get("scene_id"):
                out[row["scene_id"]] = label
    return out
