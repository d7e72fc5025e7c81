"""Positional traces, event records and their file formats.

Coordinates are field meters with the origin at a pitch corner: x runs
along the long side (0..length), y along the short side (0..width).
The home team attacks the goal at x = length, the away team the goal at
x = 0; there is no half-time switch.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

OUT_OF_PITCH_MARGIN = 5.0
CSV_HEADER = ("frame", "object_id", "class", "team", "goalkeeper", "x", "y")


class TraceError(Exception):
    """Base class for data errors raised while reading traces and logs."""


class MalformedRecord(TraceError):
    def __init__(self, line: int, reason: str = ""):
        self.line = line
        super().__init__(f"malformed record at line {line}" + (f": {reason}" if reason else ""))


class MissingObject(TraceError):
    def __init__(self, frame: int, object_id: int | str):
        self.frame = frame
        self.object_id = object_id
        super().__init__(f"frame {frame} lacks object {object_id}")


class NonContiguousFrames(TraceError):
    def __init__(self, gap: int):
        self.gap = gap
        super().__init__(f"frames are not contiguous: frame {gap} is missing")


class UnknownObject(TraceError):
    def __init__(self, object_id: int):
        self.object_id = object_id
        super().__init__(f"object {object_id} is not in the roster")


class UnknownEventType(TraceError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown event type {name!r}")


class MissingRole(TraceError):
    def __init__(self, event: str, role: str):
        self.event = event
        self.role = role
        super().__init__(f"event {event} lacks required role {role!r}")


class Team(str, Enum):
    HOME = "home"
    AWAY = "away"
    NONE = "none"

    @property
    def opponent(self) -> "Team":
        if self is Team.HOME:
            return Team.AWAY
        if self is Team.AWAY:
            return Team.HOME
        return Team.NONE


class ObjectClass(str, Enum):
    PLAYER = "player"
    BALL = "ball"


@dataclass(frozen=True)
class FieldGeometry:
    length_m: float = 105.0
    width_m: float = 68.0
    goal_mouth_width_m: float = 7.32
    sideline_band_m: float = 13.84
    goal_area_depth_m: float = 16.5

    def __post_init__(self):
        dims = (self.length_m, self.width_m, self.goal_mouth_width_m,
                self.sideline_band_m, self.goal_area_depth_m)
        if min(dims) <= 0:
            raise ValueError("field dimensions must be strictly positive")
        if self.goal_mouth_width_m >= self.width_m:
            raise ValueError("goal mouth must be narrower than the pitch")
        if self.sideline_band_m >= self.width_m / 2:
            raise ValueError("sideline band must be narrower than half the pitch")

    @property
    def posts(self) -> tuple[float, float]:
        half = self.goal_mouth_width_m / 2
        return self.width_m / 2 - half, self.width_m / 2 + half

    def goal_center(self, attacking: Team) -> tuple[float, float]:
        """Center of the goal that ``attacking`` shoots at."""
        return (self.target_line_x(attacking), self.width_m / 2)

    def target_line_x(self, attacking: Team) -> float:
        if attacking is Team.HOME:
            return self.length_m
        if attacking is Team.AWAY:
            return 0.0
        raise ValueError("the ball has no target line")

    def in_pitch(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.length_m and 0.0 <= y <= self.width_m


@dataclass(frozen=True, order=True)
class ObjectId:
    id: int
    cls: ObjectClass = field(default=ObjectClass.PLAYER, compare=False)
    team: Team = field(default=Team.NONE, compare=False)
    is_goalkeeper: bool = field(default=False, compare=False)

    @property
    def is_ball(self) -> bool:
        return self.cls is ObjectClass.BALL


@dataclass(frozen=True)
class Frame:
    index: int
    positions: Mapping[ObjectId, tuple[float, float]]


class Trace:
    """Time-indexed positions of every tracked object.

    Positions live in one ``(n_frames, n_objects, 2)`` array whose object axis
    follows ``roster`` (sorted by id). Treat instances as immutable.
    """

    def __init__(self, positions: np.ndarray, roster: Sequence[ObjectId], *,
                 fps: float = 30.0, start: int = 0,
                 geometry: FieldGeometry | None = None):
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 3 or positions.shape[2] != 2:
            raise ValueError("positions must have shape (frames, objects, 2)")
        if positions.shape[1] != len(roster):
            raise ValueError("positions and roster disagree on the object count")
        if fps <= 0:
            raise ValueError("fps must be positive")
        order = np.argsort([o.id for o in roster], kind="stable")
        self.roster: tuple[ObjectId, ...] = tuple(roster[i] for i in order)
        self.positions = positions[:, order, :]
        self.positions.setflags(write=False)
        self.fps = float(fps)
        self.start = int(start)
        self.geometry = geometry or FieldGeometry()
        self._column = {o.id: i for i, o in enumerate(self.roster)}

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __repr__(self) -> str:
        return f"Trace(frames={self.start}..{self.end}, objects={len(self.roster)}, fps={self.fps:g})"

    @property
    def end(self) -> int:
        """Index of the last frame (inclusive)."""
        return self.start + len(self) - 1

    @property
    def frame_indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self))

    def column(self, object_id: int) -> int:
        try:
            return self._column[int(object_id)]
        except KeyError:
            raise UnknownObject(object_id) from None

    def object(self, object_id: int) -> ObjectId:
        return self.roster[self.column(object_id)]

    def has_object(self, object_id: int) -> bool:
        return int(object_id) in self._column

    @property
    def ball(self) -> ObjectId:
        balls = [o for o in self.roster if o.is_ball]
        if not balls:
            raise UnknownObject(-1)
        return balls[0]

    @property
    def players(self) -> tuple[ObjectId, ...]:
        return tuple(o for o in self.roster if not o.is_ball)

    def series(self, object_id: int) -> np.ndarray:
        """``(n_frames, 2)`` positions of one object."""
        return self.positions[:, self.column(object_id), :]

    def position(self, object_id: int, frame: int) -> np.ndarray:
        return self.positions[self._row(frame), self.column(object_id)]

    def frame(self, index: int) -> Frame:
        row = self.positions[self._row(index)]
        return Frame(index, {o: (float(row[i, 0]), float(row[i, 1]))
                             for i, o in enumerate(self.roster)})

    def _row(self, frame: int) -> int:
        row = int(frame) - self.start
        if not 0 <= row < len(self):
            raise IndexError(f"frame {frame} outside {self.start}..{self.end}")
        return row

    def slice(self, first: int, last: int) -> "Trace":
        """Sub-trace over frames ``first..last`` (inclusive, clipped)."""
        lo = max(first, self.start) - self.start
        hi = min(last, self.end) - self.start + 1
        return Trace(self.positions[lo:hi], self.roster, fps=self.fps,
                     start=self.start + lo, geometry=self.geometry)

    def with_positions(self, positions: np.ndarray) -> "Trace":
        return Trace(positions, self.roster, fps=self.fps, start=self.start,
                     geometry=self.geometry)


# -- events -----------------------------------------------------------------

ATOMIC_TYPES = ("KickingTheBall", "BallPossession", "Tackle", "BallDeflection",
                "BallOut", "Goal")
COMPLEX_TYPES = ("BallPossession", "Tackle", "WonTackle", "LostTackle", "Pass",
                 "Cross", "FilteringPass", "PassThenGoal", "CrossThenGoal",
                 "FilteringPassThenGoal", "Shot", "ShotOut", "ShotThenGoal",
                 "SavedShot")

ATOMIC_ROLES: dict[str, dict[str, ObjectClass]] = {
    "KickingTheBall": {"KickingPlayer": ObjectClass.PLAYER, "KickedObject": ObjectClass.BALL},
    "BallPossession": {"PossessingPlayer": ObjectClass.PLAYER, "PossessedObject": ObjectClass.BALL},
    "Tackle": {"PossessingPlayer": ObjectClass.PLAYER, "TacklingPlayer": ObjectClass.PLAYER,
               "PossessedObject": ObjectClass.BALL},
    "BallDeflection": {"DeflectingPlayer": ObjectClass.PLAYER, "DeflectedObject": ObjectClass.BALL},
    "BallOut": {"Ball": ObjectClass.BALL},
    "Goal": {"Scorer": ObjectClass.PLAYER, "Ball": ObjectClass.BALL},
}
REQUIRED_ATOMIC_ROLES = {
    "KickingTheBall": ("KickingPlayer",),
    "BallPossession": ("PossessingPlayer",),
    "Tackle": ("PossessingPlayer", "TacklingPlayer"),
    "BallDeflection": ("DeflectingPlayer",),
    "BallOut": (),
    "Goal": (),
}
# the player an atomic event is "about"; used as the suppression anchor
ANCHOR_ROLE = {
    "KickingTheBall": "KickingPlayer",
    "BallPossession": "PossessingPlayer",
    "Tackle": "PossessingPlayer",
    "BallDeflection": "DeflectingPlayer",
    "Goal": "Scorer",
}


@dataclass(frozen=True)
class AtomicEvent:
    id: str
    event_type: str
    t: int
    roles: Mapping[str, int] = field(default_factory=dict)

    @property
    def start(self) -> int:
        return self.t

    @property
    def end(self) -> int:
        return self.t

    @staticmethod
    def make(event_type: str, t: int, roles: Mapping[str, int]) -> "AtomicEvent":
        return AtomicEvent(f"{event_type}@{t}", event_type, int(t), dict(roles))


@dataclass(frozen=True)
class IntervalEvent:
    id: str
    event_type: str
    start: int
    end: int
    roles: Mapping[str, int] = field(default_factory=dict)
    sub_events: tuple[str, ...] = ()

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"{self.id}: start {self.start} after end {self.end}")

    @property
    def interval(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def duration(self) -> int:
        return self.end - self.start + 1

    @staticmethod
    def make(event_type: str, start: int, end: int, roles: Mapping[str, int],
             sub_events: Iterable[str] = ()) -> "IntervalEvent":
        return IntervalEvent(f"{event_type}@{start}-{end}", event_type, int(start),
                             int(end), dict(roles), tuple(sub_events))

    def key(self) -> tuple:
        """Identity used when comparing logs produced by different detectors."""
        return (self.event_type, self.start, self.end,
                tuple(sorted(self.roles.items())), self.sub_events)


def _sort_key(e):
    return (e.start, e.end, e.event_type, e.id)


@dataclass(frozen=True)
class EventLog:
    atomic: tuple[AtomicEvent, ...] = ()
    complex: tuple[IntervalEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atomic", tuple(sorted(self.atomic, key=_sort_key)))
        object.__setattr__(self, "complex", tuple(sorted(self.complex, key=_sort_key)))
        ids = [e.id for e in self.atomic] + [e.id for e in self.complex]
        if len(ids) != len(set(ids)):
            raise ValueError("event ids must be unique")

    def of_type(self, event_type: str, *, level: str = "atomic"):
        events = self.atomic if level == "atomic" else self.complex
        return [e for e in events if e.event_type == event_type]

    def shifted(self, delta: int) -> "EventLog":
        atomic = [AtomicEvent.make(e.event_type, e.t + delta, e.roles) for e in self.atomic]
        ids = {e.id: f"{e.event_type}@{e.t + delta}" for e in self.atomic}
        complex_ = [IntervalEvent.make(e.event_type, e.start + delta, e.end + delta,
                                       e.roles, (ids.get(s, s) for s in e.sub_events))
                    for e in self.complex]
        return EventLog(tuple(atomic), tuple(complex_))

    def merged(self, other: "EventLog") -> "EventLog":
        return EventLog(self.atomic + other.atomic, self.complex + other.complex)


# -- CSV traces -------------------------------------------------------------

def _parse_row(row: list[str], line: int) -> tuple[int, ObjectId, float, float]:
    if len(row) != 7:
        raise MalformedRecord(line, f"expected 7 fields, got {len(row)}")
    try:
        frame = int(row[0])
        oid = int(row[1])
        cls = ObjectClass(row[2].strip().lower())
        team = Team(row[3].strip().lower())
        keeper = row[4].strip()
        if keeper not in ("0", "1"):
            raise ValueError("goalkeeper flag must be 0 or 1")
        x, y = float(row[5]), float(row[6])
    except ValueError as exc:
        raise MalformedRecord(line, str(exc)) from None
    if frame < 0 or not (np.isfinite(x) and np.isfinite(y)):
        raise MalformedRecord(line, "negative frame or non-finite coordinate")
    return frame, ObjectId(oid, cls, team, keeper == "1"), x, y


def iter_trace_frames(path: str | Path) -> Iterator[tuple[int, dict[int, tuple[ObjectId, float, float]]]]:
    """Yield ``(frame, {object_id: (ObjectId, x, y)})`` one frame at a time.

    Rows must be grouped by frame. Checks contiguity and completeness
    against the roster of the first frame.
    """
    roster: dict[int, ObjectId] | None = None
    current: int | None = None
    rows: dict[int, tuple[ObjectId, float, float]] = {}

    def flush():
        nonlocal roster
        if roster is None:
            roster = {k: v[0] for k, v in rows.items()}
        for oid in roster:
            if oid not in rows:
                label = "ball" if roster[oid].is_ball else oid
                raise MissingObject(current, label)
        return current, rows

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line, row in enumerate(reader, start=1):
            if line == 1 and row and row[0].strip() == "frame":
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            frame, obj, x, y = _parse_row(row, line)
            if current is None or frame != current:
                if current is not None:
                    if frame < current:
                        raise MalformedRecord(line, "rows are not grouped by frame")
                    yield flush()
                    if frame != current + 1:
                        raise NonContiguousFrames(current + 1)
                current, rows = frame, {}
            if obj.id in rows:
                raise MalformedRecord(line, f"duplicate object {obj.id} in frame {frame}")
            if roster is not None and obj.id not in roster:
                raise MalformedRecord(line, f"object {obj.id} not present in first frame")
            rows[obj.id] = (obj, x, y)
    if current is not None:
        yield flush()


def load_trace(path: str | Path, fps: float = 30.0,
               geometry: FieldGeometry | None = None) -> Trace:
    frames = list(iter_trace_frames(path))
    if not frames:
        raise MalformedRecord(1, "no data rows")
    roster = sorted(v[0] for v in frames[0][1].values())
    ids = [o.id for o in roster]
    positions = np.array([[rows[i][1:] for i in ids] for _, rows in frames], dtype=float)
    return Trace(positions, roster, fps=fps, start=frames[0][0], geometry=geometry)


def iter_trace_chunks(path: str | Path, size: int = 300, fps: float = 30.0,
                      geometry: FieldGeometry | None = None) -> Iterator[Trace]:
    """Read a trace CSV as consecutive ``Trace`` chunks of at most ``size`` frames."""
    roster: list[ObjectId] | None = None
    block: list[np.ndarray] = []
    start = 0
    for frame, rows in iter_trace_frames(path):
        if roster is None:
            roster = sorted(v[0] for v in rows.values())
            ids = [o.id for o in roster]
            start = frame
        block.append(np.array([rows[i][1:] for i in ids], dtype=float))
        if len(block) == size:
            yield Trace(np.array(block), roster, fps=fps, start=start, geometry=geometry)
            start += size
            block = []
    if block:
        yield Trace(np.array(block), roster, fps=fps, start=start, geometry=geometry)
    elif roster is None:
        raise MalformedRecord(1, "no data rows")


def format_rows(trace: Trace, decimals: int = 3) -> Iterator[str]:
    fmt = f"{{:.{decimals}f}}"
    labels = [f"{o.id},{o.cls.value},{o.team.value},{int(o.is_goalkeeper)}" for o in trace.roster]
    for r, frame in enumerate(trace.frame_indices):
        row = trace.positions[r]
        for i, label in enumerate(labels):
            yield f"{frame},{label},{fmt.format(row[i, 0])},{fmt.format(row[i, 1])}\n"


def save_trace(trace: Trace, path: str | Path, decimals: int = 3) -> None:
    """Write the canonical CSV form (sorted rows, fixed decimals)."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        fh.writelines(format_rows(trace, decimals))


# -- event JSONL ------------------------------------------------------------

def event_to_record(event: AtomicEvent | IntervalEvent) -> dict:
    level = "atomic" if isinstance(event, AtomicEvent) else "complex"
    rec = {"type": event.event_type, "start": event.start, "end": event.end,
           "roles": {k: int(v) for k, v in event.roles.items()}, "level": level,
           "id": event.id}
    if level == "complex":
        rec["sub_events"] = list(event.sub_events)
    return rec


def event_from_record(rec: Mapping, where: str = "") -> AtomicEvent | IntervalEvent:
    etype = rec.get("type")
    if etype not in ATOMIC_TYPES and etype not in COMPLEX_TYPES:
        raise UnknownEventType(str(etype))
    start, end = int(rec["start"]), int(rec.get("end", rec["start"]))
    roles = {str(k): int(v) for k, v in (rec.get("roles") or {}).items()}
    level = rec.get("level")
    if level is None:
        atomic_only = etype not in COMPLEX_TYPES
        level = "atomic" if atomic_only or (etype in ATOMIC_TYPES and start == end) else "complex"
    if level == "atomic":
        if etype not in ATOMIC_TYPES:
            raise UnknownEventType(str(etype))
        for role in REQUIRED_ATOMIC_ROLES[etype]:
            if role not in roles:
                raise MissingRole(where or f"{etype}@{start}", role)
        ev = AtomicEvent.make(etype, start, roles)
    else:
        ev = IntervalEvent.make(etype, start, end, roles, rec.get("sub_events") or ())
    if rec.get("id"):
        ev = type(ev)(**{**ev.__dict__, "id": str(rec["id"])})
    return ev


def load_events(path: str | Path) -> EventLog:
    atomic, complex_ = [], []
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(n, str(exc)) from None
            ev = event_from_record(rec, where=f"line {n}")
            (atomic if isinstance(ev, AtomicEvent) else complex_).append(ev)
    return EventLog(tuple(atomic), tuple(complex_))


def save_events(log: EventLog, path: str | Path) -> None:
    events = sorted(log.atomic + log.complex, key=_sort_key)
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(event_to_record(ev)) + "\n")


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    kind: str
    frame: int | None = None
    object_id: int | None = None
    detail: str = ""

    def __str__(self) -> str:
        where = []
        if self.frame is not None:
            where.append(f"frame {self.frame}")
        if self.object_id is not None:
            where.append(f"object {self.object_id}")
        return f"{self.kind}({', '.join(where)}){': ' + self.detail if self.detail else ''}"


def validate(trace: Trace) -> list[Diagnostic]:
    """Check the trace invariants; returns one diagnostic per violation."""
    out: list[Diagnostic] = []
    if trace.fps <= 0:
        out.append(Diagnostic("NonPositiveFps"))
    balls = [o for o in trace.roster if o.is_ball]
    if not balls:
        out.append(Diagnostic("MissingBall"))
    elif len(balls) > 1:
        out.append(Diagnostic("DuplicateBall", detail=f"{len(balls)} balls"))
    for o in balls:
        if o.team is not Team.NONE:
            out.append(Diagnostic("BallWithTeam", object_id=o.id))
    for team in (Team.HOME, Team.AWAY):
        keepers = [o for o in trace.roster if o.team is team and o.is_goalkeeper]
        if len(keepers) != 1:
            out.append(Diagnostic("GoalkeeperCount", detail=f"{team.value}: {len(keepers)}"))
    for o in trace.roster:
        if not o.is_ball and o.team is Team.NONE:
            out.append(Diagnostic("PlayerWithoutTeam", object_id=o.id))
    g = trace.geometry
    m = OUT_OF_PITCH_MARGIN
    pos = trace.positions
    bad = ((pos[..., 0] < -m) | (pos[..., 0] > g.length_m + m)
           | (pos[..., 1] < -m) | (pos[..., 1] > g.width_m + m) | ~np.isfinite(pos).all(axis=-1))
    for r, c in zip(*np.nonzero(bad)):
        out.append(Diagnostic("OutOfBounds", frame=trace.start + int(r),
                              object_id=trace.roster[c].id))
    return out
