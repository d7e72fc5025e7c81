"""Sliding-window threshold rules that turn positions into atomic events.

A rule anchored at frame ``t`` with window ``k`` looks only at frames
``t .. t+k``. Velocity-based clauses therefore stop at ``t+k-1`` (speed)
and ``t+k-2`` (acceleration), because forward differences reach one frame
ahead per derivative.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .features import FrameFeatures, frame_features, smooth_positions
from .trace import AtomicEvent, FieldGeometry, ObjectId, Team, Trace

RULES = ("KickingTheBall", "BallPossession", "Tackle", "BallDeflection")
SCORER_LOOKBACK = 150  # frames


@dataclass(frozen=True)
class RuleThresholds:
    inner_distance: float   # m, player-ball
    outer_distance: float   # m, player-opponent (possession, tackle)
    speed: float            # m/s, ball
    acceleration: float     # m/s^2, ball (kick, deflection)
    window: int             # frames


@dataclass(frozen=True)
class RuleParameterSet:
    kicking: RuleThresholds
    possession: RuleThresholds
    tackle: RuleThresholds
    deflection: RuleThresholds
    order: tuple[str, ...] = RULES
    smooth: int = 1
    possession_requires_moving: bool = False
    debounce: bool = True     # kick/deflection: one event per player per window

    def __post_init__(self):
        if sorted(self.order) != sorted(RULES):
            raise ValueError(f"evaluation order must be a permutation of {RULES}")
        for name in RULES:
            if self.rule(name).window < 1:
                raise ValueError("rule windows must be at least one frame")

    def rule(self, name: str) -> RuleThresholds:
        return {"KickingTheBall": self.kicking, "BallPossession": self.possession,
                "Tackle": self.tackle, "BallDeflection": self.deflection}[name]

    @property
    def max_window(self) -> int:
        return max(self.rule(n).window for n in RULES)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["order"] = list(self.order)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "RuleParameterSet":
        kw = dict(d)
        for name in ("kicking", "possession", "tackle", "deflection"):
            r = dict(kw[name])
            r["window"] = int(r["window"])
            kw[name] = RuleThresholds(**r)
        kw["order"] = tuple(kw.get("order", RULES))
        return cls(**kw)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RuleParameterSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


# Thresholds for which the noise-free generated scenarios are unambiguous.
REFERENCE_PARAMS = RuleParameterSet(
    kicking=RuleThresholds(1.0, 1.5, 5.0, 10.0, 5),
    possession=RuleThresholds(1.0, 1.5, 5.0, 10.0, 5),
    tackle=RuleThresholds(1.0, 1.5, 5.0, 10.0, 5),
    deflection=RuleThresholds(1.0, 1.5, 5.0, 20.0, 5),
)


def _windows(n_valid: int, k: int) -> np.ndarray:
    return np.arange(n_valid)[:, None] + np.arange(k + 1)[None, :]


@dataclass
class _Hits:
    rows: np.ndarray
    anchor: np.ndarray            # player column
    other: np.ndarray | None = None


def rule_kicking(f: FrameFeatures, r: RuleThresholds, rows: np.ndarray) -> _Hits:
    return _departure_rule(f, r, rows, accelerating=True)


def rule_deflection(f: FrameFeatures, r: RuleThresholds, rows: np.ndarray) -> _Hits:
    return _departure_rule(f, r, rows, accelerating=False)


def _departure_rule(f, r, rows, accelerating):
    # ball starts close to the nearest player, moves steadily away, ends fast,
    # and sees a sharp speed change somewhere inside the window
    k = r.window
    rows = rows[rows + k < len(f.frames)]
    if k < 2 or len(rows) == 0:
        return _Hits(rows[:0], rows[:0])
    idx = rows[:, None] + np.arange(k + 1)
    anchor = f.nearest[rows]
    d = f.ball_dist[idx, anchor[:, None]]
    ok = d[:, 0] < r.inner_distance
    ok &= np.all(d[:, 1:k] < d[:, 2:k + 1], axis=1)
    if accelerating:
        ok &= f.ball_speed[rows + k - 1] > r.speed
        ok &= np.any(f.ball_accel[idx[:, :k - 1]] > r.acceleration, axis=1)
    else:
        ok &= f.ball_speed[rows + k - 1] > r.speed
        ok &= np.any(f.ball_accel[idx[:, :k - 1]] < -r.acceleration, axis=1)
    return _Hits(rows[ok], anchor[ok])


def rule_possession(f: FrameFeatures, r: RuleThresholds, rows: np.ndarray,
                    requires_moving: bool = False) -> _Hits:
    ok, rows, anchor, idx = _control(f, r, rows)
    if len(rows) == 0:
        return _Hits(rows, anchor)
    ok &= np.all(f.opp_dist[idx, anchor[:, None]] >= r.outer_distance, axis=1)
    if requires_moving:
        ok &= f.player_speed[rows, anchor] > 0.5
    return _Hits(rows[ok], anchor[ok])


def rule_tackle(f: FrameFeatures, r: RuleThresholds, rows: np.ndarray) -> _Hits:
    ok, rows, anchor, idx = _control(f, r, rows)
    if len(rows) == 0:
        return _Hits(rows, anchor, anchor)
    ok &= np.all(f.opp_dist[idx, anchor[:, None]] < r.outer_distance, axis=1)
    return _Hits(rows[ok], anchor[ok], f.opp_id[rows[ok], anchor[ok]])


def _control(f, r, rows):
    # nearest player keeps the ball within reach for the whole window,
    # and the ball stays slow
    k = r.window
    rows = rows[rows + k < len(f.frames)]
    idx = rows[:, None] + np.arange(k + 1)
    anchor = f.nearest[rows]
    d = f.ball_dist[idx, anchor[:, None]]
    ok = np.all(d < r.inner_distance, axis=1)
    if k >= 1:
        ok &= np.all(f.ball_speed[idx[:, :k]] < r.speed, axis=1)
    return ok, rows, anchor, idx


def _segment_exit(p0, p1, geometry: FieldGeometry) -> tuple[str, float]:
    """Which boundary the segment p0->p1 leaves the pitch through.

    Returns ("goal_line", y_at_crossing) or ("other", nan).
    """
    (x0, y0), (x1, y1) = p0, p1
    best_s, kind, ycross = np.inf, "other", np.nan
    L, W = geometry.length_m, geometry.width_m
    dx, dy = x1 - x0, y1 - y0
    for line, is_x in ((0.0, True), (L, True), (0.0, False), (W, False)):
        delta = dx if is_x else dy
        start = x0 if is_x else y0
        end = x1 if is_x else y1
        outside_after = (end < line) if line == 0.0 else (end > line)
        if delta == 0 or not outside_after:
            continue
        s = (line - start) / delta
        if 0.0 <= s <= 1.0 and s < best_s:
            best_s = s
            if is_x:
                kind, ycross = "goal_line", y0 + s * dy
            else:
                kind, ycross = "other", np.nan
    return kind, ycross


def ball_exits(trace_positions: np.ndarray, frames: np.ndarray,
               geometry: FieldGeometry) -> list[tuple[int, str, float, float]]:
    """Frames where the ball goes from inside the pitch to outside.

    ``trace_positions`` is the ``(F, 2)`` ball path; the first row is context
    only. Each hit is ``(frame, "goal" | "out", x, y)``.
    """
    L, W = geometry.length_m, geometry.width_m
    x, y = trace_positions[:, 0], trace_positions[:, 1]
    inside = (x >= 0) & (x <= L) & (y >= 0) & (y <= W)
    lo, hi = geometry.posts
    hits = []
    for i in np.nonzero(inside[:-1] & ~inside[1:])[0] + 1:
        kind, yc = _segment_exit(trace_positions[i - 1], trace_positions[i], geometry)
        scored = kind == "goal_line" and lo < yc < hi
        hits.append((int(frames[i]), "goal" if scored else "out", float(x[i]), float(y[i])))
    return hits


class AtomicDetector:
    """Incremental atomic detector with bounded look-ahead.

    Feed contiguous trace chunks; events are emitted once every frame their
    rules can look at has arrived. ``finish`` flushes the tail.
    """

    def __init__(self, params: RuleParameterSet, *, keep_snapshots: bool = False):
        self.params = params
        self.lookahead = params.max_window + max(params.smooth, 1) + 1
        self.lookback = max(params.smooth, 1) + 1 + (params.max_window if params.debounce else 0)
        self.keep_snapshots = keep_snapshots
        self.snapshots: dict[int, np.ndarray] = {}
        self._buf: np.ndarray | None = None
        self._buf_start = 0
        self._front: int | None = None   # first frame not yet finalized
        self._roster: tuple[ObjectId, ...] | None = None
        self._fps = 30.0
        self._geometry = FieldGeometry()
        self._recent_kicks: deque[tuple[int, int, Team]] = deque()
        self._team_of: dict[int, Team] = {}
        self._ball_id = 0

    # -- streaming interface ------------------------------------------------
    def feed(self, chunk: Trace) -> list[AtomicEvent]:
        if self._buf is None:
            self._roster = chunk.roster
            self._fps = chunk.fps
            self._geometry = chunk.geometry
            self._buf = chunk.positions.copy()
            self._buf_start = chunk.start
            self._front = chunk.start
            self._team_of = {o.id: o.team for o in chunk.roster}
            self._ball_id = chunk.ball.id
        else:
            if chunk.start != self._buf_start + len(self._buf):
                raise ValueError("chunks must be contiguous")
            self._buf = np.concatenate([self._buf, chunk.positions])
        last = self._buf_start + len(self._buf) - 1
        return self._process(last - self.lookahead)

    def finish(self) -> list[AtomicEvent]:
        if self._buf is None:
            return []
        return self._process(self._buf_start + len(self._buf) - 1)

    # -- core ---------------------------------------------------------------
    def _process(self, limit: int) -> list[AtomicEvent]:
        if self._front is None or limit < self._front:
            return []
        buf_trace = Trace(self._buf, self._roster, fps=self._fps,
                          start=self._buf_start, geometry=self._geometry)
        events = detect_range(buf_trace, self.params, self._front, limit,
                              self._recent_kicks)
        if self.keep_snapshots:
            smoothed = smooth_positions(buf_trace.positions, self.params.smooth)
            want = set()
            for e in events:
                want.update((e.t, e.t + 1, e.t + 2))
            for fr in want:
                r = fr - self._buf_start
                if 0 <= r < len(smoothed):
                    self.snapshots.setdefault(fr, smoothed[r].astype(np.float32))
        self._front = limit + 1
        keep_from = self._front - self.lookback - 2
        drop = keep_from - self._buf_start
        if drop > 0:
            self._buf = self._buf[drop:]
            self._buf_start += drop
        horizon = self._front - SCORER_LOOKBACK - 1
        while self._recent_kicks and self._recent_kicks[0][0] < horizon:
            self._recent_kicks.popleft()
        return events


def _departures(rule, f, r: RuleThresholds, lo: int, hi: int, debounce: bool) -> _Hits:
    if not debounce:
        return rule(f, r, np.arange(lo, hi + 1))
    # a kick keeps satisfying the clauses for a few frames once positions are
    # smoothed; only the first hit per player within a window counts
    h = rule(f, r, np.arange(max(lo - r.window, 0), hi + 1))
    keep = np.ones(len(h.rows), bool)
    last: dict[int, int] = {}
    for i, (row, a) in enumerate(zip(h.rows.tolist(), h.anchor.tolist())):
        prev = last.get(a)
        keep[i] = prev is None or row - prev > r.window
        last[a] = row
    keep &= h.rows >= lo
    return _Hits(h.rows[keep], h.anchor[keep])


def detect_range(trace: Trace, params: RuleParameterSet, first: int, last: int,
                 recent_kicks: deque | None = None,
                 features: FrameFeatures | None = None) -> list[AtomicEvent]:
    """Events anchored at frames ``first..last`` using whatever context ``trace`` holds.

    ``features`` may carry a precomputed ``frame_features(trace, params.smooth)``.
    """
    recent_kicks = deque() if recent_kicks is None else recent_kicks
    f = features if features is not None else frame_features(trace, params.smooth)
    lo = max(first, trace.start) - trace.start
    hi = min(last, trace.end) - trace.start
    if hi < lo:
        return []
    rows = np.arange(lo, hi + 1)
    pid = f.player_ids
    ball_id = trace.ball.id
    fired: dict[str, _Hits] = {
        "KickingTheBall": _departures(rule_kicking, f, params.kicking, lo, hi, params.debounce),
        "BallPossession": rule_possession(f, params.possession, rows,
                                          params.possession_requires_moving),
        "Tackle": rule_tackle(f, params.tackle, rows),
        "BallDeflection": _departures(rule_deflection, f, params.deflection, lo, hi,
                                      params.debounce),
    }
    # BallPossession and Tackle share the nearest-player anchor: the rule
    # evaluated first wins that frame.
    pos_rank = params.order.index("BallPossession")
    tck_rank = params.order.index("Tackle")
    loser = "Tackle" if pos_rank < tck_rank else "BallPossession"
    winner = "BallPossession" if loser == "Tackle" else "Tackle"
    win_rows = fired[winner].rows
    keep = ~np.isin(fired[loser].rows, win_rows)
    h = fired[loser]
    fired[loser] = _Hits(h.rows[keep], h.anchor[keep],
                         None if h.other is None else h.other[keep])

    events: list[AtomicEvent] = []
    base = trace.start
    for name in params.order:
        h = fired[name]
        for i, row in enumerate(h.rows):
            t = base + int(row)
            p = int(pid[h.anchor[i]])
            if name == "KickingTheBall":
                roles = {"KickingPlayer": p, "KickedObject": ball_id}
            elif name == "BallPossession":
                roles = {"PossessingPlayer": p, "PossessedObject": ball_id}
            elif name == "Tackle":
                roles = {"PossessingPlayer": p, "TacklingPlayer": int(pid[h.other[i]]),
                         "PossessedObject": ball_id}
            else:
                roles = {"DeflectingPlayer": p, "DeflectedObject": ball_id}
            events.append(AtomicEvent.make(name, t, roles))

    teams = {o.id: o.team for o in trace.roster}
    kicks = sorted((e.t, e.roles["KickingPlayer"]) for e in events
                   if e.event_type == "KickingTheBall")
    kick_iter = iter(kicks)
    pending = next(kick_iter, None)
    ball_path = f.ball_pos
    ctx_lo = max(lo - 1, 0)
    for t, kind, x, y in ball_exits(ball_path[ctx_lo:hi + 1], f.frames[ctx_lo:hi + 1],
                                    trace.geometry):
        if t < base + lo:
            continue
        while pending is not None and pending[0] <= t:
            recent_kicks.append((pending[0], pending[1], teams[pending[1]]))
            pending = next(kick_iter, None)
        if kind == "out":
            events.append(AtomicEvent.make("BallOut", t, {"Ball": ball_id}))
            continue
        attacking = Team.HOME if x > trace.geometry.length_m / 2 else Team.AWAY
        roles = {"Ball": ball_id}
        for kt, kp, kteam in reversed(recent_kicks):
            if kt < t - SCORER_LOOKBACK:
                break
            if kteam is attacking:
                roles["Scorer"] = kp
                break
        events.append(AtomicEvent.make("Goal", t, roles))
    while pending is not None:
        recent_kicks.append((pending[0], pending[1], teams[pending[1]]))
        pending = next(kick_iter, None)
    events.sort(key=lambda e: (e.t, e.event_type))
    return events


def detect_atomic(trace: Trace, params: RuleParameterSet = REFERENCE_PARAMS,
                  features: FrameFeatures | None = None) -> list[AtomicEvent]:
    return detect_range(trace, params, trace.start, trace.end, features=features)


def detect_atomic_stream(chunks: Iterable[Trace], params: RuleParameterSet,
                         keep_snapshots: bool = False) -> tuple[list[AtomicEvent], AtomicDetector]:
    det = AtomicDetector(params, keep_snapshots=keep_snapshots)
    out: list[AtomicEvent] = []
    for chunk in chunks:
        out.extend(det.feed(chunk))
    out.extend(det.finish())
    return out, det
