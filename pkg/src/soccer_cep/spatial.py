"""Positional lookups and zone predicates used by complex-event rules."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .features import expected_cross_y
from .trace import FieldGeometry, ObjectId, Team, Trace

TEAM_ZONES = ("goal_area", "attacking_third")
ABSOLUTE_ZONES = ("sideline_band", "behind_goal_line", "out_of_pitch")
ZONES = TEAM_ZONES + ABSOLUTE_ZONES


class SpatialContext:
    """Positions available to complex rules.

    Backed either by a full trace or by per-frame snapshots kept by the
    streaming detector; frames without data answer ``None``.
    """

    def __init__(self, roster: Sequence[ObjectId], frames: Mapping[int, np.ndarray],
                 fps: float = 30.0, geometry: FieldGeometry | None = None):
        self.roster = tuple(sorted(roster))
        self._col = {o.id: i for i, o in enumerate(self.roster)}
        self._frames = frames
        self.fps = fps
        self.geometry = geometry or FieldGeometry()

    @classmethod
    def from_trace(cls, trace: Trace) -> "SpatialContext":
        return _TraceContext(trace)

    def object(self, object_id: int) -> ObjectId:
        return self.roster[self._col[object_id]]

    def team(self, object_id: int) -> Team:
        return self.object(object_id).team

    def is_goalkeeper(self, object_id: int) -> bool:
        return self.object(object_id).is_goalkeeper

    def _row(self, frame: int) -> np.ndarray | None:
        return self._frames.get(int(frame))

    def position(self, object_id: int, frame: int) -> np.ndarray | None:
        row = self._row(frame)
        if row is None:
            return None
        return np.asarray(row[self._col[object_id]], dtype=float)

    def velocity(self, object_id: int, frame: int) -> np.ndarray | None:
        a, b = self.position(object_id, frame), self.position(object_id, frame + 1)
        if a is None or b is None:
            return None
        return (b - a) * self.fps

    @property
    def ball_id(self) -> int:
        return next(o.id for o in self.roster if o.is_ball)


class _TraceContext(SpatialContext):
    def __init__(self, trace: Trace):
        super().__init__(trace.roster, {}, trace.fps, trace.geometry)
        self.trace = trace

    def _row(self, frame: int):
        r = int(frame) - self.trace.start
        if 0 <= r < len(self.trace):
            return self.trace.positions[r]
        return None


def in_zone(ctx: SpatialContext, object_id: int, zone: str, frame: int) -> bool:
    p = ctx.position(object_id, frame)
    if p is None:
        return False
    g = ctx.geometry
    x, y = float(p[0]), float(p[1])
    if zone == "sideline_band":
        return 0.0 <= y <= g.sideline_band_m or g.width_m - g.sideline_band_m <= y <= g.width_m
    if zone == "behind_goal_line":
        return x < 0.0 or x > g.length_m
    if zone == "out_of_pitch":
        return not g.in_pitch(x, y)
    team = ctx.team(object_id)
    if team is Team.NONE:
        raise ValueError(f"zone {zone!r} needs a player")
    line = g.target_line_x(team)
    depth = abs(x - line)
    if zone == "attacking_third":
        return depth <= g.length_m / 3
    if zone == "goal_area":
        half = g.goal_mouth_width_m / 2 + g.goal_area_depth_m
        return depth <= g.goal_area_depth_m and abs(y - g.width_m / 2) <= half
    raise ValueError(f"unknown zone {zone!r}")


def beyond_defence_line(ctx: SpatialContext, player: int, frame: int) -> bool:
    """Player is nearer the goal it attacks than every outfield opponent."""
    p = ctx.position(player, frame)
    if p is None:
        return False
    team = ctx.team(player)
    gx, gy = ctx.geometry.goal_center(team)
    mine = math.hypot(p[0] - gx, p[1] - gy)
    for o in ctx.roster:
        if o.is_ball or o.team is team or o.is_goalkeeper:
            continue
        q = ctx.position(o.id, frame)
        if math.hypot(q[0] - gx, q[1] - gy) <= mine:
            return False
    return True


def on_target(ctx: SpatialContext, kicker: int, frame: int) -> bool:
    """The ball's path just after a kick at ``frame`` meets the goal mouth."""
    ball = ctx.ball_id
    p = ctx.position(ball, frame + 1)
    v = ctx.velocity(ball, frame + 1)
    if p is None or v is None:
        return False
    line = ctx.geometry.target_line_x(ctx.team(kicker))
    y = expected_cross_y(p[0], p[1], v[0], v[1], line)
    if y is None:
        return False
    lo, hi = ctx.geometry.posts
    return lo < y < hi
