"""Kinematic and geometric features computed from a trace.

Derivatives use forward differences: the velocity at frame i describes the
motion from i to i+1, and the last frame repeats its predecessor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from .trace import Team, Trace

MOVING_SPEED = 0.5  # m/s


class WindowOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class KinematicSeries:
    velocity: np.ndarray      # (n, 2) m/s
    speed: np.ndarray         # (n,) m/s
    acceleration: np.ndarray  # (n,) m/s^2, derivative of speed
    direction: np.ndarray     # (n,) radians w.r.t. +x, nan when stationary


def smooth_positions(positions: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average along the frame axis; ``width <= 1`` is a no-op."""
    if width <= 1:
        return positions
    return uniform_filter1d(positions, size=int(width), axis=0, mode="nearest")


def forward_diff(values: np.ndarray, fps: float) -> np.ndarray:
    """Forward difference along axis 0, scaled by ``fps``, last row replicated."""
    out = np.empty_like(values, dtype=float)
    if len(values) < 2:
        out[...] = 0.0
        return out
    out[:-1] = (values[1:] - values[:-1]) * fps
    out[-1] = out[-2]
    return out


def velocities(positions: np.ndarray, fps: float) -> np.ndarray:
    return forward_diff(positions, fps)


def speeds(positions: np.ndarray, fps: float) -> np.ndarray:
    return np.linalg.norm(velocities(positions, fps), axis=-1)


def kinematics(trace: Trace, object_id: int, smooth: int = 1) -> KinematicSeries:
    pos = smooth_positions(trace.series(object_id), smooth)
    vel = velocities(pos, trace.fps)
    speed = np.hypot(vel[:, 0], vel[:, 1])
    accel = forward_diff(speed, trace.fps)
    with np.errstate(invalid="ignore"):
        direction = np.where(speed > 0, np.arctan2(vel[:, 1], vel[:, 0]), np.nan)
    return KinematicSeries(vel, speed, accel, direction)


def distance(trace: Trace, a: int, b: int, frame: int) -> float:
    pa, pb = trace.position(a, frame), trace.position(b, frame)
    return float(math.hypot(pa[0] - pb[0], pa[1] - pb[1]))


def moving(trace: Trace, object_id: int, frame: int, eps: float = MOVING_SPEED) -> bool:
    row = frame - trace.start
    return bool(kinematics(trace, object_id).speed[row] > eps)


def expected_cross_y(x: float, y: float, vx: float, vy: float, line_x: float) -> float | None:
    """y where the ray from (x, y) along (vx, vy) meets the line x = line_x."""
    dx = line_x - x
    if vx == 0 or dx * vx < 0:
        return None
    return y + vy * dx / vx


def target_line_features(trace: Trace, object_id: int, frame: int,
                         attacking_team: Team) -> tuple[float, float | None]:
    line_x = trace.geometry.target_line_x(attacking_team)
    x, y = trace.position(object_id, frame)
    row = frame - trace.start
    vel = kinematics(trace, object_id).velocity[row]
    return abs(x - line_x), expected_cross_y(x, y, vel[0], vel[1], line_x)


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    cos = float(np.dot(u, v) / (nu * nv))
    return math.acos(max(-1.0, min(1.0, cos)))


def change_of_direction(trace: Trace, object_id: int, frame: int, window: int) -> float:
    if window < 1 or frame < trace.start or frame + window > trace.end:
        raise WindowOutOfRange(f"window {window} at frame {frame} leaves the trace")
    vel = kinematics(trace, object_id).velocity
    row = frame - trace.start
    return angle_between(vel[row], vel[row + window])


def nearest_to_ball(trace: Trace, frame: int) -> tuple[int, float]:
    """Closest player to the ball; ties go to the lowest object id."""
    row = trace.positions[frame - trace.start]
    ball = row[trace.column(trace.ball.id)]
    best_id, best_d = -1, math.inf
    for i, o in enumerate(trace.roster):
        if o.is_ball:
            continue
        d = math.hypot(row[i, 0] - ball[0], row[i, 1] - ball[1])
        if d < best_d:
            best_id, best_d = o.id, d
    return best_id, best_d


@dataclass(frozen=True)
class FrameFeatures:
    """Whole-trace arrays used by the atomic rules.

    ``player_ids``/``teams`` index the player axis; distances are per frame.
    """
    frames: np.ndarray           # absolute frame indices
    player_ids: np.ndarray       # (P,)
    teams: np.ndarray            # (P,) 0 home, 1 away
    ball_pos: np.ndarray         # (F, 2)
    ball_dist: np.ndarray        # (F, P) player-ball distance
    opp_dist: np.ndarray         # (F, P) distance to nearest opponent
    opp_id: np.ndarray           # (F, P) column of that opponent
    nearest: np.ndarray          # (F,) column of nearest player to ball
    ball_speed: np.ndarray       # (F,)
    ball_accel: np.ndarray       # (F,)
    player_speed: np.ndarray     # (F, P)


def frame_features(trace: Trace, smooth: int = 1) -> FrameFeatures:
    pos = smooth_positions(trace.positions, smooth)
    ball_col = trace.column(trace.ball.id)
    cols = np.array([i for i, o in enumerate(trace.roster) if not o.is_ball])
    players = [trace.roster[i] for i in cols]
    teams = np.array([0 if o.team is Team.HOME else 1 for o in players])
    ball = pos[:, ball_col, :]
    ppos = pos[:, cols, :]
    ball_dist = np.hypot(ppos[..., 0] - ball[:, None, 0], ppos[..., 1] - ball[:, None, 1])
    n_frames, n_players = ball_dist.shape
    opp_dist = np.full((n_frames, n_players), np.inf)
    opp_id = np.zeros((n_frames, n_players), dtype=int)
    for team in (0, 1):
        mine = np.nonzero(teams == team)[0]
        theirs = np.nonzero(teams != team)[0]
        if len(theirs) == 0:
            continue
        diff = ppos[:, mine, None, :] - ppos[:, None, theirs, :]
        d = np.hypot(diff[..., 0], diff[..., 1])  # (F, |mine|, |theirs|)
        arg = np.argmin(d, axis=2)
        opp_dist[:, mine] = np.take_along_axis(d, arg[..., None], axis=2)[..., 0]
        opp_id[:, mine] = theirs[arg]
    ball_speed = speeds(ball, trace.fps)
    return FrameFeatures(
        frames=trace.frame_indices,
        player_ids=np.array([o.id for o in players]),
        teams=teams,
        ball_pos=ball,
        ball_dist=ball_dist,
        opp_dist=opp_dist,
        opp_id=opp_id,
        nearest=np.argmin(ball_dist, axis=1),
        ball_speed=ball_speed,
        ball_accel=forward_diff(ball_speed, trace.fps),
        player_speed=speeds(ppos, trace.fps),
    )
