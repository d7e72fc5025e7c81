"""Kinematic synthesis of positional traces with exact event ground truth.

Every scenario is scripted for the home team attacking ``x = length`` and
mirrored when the away team attacks. The ball is either at a player's foot,
in free flight with linear friction (speed ``max(0, v0 - mu*t)``) or at rest.
Ground truth atoms follow from the scripted control phases and contacts
evaluated at the reference thresholds; complex truth is declared by the
script and checked against the spatial predicates before it is returned.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .atomic import REFERENCE_PARAMS
from .spatial import SpatialContext, beyond_defence_line, in_zone, on_target
from .trace import (AtomicEvent, EventLog, FieldGeometry, IntervalEvent, ObjectClass,
                    ObjectId, Team, Trace)

FPS = 30.0
BALL = 0
HOME_GK, AWAY_GK = 1, 12
FOOT = 0.3            # m, ball offset while controlled
CONTACT = 0.2         # m, deflector offset at contact
ENGAGED = REFERENCE_PARAMS.tackle.outer_distance
WINDOW = REFERENCE_PARAMS.possession.window
CLEARANCE = 5.0       # m, bystanders keep away from the action
MERGE_GAP = 5
SCORER_LOOKBACK = 150
DECIMALS = 3          # CSV precision
SETTLE = 4            # frames a kicker stands still before striking
LEAD_IN = 35          # stationary frames at both ends of a scenario
# longest span the builtin rules accept, with a small safety margin
RULE_SPAN = {"Pass": 85, "Cross": 85, "FilteringPass": 85, "Tackle": 55,
             "PassThenGoal": 230, "ShotOut": 85, "ShotThenGoal": 85, "SavedShot": 55}

KINDS = ("Dribble", "Pass", "Cross", "FilteringPass", "PassThenGoal", "CrossThenGoal",
         "FilteringPassThenGoal", "Shot", "Tackle", "Clearance")
OUTCOMES = {"Shot": ("Goal", "Out", "Saved"), "Tackle": ("won", "lost")}


class InfeasibleScript(ValueError):
    pass


class OverlappingScenarios(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """One scripted play.

    ``placements`` maps actor roles (kicker, receiver, shooter, dribbler,
    possessor, tackler) to canonical positions, i.e. for the home team
    attacking ``x = 105``; unspecified actors are sampled from ``seed``.
    """
    kind: str
    outcome: str | None = None
    attacking: str = "home"
    v0: float | None = None          # m/s, first kick
    shot_v0: float | None = None     # m/s, finishing shot of chained plays
    mu: float = 3.0                  # m/s^2
    save: str = "parry"              # Saved shots: parry | catch
    placements: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        allowed = OUTCOMES.get(self.kind)
        if allowed is None and self.outcome is not None:
            raise ValueError(f"{self.kind} takes no outcome")
        if allowed is not None and self.outcome not in allowed:
            raise ValueError(f"{self.kind} outcome must be one of {allowed}")
        if self.attacking not in ("home", "away"):
            raise ValueError("attacking must be 'home' or 'away'")
        for v in (self.v0, self.shot_v0):
            if v is not None and not 6.0 <= v <= 30.0:
                raise ValueError("kick speed must lie in [6, 30] m/s")
        if not 1.0 <= self.mu <= 6.0:
            raise ValueError("friction must lie in [1, 6] m/s^2")
        if self.save not in ("parry", "catch"):
            raise ValueError("save must be 'parry' or 'catch'")
        g = FieldGeometry()
        for role, (x, y) in self.placements.items():
            if not g.in_pitch(x, y):
                raise ValueError(f"placement {role!r} lies outside the pitch")
        object.__setattr__(self, "placements",
                           {k: (float(v[0]), float(v[1])) for k, v in self.placements.items()})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["placements"] = {k: list(v) for k, v in self.placements.items()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioSpec":
        d = dict(d)
        d.pop("offset", None)
        d["placements"] = {k: tuple(v) for k, v in d.get("placements", {}).items()}
        return cls(**d)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0      # m, Gaussian jitter per frame per object
    dropout: float = 0.0    # probability a row is lost and interpolated

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0.0 <= self.dropout <= 0.05:
            raise ValueError("dropout must lie in [0, 0.05]")


def roster() -> tuple[ObjectId, ...]:
    objs = [ObjectId(BALL, ObjectClass.BALL, Team.NONE, False)]
    objs += [ObjectId(i, ObjectClass.PLAYER, Team.HOME, i == HOME_GK) for i in range(1, 12)]
    objs += [ObjectId(i, ObjectClass.PLAYER, Team.AWAY, i == AWAY_GK) for i in range(12, 23)]
    return tuple(objs)


ROSTER = roster()
N_OBJ = len(ROSTER)

# canonical shape (home attacks +x); outfield order matches ids 2..11 / 13..22
_HOME_SHAPE = [(5, 34), (25, 10), (22, 26), (22, 42), (25, 58), (45, 14), (42, 34),
               (45, 54), (62, 18), (65, 34), (62, 50)]
_AWAY_SHAPE = [(100, 34), (88, 10), (91, 26), (91, 42), (88, 58), (72, 14), (75, 34),
               (72, 54), (58, 20), (55, 34), (58, 48)]
FORMATION = {i + 1: np.array(p, float) for i, p in enumerate(_HOME_SHAPE)}
FORMATION.update({i + 12: np.array(p, float) for i, p in enumerate(_AWAY_SHAPE)})


def team_of(pid: int) -> Team:
    return ROSTER[pid].team


def mirror_id(pid: int) -> int:
    if pid == BALL:
        return BALL
    return pid + 11 if pid <= 11 else pid - 11


# -- kinematics -------------------------------------------------------------

def travel(v0: float, mu: float, tau: np.ndarray | float) -> np.ndarray:
    """Distance covered after ``tau`` seconds under linear friction."""
    t = np.minimum(np.asarray(tau, float), v0 / mu)
    return v0 * t - 0.5 * mu * t * t


def ball_speed(v0: float, mu: float, tau: np.ndarray | float) -> np.ndarray:
    return np.maximum(0.0, v0 - mu * np.asarray(tau, float))


def ball_range(v0: float, mu: float) -> float:
    return v0 * v0 / (2 * mu)


def arrival_time(v0: float, mu: float, dist: float) -> float:
    """Seconds until the ball has covered ``dist``; raises if it stops short."""
    disc = v0 * v0 - 2 * mu * dist
    if disc <= 0:
        raise InfeasibleScript(f"ball stops after {ball_range(v0, mu):.2f} m, "
                               f"{dist:.2f} m needed")
    return (v0 - math.sqrt(disc)) / mu


def _unit(v) -> np.ndarray:
    v = np.asarray(v, float)
    n = np.linalg.norm(v)
    if n == 0:
        raise InfeasibleScript("degenerate direction")
    return v / n


# -- script builder ---------------------------------------------------------

@dataclass
class _Phase:
    player: int
    first: int
    last: int


@dataclass
class _Declared:
    event_type: str
    start: int
    end: int
    roles: dict


class _Script:
    """Frame-by-frame construction of one canonical scenario."""

    def __init__(self, spec: ScenarioSpec, geometry: FieldGeometry):
        self.spec = spec
        self.g = geometry
        self.keys: dict[int, list[tuple[int, np.ndarray]]] = {}
        self.ball: list[np.ndarray] = []
        self.phases: list[_Phase] = []
        self.kicks: list[tuple[int, int]] = []          # (event frame, player)
        self.deflections: list[tuple[int, int]] = []
        self.declared: list[_Declared] = []
        self.path: list[np.ndarray] = []                # ball points bystanders avoid
        self.passes: list[tuple[int, int, int, str]] = []  # kick frame, kicker, receiver, kind
        self.shots: set[int] = set()                   # kick frames meant to be on target

    # players ---------------------------------------------------------------
    def place(self, pid: int, pos):
        self.keys[pid] = [(0, np.asarray(pos, float))]

    def move(self, pid: int, to, start: int, end: int):
        """Constant-velocity run from wherever ``pid`` is at ``start`` to ``to``."""
        here = self.pos(pid, start)
        self.keys[pid] = [k for k in self.keys[pid] if k[0] < start]
        self.keys[pid] += [(start, here), (end, np.asarray(to, float))]

    def pos(self, pid: int, frame: int) -> np.ndarray:
        ks = self.keys[pid]
        for (f0, p0), (f1, p1) in zip(ks, ks[1:]):
            if f0 <= frame < f1:
                return p0 + (frame - f0) / (f1 - f0) * (p1 - p0)
        return ks[-1][1] if frame >= ks[-1][0] else ks[0][1]

    # ball ------------------------------------------------------------------
    @property
    def now(self) -> int:
        return len(self.ball)

    def control(self, pid: int, side, frames: int):
        """Ball at ``pid``'s foot on ``side`` for ``frames`` frames."""
        side = _unit(side)
        first = self.now
        for f in range(first, first + frames):
            self.ball.append(self.pos(pid, f) + FOOT * side)
        last = self.phases[-1] if self.phases else None
        if last is not None and last.player == pid and last.last == first - 1:
            last.last = self.now - 1
        else:
            self.phases.append(_Phase(pid, first, self.now - 1))

    def rest(self, frames: int):
        self.ball.extend(self.ball[-1].copy() for _ in range(frames))

    def strike(self, pid: int) -> int:
        """Register a kick leaving the foot after the current last frame."""
        t = self.now - 2
        self.kicks.append((t, pid))
        return t

    def _step(self, start, u, v0, mu, n) -> np.ndarray:
        return start + float(travel(v0, mu, n / FPS)) * u

    def fly_to(self, point, v0: float, mu: float):
        """Flight that ends with the ball arriving at ``point`` on the next frame.

        The last kinematic frame lies at least ``CONTACT`` short of the point,
        so the arrival step is always a fast one.
        """
        start = self.ball[-1].copy()
        point = np.asarray(point, float)
        dist = float(np.linalg.norm(point - start))
        u = _unit(point - start)
        arrival_time(v0, mu, dist)
        n = 1
        while float(travel(v0, mu, n / FPS)) < dist - CONTACT:
            p = self._step(start, u, v0, mu, n)
            self.ball.append(p)
            self.path.append(p)
            n += 1
            if ball_speed(v0, mu, n / FPS) <= 0:
                raise InfeasibleScript("ball comes to rest before reaching its target")
        self.path.append(point)

    def fly_contact(self, direction, v0: float, mu: float, dist: float) -> tuple[int, np.ndarray]:
        """Kinematic flight up to the first frame at or past ``dist``; returns that frame."""
        start = self.ball[-1].copy()
        u = _unit(direction)
        arrival_time(v0, mu, dist)
        n = 0
        while True:
            n += 1
            s = float(travel(v0, mu, n / FPS))
            p = start + s * u
            self.ball.append(p)
            self.path.append(p)
            if s >= dist:
                return self.now - 1, p

    def fly_free(self, direction, v0: float, mu: float, beyond: float = 1.5) -> int:
        """Flight until rest; a ball leaving the pitch is held ``beyond`` metres out."""
        start = self.ball[-1].copy()
        u = _unit(direction)
        limit = self._limit(start, u, beyond)
        n = 0
        while True:
            n += 1
            s = float(travel(v0, mu, n / FPS))
            stop = limit is not None and s >= limit
            p = start + (limit if stop else s) * u
            self.ball.append(p)
            self.path.append(p)
            if stop or ball_speed(v0, mu, n / FPS) <= 0:
                return self.now - 1

    def _limit(self, start, u, beyond):
        best = None
        for axis, line in ((0, 0.0), (0, self.g.length_m), (1, 0.0), (1, self.g.width_m)):
            if u[axis] == 0:
                continue
            to_line = (line - start[axis]) / u[axis]
            if to_line > 0:
                lim = to_line + beyond / abs(u[axis])
                best = lim if best is None else min(best, lim)
        return best

    def turn(self, pid: int, side_from, side_to, frames: int):
        """Roll the ball around the foot, keeping it within reach and slow."""
        a, b = _unit(side_from), _unit(side_to)
        first = self.now
        for i in range(1, frames + 1):
            w = a + (b - a) * i / frames
            self.ball.append(self.pos(pid, first + i - 1) + FOOT * w)
        self.phases[-1].last = self.now - 1

    def declare(self, event_type: str, start, end, roles: dict):
        self.declared.append(_Declared(event_type, start, end, dict(roles)))


# -- canonical plays --------------------------------------------------------

HOME_OUTFIELD = tuple(range(2, 12))
AWAY_OUTFIELD = tuple(range(13, 23))
HOLD = LEAD_IN
RECEIVE_HOLD = 12     # frames a receiver keeps the ball before turning to shoot
TURN = 8


def _pick(rng, pool, exclude=()) -> int:
    return int(rng.choice([p for p in pool if p not in exclude]))


def _where(spec: ScenarioSpec, role: str, rng, lo, hi) -> np.ndarray:
    if role in spec.placements:
        return np.array(spec.placements[role], float)
    return np.array([rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1])])


def _goal_distance(g: FieldGeometry, p) -> float:
    return math.hypot(p[0] - g.length_m, p[1] - g.width_m / 2)


def _pass(sc: _Script, kicker: int, kpos, receiver: int, rpos, v0: float, kind: str) -> int:
    """Kicker strikes after the lead-in; receiver traps and keeps the ball."""
    mu = sc.spec.mu
    if np.linalg.norm(rpos - kpos) < 8.0:
        raise InfeasibleScript("pass shorter than 8 m")
    u = _unit(rpos - kpos)
    sc.place(kicker, kpos)
    sc.place(receiver, rpos)
    if sc.now == 0:
        sc.control(kicker, u, LEAD_IN)
    t = sc.strike(kicker)
    sc.fly_to(rpos - FOOT * u, v0, mu)
    sc.control(receiver, -u, RECEIVE_HOLD)
    sc.passes.append((t, kicker, receiver, kind))
    sc.declare("Pass", t, ("possession", receiver, t),
               {"KickingPlayer": kicker, "ReceivingPlayer": receiver})
    if kind != "Pass":
        sc.declare(kind, t, ("possession", receiver, t),
                   {"KickingPlayer": kicker, "ReceivingPlayer": receiver})
    return t


def _shoot(sc: _Script, shooter: int, aim, v0: float) -> tuple[int, np.ndarray]:
    """Turn (if already holding), settle and strike toward ``aim``."""
    here = sc.pos(shooter, sc.now)
    u = _unit(np.asarray(aim) - here)
    if sc.phases and sc.phases[-1].player == shooter and sc.phases[-1].last == sc.now - 1:
        side = sc.ball[-1] - here
        sc.turn(shooter, side, u, TURN)
        sc.control(shooter, u, SETTLE)
    else:
        sc.place(shooter, here)
        sc.control(shooter, u, LEAD_IN)
    t = sc.strike(shooter)
    sc.shots.add(t)
    return t, u


def _aim_in(rng, g: FieldGeometry) -> np.ndarray:
    lo, hi = g.posts
    return np.array([g.length_m, rng.uniform(lo + 1.0, hi - 1.0)])


def _finish_goal(sc: _Script, shooter: int, v0: float, rng, chain_from: int | None):
    aim = _aim_in(rng, sc.g)
    t, u = _shoot(sc, shooter, aim, v0)
    sc.fly_free(u, v0, sc.spec.mu)
    sc.rest(HOLD)
    sc.declare("Shot", t, t, {"KickingPlayer": shooter})
    sc.declare("ShotThenGoal", t, ("goal",), {"KickingPlayer": shooter, "Scorer": shooter})
    return t


def _pass_play(sc: _Script, rng, kind: str, then_goal: bool):
    g, spec = sc.g, sc.spec
    kicker = _pick(rng, HOME_OUTFIELD)
    receiver = _pick(rng, HOME_OUTFIELD, (kicker,))
    placed = {"kicker", "receiver"} <= set(spec.placements)
    for _ in range(20):
        kpos, rpos = _pass_spots(spec, rng, g, kind, then_goal)
        if placed or not _ray_on_target(kpos, rpos, g, margin=1.0):
            break
    else:
        raise InfeasibleScript("every sampled pass points at the goal mouth")
    dist = float(np.linalg.norm(rpos - kpos))
    v0 = spec.v0 if spec.v0 is not None else float(
        min(30.0, math.sqrt(rng.uniform(10.0, 14.0) ** 2 + 2 * spec.mu * dist)))
    t = _pass(sc, kicker, kpos, receiver, rpos, v0, kind)
    if _ray_on_target(kpos, rpos, g):
        # a placed pass along the goal axis is also a shot for the detectors
        sc.shots.add(t)
        sc.declare("Shot", t, t, {"KickingPlayer": kicker})
    sc.cover_intent = (receiver, kind == "FilteringPass")
    if then_goal:
        sv0 = spec.shot_v0 if spec.shot_v0 is not None else float(rng.uniform(18, 24))
        shot = _finish_goal(sc, receiver, sv0, rng, None)
        roles = {"KickingPlayer": kicker, "ReceivingPlayer": receiver, "Scorer": receiver}
        sc.declare("PassThenGoal", sc.passes[0][0], ("goal",), roles)
        if kind != "Pass":
            sc.declare(kind + "ThenGoal", sc.passes[0][0], ("goal",), roles)
    else:
        sc.control(receiver, sc.ball[-1] - sc.pos(receiver, sc.now), HOLD)


def _pass_spots(spec, rng, g, kind, then_goal):
    if kind == "Cross":
        band = rng.uniform(2.0, g.sideline_band_m - 2.0)
        y = band if rng.random() < 0.5 else g.width_m - band
        return (_where(spec, "kicker", rng, (74, y), (92, y)),
                _where(spec, "receiver", rng, (91, 22), (99, 46)))
    if kind == "FilteringPass":
        return (_where(spec, "kicker", rng, (50, 12), (66, 56)),
                _where(spec, "receiver", rng, (86, 18), (94, 50)))
    if then_goal:
        return (_where(spec, "kicker", rng, (55, 18), (72, 50)),
                _where(spec, "receiver", rng, (80, 20), (88, 48)))
    kpos = _where(spec, "kicker", rng, (25, 8), (70, 60))
    if "receiver" in spec.placements:
        return kpos, np.array(spec.placements["receiver"], float)
    ang = rng.uniform(0, 2 * math.pi)
    return kpos, kpos + rng.uniform(10, 22) * np.array([math.cos(ang), math.sin(ang)])


def _ray_on_target(a, b, g: FieldGeometry, margin: float = 0.0) -> bool:
    lo, hi = g.posts
    d = b - a
    if d[0] <= 0:
        return False
    y = a[1] + d[1] * (g.length_m - a[0]) / d[0]
    return lo - margin < y < hi + margin


def _shot_play(sc: _Script, rng):
    g, spec = sc.g, sc.spec
    mu = spec.mu
    shooter = _pick(rng, HOME_OUTFIELD)
    spos = _where(spec, "shooter", rng, (78, 18), (92, 50))
    sc.place(shooter, spos)
    lo_v, hi_v = (18, 23) if spec.outcome == "Out" else (18, 24)
    v0 = spec.v0 if spec.v0 is not None else float(rng.uniform(lo_v, hi_v))
    if spec.outcome == "Goal":
        _finish_goal(sc, shooter, v0, rng, None)
        sc.cover_intent = None
        return
    aim = _aim_in(rng, g)
    t, u = _shoot(sc, shooter, aim, v0)
    sc.declare("Shot", t, t, {"KickingPlayer": shooter})
    to_line = (g.length_m - spos[0]) / u[0]
    sc.cover_intent = None
    if spec.outcome == "Out":
        defender = _pick(rng, AWAY_OUTFIELD)
        c, pc = sc.fly_contact(u, v0, mu, to_line * rng.uniform(0.6, 0.8))
        lo, hi = g.posts
        y_out = lo - rng.uniform(3.0, 9.0) if rng.random() < 0.5 else hi + rng.uniform(3.0, 9.0)
        u_out = _unit(np.array([g.length_m, y_out]) - pc)
        _deflect(sc, defender, c, pc, u, u_out)
        v_in = float(ball_speed(v0, mu, (c - t - 1) / FPS))
        v_out = 0.65 * v_in
        need = (g.length_m - pc[0]) / u_out[0]
        if ball_range(v_out, mu) < need + 1.0:
            raise InfeasibleScript("deflected ball does not reach the goal line")
        sc.fly_free(u_out, v_out, mu)
        sc.rest(HOLD)
        sc.declare("ShotOut", t, ("out",), {"KickingPlayer": shooter})
        return
    keeper = AWAY_GK
    before = to_line - rng.uniform(1.5, 3.0) / u[0]
    if spec.save == "catch":
        kpos = spos + (before + FOOT) * u
        sc.place(keeper, kpos)
        sc.fly_to(kpos - FOOT * u, v0, mu)
        sc.control(keeper, -u, HOLD)
        sc.declare("SavedShot", t, ("possession", keeper, t),
                   {"KickingPlayer": shooter, "Goalkeeper": keeper})
        return
    c, pc = sc.fly_contact(u, v0, mu, before)
    side = 1.0 if pc[1] < g.width_m / 2 else -1.0
    u_out = _unit(np.array([-1.0, side * rng.uniform(0.6, 1.6)]))
    _deflect(sc, keeper, c, pc, u, u_out)
    v_in = float(ball_speed(v0, mu, (c - t - 1) / FPS))
    sc.fly_free(u_out, max(7.0, 0.5 * v_in), mu)
    sc.rest(HOLD)
    sc.declare("SavedShot", t, c - 1, {"KickingPlayer": shooter, "Goalkeeper": keeper})


def _deflect(sc: _Script, pid: int, c: int, pc, u_in, u_out):
    where = pc - CONTACT * u_out
    sc.place(pid, where)
    before = np.linalg.norm(sc.ball[c - 1] - where)
    if not CONTACT + 0.05 < before < 0.95:
        raise InfeasibleScript("incoming ball too fast or too slow for a clean deflection")
    sc.deflections.append((c - 1, pid))


def _tackle_play(sc: _Script, rng):
    spec = sc.spec
    a = _pick(rng, HOME_OUTFIELD)
    b = _pick(rng, AWAY_OUTFIELD)
    apos = _where(spec, "possessor", rng, (30, 15), (75, 53))
    ang = rng.uniform(0, 2 * math.pi)
    d = np.array([math.cos(ang), math.sin(ang)])
    bpos = np.array(spec.placements["tackler"], float) if "tackler" in spec.placements \
        else apos + 7.0 * d
    d = _unit(bpos - apos)
    sc.place(a, apos)
    sc.place(b, bpos)
    approach = int(round(np.linalg.norm(bpos - apos - 0.8 * d) / 4.0 * FPS))
    engaged = int(rng.integers(15, 40))
    close = apos + 0.8 * d
    sc.move(b, close, LEAD_IN, LEAD_IN + approach)
    sc.control(a, -d, LEAD_IN + approach + engaged)
    x = sc.now
    if spec.outcome == "won":
        carry = 30
        sc.move(b, close + 3.5 * carry / FPS * d, x, x + carry)
        sc.move(a, apos - 2.0 * 15 / FPS * d, x, x + 15)
        sc.control(b, d, carry + HOLD)
    else:
        sc.move(b, close + 3.3 * 20 / FPS * d, x, x + 20)
        sc.control(a, -d, 20 + HOLD)
    sc.declare("Tackle", ("tackle", a, b), None,
               {"PossessingPlayer": a, "TacklingPlayer": b, "won": spec.outcome == "won"})
    sc.cover_intent = None


def _dribble_play(sc: _Script, rng):
    p = _pick(rng, HOME_OUTFIELD)
    start = _where(sc.spec, "dribbler", rng, (25, 15), (80, 53))
    ang = rng.uniform(0, 2 * math.pi)
    d = np.array([math.cos(ang), math.sin(ang)])
    frames = int(rng.integers(40, 70))
    speed = rng.uniform(2.0, 4.0)
    end = start + speed * frames / FPS * d
    if not sc.g.in_pitch(*(end + 2 * d)):
        end = start - speed * frames / FPS * d
        d = -d
    sc.place(p, start)
    sc.move(p, end, LEAD_IN, LEAD_IN + frames)
    sc.control(p, d, LEAD_IN + frames + HOLD)
    sc.cover_intent = None


def _clearance_play(sc: _Script, rng):
    spec = sc.spec
    p = _pick(rng, HOME_OUTFIELD)
    y = rng.uniform(5, 14)
    pos = _where(spec, "kicker", rng, (15, y), (55, y))
    lower = pos[1] < sc.g.width_m / 2
    u = _unit(np.array([rng.uniform(-0.4, 0.6), -1.0 if lower else 1.0]))
    v0 = spec.v0 if spec.v0 is not None else float(rng.uniform(15, 24))
    to_line = (pos[1] if lower else sc.g.width_m - pos[1]) / abs(u[1])
    if ball_range(v0, spec.mu) < to_line + 1.0:
        raise InfeasibleScript("clearance does not reach the touchline")
    sc.place(p, pos)
    sc.control(p, u, LEAD_IN)
    sc.strike(p)
    sc.fly_free(u, v0, spec.mu)
    sc.rest(HOLD)
    sc.cover_intent = None


def _script(spec: ScenarioSpec, rng, geometry: FieldGeometry) -> _Script:
    sc = _Script(spec, geometry)
    sc.cover_intent = None
    kind = spec.kind
    if kind in ("Pass", "Cross", "FilteringPass"):
        _pass_play(sc, rng, kind, then_goal=False)
    elif kind.endswith("ThenGoal"):
        _pass_play(sc, rng, kind[:-len("ThenGoal")], then_goal=True)
    elif kind == "Shot":
        _shot_play(sc, rng)
    elif kind == "Tackle":
        _tackle_play(sc, rng)
    elif kind == "Dribble":
        _dribble_play(sc, rng)
    else:
        _clearance_play(sc, rng)
    return sc


# -- bystanders and validation ----------------------------------------------

_GRID = np.stack(np.meshgrid(np.arange(1.0, 104.5, 1.0), np.arange(1.0, 67.5, 1.0)),
                 axis=-1).reshape(-1, 2)


def _actor_positions(sc: _Script, frames: int) -> dict[int, np.ndarray]:
    return {pid: np.array([sc.pos(pid, f) for f in range(frames)]) for pid in sc.keys}


def _place_bystanders(sc: _Script, actors: Mapping[int, np.ndarray], rng) -> dict[int, np.ndarray]:
    from scipy.spatial import cKDTree

    g = sc.g
    obstacles = [np.asarray(sc.ball)] + [p[::3] for p in actors.values()]
    clear = cKDTree(np.concatenate(obstacles)).query(_GRID)[0] >= CLEARANCE
    goal_d = np.hypot(_GRID[:, 0] - g.length_m, _GRID[:, 1] - g.width_m / 2)
    free = [pid for pid in range(1, N_OBJ) if pid not in actors]
    region = {pid: np.ones(len(_GRID), bool) for pid in free}
    if sc.cover_intent is not None:
        receiver, filtering = sc.cover_intent
        t = sc.passes[0][0]
        d_r = _goal_distance(g, actors[receiver][t])
        defenders = [p for p in free if p in AWAY_OUTFIELD]
        if filtering:
            for p in defenders:
                region[p] = goal_d >= d_r + 1.0
        elif defenders:
            cover = min(defenders, key=lambda p: _goal_distance(g, FORMATION[p]))
            region[cover] = goal_d <= d_r - 1.0
    placed: dict[int, np.ndarray] = {}
    taken = np.zeros(len(_GRID), bool)
    # the most constrained players pick first
    for pid in sorted(free, key=lambda p: (region[p].sum(), p)):
        ok = clear & region[pid] & ~taken
        if not ok.any():
            raise InfeasibleScript(f"no room for player {pid} away from the action")
        want = FORMATION[pid] + rng.normal(0.0, 2.0, 2)
        idx = np.flatnonzero(ok)
        best = idx[np.argmin(np.hypot(*(_GRID[idx] - want).T))]
        placed[pid] = _GRID[best].copy()
        taken |= np.hypot(*(_GRID - _GRID[best]).T) < 2.0
    return placed


def _positions(sc: _Script, actors, bystanders) -> np.ndarray:
    """Positions quantized to the millimetre precision of the CSV format."""
    frames = sc.now
    out = np.empty((frames, N_OBJ, 2))
    out[:, BALL] = np.asarray(sc.ball)
    for pid, p in actors.items():
        out[:, pid] = p
    for pid, p in bystanders.items():
        out[:, pid] = p
    return np.round(out, DECIMALS)


def _check_control(pos: np.ndarray, phases: Sequence[_Phase]):
    """Scripted control must look like control to the reference thresholds."""
    ball = pos[:, BALL]
    speed = np.zeros(len(pos))
    speed[:-1] = np.linalg.norm(np.diff(ball, axis=0), axis=1) * FPS
    for ph in phases:
        fr = np.arange(ph.first, ph.last + 1)
        d = np.linalg.norm(pos[fr, 1:] - ball[fr, None], axis=2)
        if np.any(np.argmin(d, axis=1) + 1 != ph.player) or np.any(d[:, ph.player - 1] > 0.95):
            raise InfeasibleScript(f"player {ph.player} does not clearly control the ball")
        if np.any(speed[fr[:-1]] > 4.9):
            raise InfeasibleScript("controlled ball moves too fast")


def _validate(sc: _Script, pos: np.ndarray, log: EventLog) -> bool:
    """True when the spatial predicates agree with the script's intent.

    Raises for mismatches that do not depend on bystander placement.
    """
    trace = Trace(pos, ROSTER, fps=FPS, geometry=sc.g)
    ctx = SpatialContext.from_trace(trace)
    for t, kicker in sc.kicks:
        if on_target(ctx, kicker, t) != (t in sc.shots):
            raise InfeasibleScript(f"kick at frame {t} is {'not ' * (t in sc.shots)}on target")
    for e in log.complex:
        limit = RULE_SPAN.get(e.event_type)
        if limit is not None and e.end - e.start > limit:
            raise InfeasibleScript(f"{e.event_type} spans {e.end - e.start} frames, over {limit}")
    ok = True
    for t, kicker, receiver, kind in sc.passes:
        p = next(e for e in log.complex if e.event_type == "Pass" and e.start == t)
        cross = (in_zone(ctx, kicker, "sideline_band", t) and in_zone(ctx, kicker, "attacking_third", t)
                 and in_zone(ctx, receiver, "goal_area", p.end))
        if cross != (kind == "Cross"):
            raise InfeasibleScript("pass geometry disagrees with the cross intent")
        ok &= beyond_defence_line(ctx, receiver, t) == (kind == "FilteringPass")
    return ok


# -- ground truth -----------------------------------------------------------

def _engagement(pos: np.ndarray, player: int, frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    opp = [o.id for o in ROSTER if o.team is team_of(player).opponent]
    d = np.linalg.norm(pos[frames][:, opp] - pos[frames, player][:, None], axis=2)
    return d.min(axis=1) < ENGAGED, np.asarray(opp)[np.argmin(d, axis=1)], d.min(axis=1)


def _control_atoms(pos: np.ndarray, ph: _Phase) -> list[AtomicEvent]:
    k = WINDOW
    fr = np.arange(ph.first, ph.last + 1)
    engaged, nearest_opp, gap = _engagement(pos, ph.player, fr)
    if np.any(np.abs(gap - ENGAGED) < 2e-3):
        raise InfeasibleScript("opponent hovers at the engagement distance")
    out = []
    for i in range(len(fr) - k):
        win = engaged[i:i + k + 1]
        t = int(fr[i])
        if not win.any():
            out.append(AtomicEvent.make("BallPossession", t,
                                        {"PossessingPlayer": ph.player, "PossessedObject": BALL}))
        elif win.all():
            out.append(AtomicEvent.make("Tackle", t, {"PossessingPlayer": ph.player,
                                                      "TacklingPlayer": int(nearest_opp[i]),
                                                      "PossessedObject": BALL}))
    return out


def _exits(ball: np.ndarray, g: FieldGeometry) -> list[tuple[int, bool]]:
    """(frame, is_goal) for every move from inside the pitch to outside."""
    inside = (ball[:, 0] >= 0) & (ball[:, 0] <= g.length_m) & (ball[:, 1] >= 0) & (ball[:, 1] <= g.width_m)
    lo, hi = g.posts
    out = []
    for i in np.flatnonzero(inside[:-1] & ~inside[1:]) + 1:
        (x0, y0), (x1, y1) = ball[i - 1], ball[i]
        goal = False
        for line in (0.0, g.length_m):
            if (x1 - line) * (x0 - line) < 0 or (x1 == line) != (x0 == line):
                s = (line - x0) / (x1 - x0)
                yc = y0 + s * (y1 - y0)
                if 0 <= yc <= g.width_m:
                    goal = lo < yc < hi
        out.append((int(i), goal))
    return out


def _merge(atoms: Sequence[AtomicEvent], key) -> list[list[AtomicEvent]]:
    runs: list[list[AtomicEvent]] = []
    last: dict = {}
    for a in sorted(atoms, key=lambda a: a.t):
        run = last.get(key(a))
        if run is not None and a.t - run[-1].t <= MERGE_GAP:
            run.append(a)
        else:
            last[key(a)] = run = [a]
            runs.append(run)
    return runs


def _truth(pos: np.ndarray, phases, kicks, deflections, declared, g: FieldGeometry) -> EventLog:
    atoms: list[AtomicEvent] = []
    for t, p in kicks:
        atoms.append(AtomicEvent.make("KickingTheBall", t, {"KickingPlayer": p, "KickedObject": BALL}))
    for t, p in deflections:
        atoms.append(AtomicEvent.make("BallDeflection", t, {"DeflectingPlayer": p, "DeflectedObject": BALL}))
    for ph in phases:
        atoms += _control_atoms(pos, ph)
    for t, goal in _exits(pos[:, BALL], g):
        if not goal:
            atoms.append(AtomicEvent.make("BallOut", t, {"Ball": BALL}))
            continue
        attacking = Team.HOME if pos[t, BALL, 0] > g.length_m / 2 else Team.AWAY
        roles = {"Ball": BALL}
        scorer = [(kt, kp) for kt, kp in kicks
                  if t - SCORER_LOOKBACK <= kt <= t and team_of(kp) is attacking]
        if scorer:
            roles["Scorer"] = max(scorer)[1]
        atoms.append(AtomicEvent.make("Goal", t, roles))
    atoms.sort(key=lambda a: (a.t, a.event_type))

    poss = [a for a in atoms if a.event_type == "BallPossession"]
    complex_: list[IntervalEvent] = []
    for run in _merge(poss, lambda a: a.roles["PossessingPlayer"]):
        complex_.append(IntervalEvent.make("BallPossession", run[0].t, run[-1].t,
                                           {"PossessingPlayer": run[0].roles["PossessingPlayer"]},
                                           [a.id for a in run]))

    def first(kind, after, who=None):
        for a in atoms:
            if a.event_type == kind and a.t >= after and (
                    who is None or a.roles.get("PossessingPlayer") == who):
                return a
        raise InfeasibleScript(f"script expected a {kind} after frame {after}")

    kick_at = {t: a for a in atoms if a.event_type == "KickingTheBall" for t in [a.t]}
    for d in declared:
        if d.event_type == "Tackle":
            _, a_, b_, lo, hi = (*d.start, 0, len(pos))[:5]
            run = [a for a in atoms if a.event_type == "Tackle" and lo <= a.t < hi
                   and a.roles["PossessingPlayer"] == a_ and a.roles["TacklingPlayer"] == b_]
            if not run:
                raise InfeasibleScript("scripted tackle produced no tackle frames")
            end = first("BallPossession", run[-1].t)
            final = end.roles["PossessingPlayer"]
            won = team_of(final) is team_of(b_)
            if won != d.roles["won"]:
                raise InfeasibleScript("tackle outcome differs from the script")
            roles = {"PossessingPlayer": a_, "TacklingPlayer": b_, "FinalPossessor": final}
            subs = [a.id for a in run] + [end.id]
            for name in ("Tackle", "WonTackle" if won else "LostTackle"):
                complex_.append(IntervalEvent.make(name, run[0].t, end.t, roles, subs))
            continue
        start = d.start
        subs = [kick_at[start].id] if start in kick_at else []
        if isinstance(d.end, tuple):
            what = d.end[0]
            if what == "possession":
                end_ev = first("BallPossession", d.end[2], d.end[1])
            elif what == "goal":
                end_ev = first("Goal", start)
            else:
                end_ev = first("BallOut", start)
            end = end_ev.t
            if d.event_type.endswith("ThenGoal") and d.event_type != "ShotThenGoal":
                recv = d.roles["ReceivingPlayer"]
                subs.append(first("BallPossession", start, recv).id)
            subs.append(end_ev.id)
        else:
            end = d.end
            if end != start:
                subs += [a.id for a in atoms if a.t == end and a.event_type == "BallDeflection"]
        complex_.append(IntervalEvent.make(d.event_type, start, end, d.roles, subs))
    return EventLog(tuple(atoms), tuple(complex_))


# -- assembly ---------------------------------------------------------------

@dataclass
class _Built:
    positions: np.ndarray
    phases: list[_Phase]
    kicks: list[tuple[int, int]]
    deflections: list[tuple[int, int]]
    declared: list[_Declared]


def _mirror(b: _Built, g: FieldGeometry) -> _Built:
    pos = np.empty_like(b.positions)
    for j in range(N_OBJ):
        pos[:, mirror_id(j), 0] = g.length_m - b.positions[:, j, 0]
        pos[:, mirror_id(j), 1] = g.width_m - b.positions[:, j, 1]
    pos = np.round(pos, DECIMALS)
    m = mirror_id

    def roles(r):
        return {k: (m(v) if k != "won" else v) for k, v in r.items()}

    declared = []
    for d in b.declared:
        start = ("tackle", m(d.start[1]), m(d.start[2])) if isinstance(d.start, tuple) else d.start
        end = d.end
        if isinstance(end, tuple) and end[0] == "possession":
            end = ("possession", m(end[1]), end[2])
        declared.append(_Declared(d.event_type, start, end, roles(d.roles)))
    return _Built(pos, [_Phase(m(p.player), p.first, p.last) for p in b.phases],
                  [(t, m(p)) for t, p in b.kicks], [(t, m(p)) for t, p in b.deflections], declared)


def _build(spec: ScenarioSpec, rng, g: FieldGeometry) -> _Built:
    sc = _script(spec, rng, g)
    actors = _actor_positions(sc, sc.now)
    for attempt in range(8):
        bystanders = _place_bystanders(sc, actors, rng)
        pos = _positions(sc, actors, bystanders)
        _check_control(pos, sc.phases)
        log = _truth(pos, sc.phases, sc.kicks, sc.deflections, sc.declared, g)
        if _validate(sc, pos, log):
            break
    else:
        raise InfeasibleScript("could not place defenders consistently with the pass type")
    built = _Built(pos, sc.phases, sc.kicks, sc.deflections, sc.declared)
    return _mirror(built, g) if spec.attacking == "away" else built


def generate_scenario(spec: ScenarioSpec, rng: np.random.Generator | None = None,
                      geometry: FieldGeometry | None = None) -> tuple[Trace, EventLog]:
    return generate_match([(0, spec)], rng, geometry)


def generate_match(script: Sequence[tuple[int, ScenarioSpec]], rng: np.random.Generator | None = None,
                   geometry: FieldGeometry | None = None) -> tuple[Trace, EventLog]:
    """Lay scenarios out at their frame offsets over one roster.

    Gaps between scenarios hold the previous final state. Each scenario is
    seeded from its own spec unless ``rng`` is given.
    """
    g = geometry or FieldGeometry()
    if not script:
        return Trace(np.zeros((0, N_OBJ, 2)), ROSTER, fps=FPS, geometry=g), EventLog()
    script = sorted(script, key=lambda s: s[0])
    built = [_build(spec, rng if rng is not None else np.random.default_rng(spec.seed), g)
             for _, spec in script]
    offsets = [int(o) for o, _ in script]
    if offsets[0] < 0:
        raise OverlappingScenarios("offsets must be non-negative")
    for (o1, b1), o2 in zip(zip(offsets, built), offsets[1:]):
        if o1 + len(b1.positions) > o2:
            raise OverlappingScenarios(f"scenario at frame {o1} runs past the next one at {o2}")
    total = offsets[-1] + len(built[-1].positions)
    pos = np.empty((total, N_OBJ, 2))
    pos[:offsets[0]] = built[0].positions[0]
    phases, kicks, defl, declared = [], [], [], []
    for i, (o, b) in enumerate(zip(offsets, built)):
        n = len(b.positions)
        nxt = offsets[i + 1] if i + 1 < len(offsets) else total
        pos[o:o + n] = b.positions
        pos[o + n:nxt] = b.positions[-1]
        for ph in b.phases:
            last = ph.last + o
            if ph.last == n - 1:
                last = nxt - 1
            phases.append(_Phase(ph.player, ph.first + o, last))
        kicks += [(t + o, p) for t, p in b.kicks]
        defl += [(t + o, p) for t, p in b.deflections]
        for d in b.declared:
            start = _shift(d.start, o)
            if isinstance(start, tuple):
                start = start[:3] + (o, o + n)
            declared.append(_Declared(d.event_type, start, _shift(d.end, o), d.roles))
    log = _truth(pos, phases, kicks, defl, declared, g)
    return Trace(pos, ROSTER, fps=FPS, geometry=g), log


def _shift(v, o):
    if isinstance(v, int):
        return v + o
    if isinstance(v, tuple) and v and v[0] == "possession":
        return ("possession", v[1], v[2] + o)
    return v


def generate_sequence(specs: Sequence[ScenarioSpec], gap: int = 160,
                      geometry: FieldGeometry | None = None) -> tuple[Trace, EventLog, list[int]]:
    """Scenarios back to back with ``gap`` idle frames between them."""
    g = geometry or FieldGeometry()
    offsets, at = [], 0
    for spec in specs:
        offsets.append(at)
        at += len(_build(spec, np.random.default_rng(spec.seed), g).positions) + gap
    trace, log = generate_match(list(zip(offsets, specs)), None, g)
    return trace, log, offsets


# -- noise ------------------------------------------------------------------

def add_noise(trace: Trace, noise: NoiseSpec, rng: np.random.Generator) -> Trace:
    """Gaussian jitter plus dropped rows filled by linear interpolation."""
    pos = np.array(trace.positions, dtype=float)
    if noise.sigma > 0:
        pos += rng.normal(0.0, noise.sigma, pos.shape)
    if noise.dropout > 0 and len(pos) > 1:
        lost = rng.random(pos.shape[:2]) < noise.dropout
        frames = np.arange(len(pos))
        for j in range(pos.shape[1]):
            gone = lost[:, j]
            if gone.any() and not gone.all():
                for c in range(2):
                    pos[gone, j, c] = np.interp(frames[gone], frames[~gone], pos[~gone, j, c])
    return trace.with_positions(pos)


# -- suites and script files ------------------------------------------------

SUITE_CASES = (
    ("Dribble", None, {}), ("Pass", None, {}), ("Cross", None, {}),
    ("FilteringPass", None, {}), ("PassThenGoal", None, {}), ("CrossThenGoal", None, {}),
    ("FilteringPassThenGoal", None, {}), ("Shot", "Goal", {}), ("Shot", "Out", {}),
    ("Shot", "Saved", {"save": "parry"}), ("Shot", "Saved", {"save": "catch"}),
    ("Tackle", "won", {}), ("Tackle", "lost", {}), ("Clearance", None, {}),
)


def scenario_suite(n: int = 224, seed: int = 0, geometry: FieldGeometry | None = None) -> list[ScenarioSpec]:
    """``n`` feasible specs cycling through every play and both attacking sides."""
    g = geometry or FieldGeometry()
    rng = np.random.default_rng(seed)
    out: list[ScenarioSpec] = []
    i = 0
    while len(out) < n:
        kind, outcome, extra = SUITE_CASES[i % len(SUITE_CASES)]
        side = "home" if (i // len(SUITE_CASES)) % 2 == 0 else "away"
        mu = float(rng.uniform(2.0, 4.0))
        for _ in range(50):
            spec = ScenarioSpec(kind, outcome, side, mu=round(mu, 2),
                                seed=int(rng.integers(2**31)), **extra)
            try:
                _build(spec, np.random.default_rng(spec.seed), g)
            except InfeasibleScript:
                continue
            out.append(spec)
            break
        else:
            raise InfeasibleScript(f"no feasible {kind} scenario found")
        i += 1
    return out


def load_script(path: str | Path) -> tuple[list[tuple[int, ScenarioSpec]], NoiseSpec, int]:
    """Read a JSON scenario script: ``{"scenarios": [...], "noise": {...}, "seed": n}``.

    Scenarios without an ``offset`` follow the previous one after ``gap`` frames.
    """
    doc = json.loads(Path(path).read_text())
    gap = int(doc.get("gap", 160))
    g = FieldGeometry()
    script, at = [], 0
    for item in doc.get("scenarios", []):
        spec = ScenarioSpec.from_dict(item)
        off = int(item["offset"]) if "offset" in item else at
        script.append((off, spec))
        at = off + len(_build(spec, np.random.default_rng(spec.seed), g).positions) + gap
    noise = NoiseSpec(**doc.get("noise", {}))
    return script, noise, int(doc.get("seed", 0))


def save_script(path: str | Path, specs: Sequence[ScenarioSpec], noise: NoiseSpec = NoiseSpec(),
                seed: int = 0, gap: int = 160) -> None:
    doc = {"gap": gap, "seed": seed, "noise": asdict(noise),
           "scenarios": [s.to_dict() for s in specs]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
