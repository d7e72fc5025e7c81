"""Hand-written versions of the builtin complex rules.

Kept deliberately separate from the rule-language engine so the two can be
checked against each other.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Sequence

from .spatial import SpatialContext, beyond_defence_line, in_zone, on_target
from .trace import ANCHOR_ROLE, AtomicEvent, IntervalEvent

PASS_GAP = 90
CHAIN_GAP = 150
TACKLE_GAP = 60
SHOT_GAP = 90
SAVE_GAP = 60
MERGE_GAP = 5


def _runs(atoms, key_roles, gap):
    runs, last_run = [], {}
    for a in sorted(atoms, key=lambda a: a.t):
        key = tuple(a.roles.get(r) for r in key_roles)
        run = last_run.get(key)
        if run is not None and a.t - run[-1].t <= gap:
            run.append(a)
        else:
            run = [a]
            last_run[key] = run
            runs.append(run)
    return runs


def _subs(*events):
    out = []
    for e in events:
        for i in ((e.id,) if isinstance(e, AtomicEvent) else e.sub_events):
            if i not in out:
                out.append(i)
    return tuple(out)


def _first_after(candidates, after: int, gap: int, accept):
    for c in candidates:
        if c.start < after:
            continue
        if c.start - after > gap:
            break
        if accept(c):
            return c
    return None


def _sorted(events):
    return sorted(events, key=lambda e: (e.start, e.end, e.id))


def detect_reference(atomics: Sequence[AtomicEvent], ctx: SpatialContext) -> list[IntervalEvent]:
    by_type = defaultdict(list)
    for a in atomics:
        by_type[a.event_type].append(a)
    for v in by_type.values():
        v.sort(key=lambda a: (a.t, a.id))
    kicks, possessions = by_type["KickingTheBall"], by_type["BallPossession"]
    goals, outs = by_type["Goal"], by_type["BallOut"]
    out: list[IntervalEvent] = []

    for run in _runs(possessions, ("PossessingPlayer",), MERGE_GAP):
        out.append(IntervalEvent.make("BallPossession", run[0].t, run[-1].t,
                                      {"PossessingPlayer": run[0].roles["PossessingPlayer"]},
                                      [a.id for a in run]))

    passes = []
    for k in kicks:
        kp = k.roles["KickingPlayer"]

        def receives(p):
            rp = p.roles["PossessingPlayer"]
            return rp != kp and ctx.team(rp) == ctx.team(kp)
        p = _first_after(possessions, k.t, PASS_GAP, receives)
        if p is not None:
            passes.append(IntervalEvent.make(
                "Pass", k.t, p.t,
                {"KickingPlayer": kp, "ReceivingPlayer": p.roles["PossessingPlayer"]}, _subs(k, p)))
    crosses, filtering = [], []
    for p in passes:
        kp, rp = p.roles["KickingPlayer"], p.roles["ReceivingPlayer"]
        if (in_zone(ctx, kp, "sideline_band", p.start) and in_zone(ctx, kp, "attacking_third", p.start)
                and in_zone(ctx, rp, "goal_area", p.end)):
            crosses.append(IntervalEvent.make("Cross", p.start, p.end, p.roles, p.sub_events))
        if beyond_defence_line(ctx, rp, p.start):
            filtering.append(IntervalEvent.make("FilteringPass", p.start, p.end, p.roles, p.sub_events))
    out += passes + crosses + filtering

    for name, base in (("PassThenGoal", passes), ("CrossThenGoal", crosses),
                       ("FilteringPassThenGoal", filtering)):
        for p in base:
            rp = p.roles["ReceivingPlayer"]
            g = _first_after(goals, p.end, CHAIN_GAP, lambda g: g.roles.get("Scorer") == rp)
            if g is not None:
                out.append(IntervalEvent.make(
                    name, p.start, g.t,
                    {"KickingPlayer": p.roles["KickingPlayer"], "ReceivingPlayer": rp, "Scorer": rp},
                    _subs(p, g)))

    tackle_runs = []
    for run in _runs(by_type["Tackle"], ("PossessingPlayer", "TacklingPlayer"), MERGE_GAP):
        tackle_runs.append(IntervalEvent.make(
            "TackleRun", run[0].t, run[-1].t,
            {"PossessingPlayer": run[0].roles["PossessingPlayer"],
             "TacklingPlayer": run[0].roles["TacklingPlayer"]}, [a.id for a in run]))
    for run in _sorted(tackle_runs):
        p = _first_after(possessions, run.end, TACKLE_GAP, lambda p: True)
        if p is None:
            continue
        roles = {**run.roles, "FinalPossessor": p.roles["PossessingPlayer"]}
        subs = _subs(*_sorted([run, p]))
        out.append(IntervalEvent.make("Tackle", run.start, p.t, roles, subs))
        won = ctx.team(roles["FinalPossessor"]) == ctx.team(roles["TacklingPlayer"])
        out.append(IntervalEvent.make("WonTackle" if won else "LostTackle", run.start, p.t, roles, subs))

    shots = [IntervalEvent.make("Shot", k.t, k.t, {"KickingPlayer": k.roles["KickingPlayer"]}, (k.id,))
             for k in kicks if on_target(ctx, k.roles["KickingPlayer"], k.t)]
    out += shots
    saves = _sorted(by_type["BallDeflection"] + possessions)
    for s in shots:
        kp = s.roles["KickingPlayer"]
        o = _first_after(outs, s.end, SHOT_GAP,
                         lambda o: in_zone(ctx, o.roles.get("Ball", ctx.ball_id), "behind_goal_line", o.t))
        if o is not None:
            out.append(IntervalEvent.make("ShotOut", s.start, o.t, {"KickingPlayer": kp}, _subs(s, o)))
        g = _first_after(goals, s.end, SHOT_GAP, lambda g: True)
        if g is not None:
            roles = {"KickingPlayer": kp}
            if "Scorer" in g.roles:
                roles["Scorer"] = g.roles["Scorer"]
            out.append(IntervalEvent.make("ShotThenGoal", s.start, g.t, roles, _subs(s, g)))

        def keeper(d):
            who = d.roles.get(ANCHOR_ROLE[d.event_type])
            return who is not None and ctx.is_goalkeeper(who) and ctx.team(who) != ctx.team(kp)
        d = _first_after(saves, s.end, SAVE_GAP, keeper)
        if d is not None:
            out.append(IntervalEvent.make(
                "SavedShot", s.start, d.t,
                {"KickingPlayer": kp, "Goalkeeper": d.roles[ANCHOR_ROLE[d.event_type]]}, _subs(s, d)))
    return sorted(out, key=lambda e: (e.start, e.end, e.event_type, e.id))
