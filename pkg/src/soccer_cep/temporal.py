"""Interval-temporal composition of atomic events into complex events.

Events are treated as closed frame intervals (atomic ones as ``[t, t]``).
Patterns combine typed operands with ``SEQ`` (ordered, metric gap bound),
``AND`` (co-occurring within a bound), ``OR`` (either) or a single-operand
filter, and carry role predicates checked once every operand is bound.
"""

from __future__ import annotations

import bisect
import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .spatial import SpatialContext
from .trace import AtomicEvent, IntervalEvent

Event = AtomicEvent | IntervalEvent
Bindings = Mapping[str, Event]

MERGE_GAP = 5  # frames
INTERNAL_TYPES = ("TackleRun",)


class CyclicRuleSet(ValueError):
    pass


@dataclass(frozen=True)
class Operand:
    name: str
    types: tuple[str, ...]


@dataclass(frozen=True)
class IntervalPattern:
    operator: str                          # SEQ | AND | OR | FILTER
    operands: tuple[Operand, ...]
    max_gap: int | None = None
    duration: tuple[int, int] | None = None
    constraints: tuple[Callable[[Bindings, SpatialContext], bool], ...] = ()
    emit: Mapping[str, Callable[[Bindings, SpatialContext], int | None]] = field(default_factory=dict)

    def __post_init__(self):
        if self.operator == "SEQ" and len(self.operands) < 2:
            raise ValueError("SEQ needs at least two operands")
        if self.max_gap is not None and self.max_gap < 0:
            raise ValueError("max_gap must be non-negative")

    @property
    def references(self) -> set[str]:
        return {t for o in self.operands for t in o.types}


@dataclass(frozen=True)
class CompiledRuleSet:
    rules: tuple[tuple[str, IntervalPattern], ...]

    def __post_init__(self):
        defined = [name for name, _ in self.rules]
        seen: set[str] = set()
        for name, pattern in self.rules:
            later = (pattern.references & set(defined)) - seen
            if later:
                raise CyclicRuleSet(f"{name} depends on {sorted(later)} before it is defined")
            seen.add(name)

    @property
    def event_types(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.rules)

    @staticmethod
    def ordered(rules: Iterable[tuple[str, IntervalPattern]]) -> "CompiledRuleSet":
        """Topologically sort rules by their references (stable)."""
        rules = list(rules)
        names = {n for n, _ in rules}
        deps = {n: (p.references & names) - {n} for n, p in rules}
        for n, p in rules:
            if n in p.references:
                raise CyclicRuleSet(f"{n} refers to itself")
        done: list[tuple[str, IntervalPattern]] = []
        placed: set[str] = set()
        pending = list(rules)
        while pending:
            ready = [r for r in pending if deps[r[0]] <= placed]
            if not ready:
                raise CyclicRuleSet("cyclic dependency among " +
                                    ", ".join(sorted(n for n, _ in pending)))
            done.append(ready[0])
            placed.add(ready[0][0])
            pending.remove(ready[0])
        return CompiledRuleSet(tuple(done))


# -- merging ----------------------------------------------------------------

def merge_runs(atomics: Sequence[AtomicEvent], event_type: str, key_roles: Sequence[str],
               out_type: str, gap: int = MERGE_GAP) -> list[IntervalEvent]:
    """Join same-type atoms sharing ``key_roles`` when separated by at most ``gap`` frames."""
    runs: list[list[AtomicEvent]] = []
    open_runs: dict[tuple, list[AtomicEvent]] = {}
    for e in sorted((a for a in atomics if a.event_type == event_type), key=lambda a: a.t):
        key = tuple(e.roles.get(r) for r in key_roles)
        run = open_runs.get(key)
        if run is not None and e.t - run[-1].t <= gap:
            run.append(e)
            continue
        run = [e]
        open_runs[key] = run
        runs.append(run)
    out = []
    for run in runs:
        roles = {r: run[0].roles[r] for r in key_roles if r in run[0].roles}
        out.append(IntervalEvent.make(out_type, run[0].t, run[-1].t, roles,
                                      [a.id for a in run]))
    return out


def merge_possession(atomics: Sequence[AtomicEvent], gap: int = MERGE_GAP) -> list[IntervalEvent]:
    return merge_runs(atomics, "BallPossession", ("PossessingPlayer",), "BallPossession", gap)


def merge_tackles(atomics: Sequence[AtomicEvent], gap: int = MERGE_GAP) -> list[IntervalEvent]:
    return merge_runs(atomics, "Tackle", ("PossessingPlayer", "TacklingPlayer"), "TackleRun", gap)


# -- matching ---------------------------------------------------------------

def seq_match(e1: Event, e2: Event, max_gap: int) -> tuple[int, int] | None:
    if e1.end <= e2.start and e2.start - e1.end <= max_gap:
        return (e1.start, e2.end)
    return None


def flatten_subevents(events: Iterable[Event]) -> tuple[str, ...]:
    out: list[str] = []
    for e in events:
        ids = (e.id,) if isinstance(e, AtomicEvent) else e.sub_events
        for i in ids:
            if i not in out:
                out.append(i)
    return tuple(out)


class _Pool:
    def __init__(self):
        self.by_type: dict[str, list[Event]] = defaultdict(list)
        self._starts: dict[str, list[int]] = {}

    def add(self, event_type: str, events: Iterable[Event]):
        self.by_type[event_type] = sorted(events, key=lambda e: (e.start, e.end, e.id))
        self._starts[event_type] = [e.start for e in self.by_type[event_type]]

    def between(self, types: Sequence[str], lo: int, hi: int) -> list[Event]:
        out = []
        for t in types:
            starts = self._starts.get(t, [])
            evs = self.by_type.get(t, [])
            i = bisect.bisect_left(starts, lo)
            j = bisect.bisect_right(starts, hi)
            out.extend(evs[i:j])
        out.sort(key=lambda e: (e.start, e.end, e.id))
        return out

    def all(self, types: Sequence[str]) -> list[Event]:
        out = [e for t in types for e in self.by_type.get(t, [])]
        out.sort(key=lambda e: (e.start, e.end, e.id))
        return out


def _accept(pattern: IntervalPattern, b: dict, ctx: SpatialContext) -> bool:
    return all(c(b, ctx) for c in pattern.constraints)


def _instances(pattern: IntervalPattern, pool: _Pool, ctx: SpatialContext):
    ops = pattern.operands
    gap = pattern.max_gap
    op = pattern.operator

    def duration_ok(start, end):
        if pattern.duration is None:
            return True
        lo, hi = pattern.duration
        return lo <= end - start <= hi

    if op in ("FILTER", "OR"):
        for o in ops:
            for e in pool.all(o.types):
                b = {o.name: e}
                if duration_ok(e.start, e.end) and _accept(pattern, b, ctx):
                    yield b, e.start, e.end
        return

    if op == "SEQ":
        def extend(b, last, i):
            if i == len(ops):
                first = b[ops[0].name]
                if duration_ok(first.start, last.end) and _accept(pattern, b, ctx):
                    return b
                return None
            hi = last.end + (gap if gap is not None else 10**12)
            used = {id(v) for v in b.values()}
            for cand in pool.between(ops[i].types, last.end, hi):
                if id(cand) in used:
                    continue
                got = extend({**b, ops[i].name: cand}, cand, i + 1)
                if got is not None:
                    return got
            return None

        for e1 in pool.all(ops[0].types):
            b = extend({ops[0].name: e1}, e1, 1)
            if b is not None:
                yield b, e1.start, b[ops[-1].name].end
        return

    if op == "AND":
        g = gap if gap is not None else 0

        def extend_and(b, anchor, i):
            if i == len(ops):
                evs = list(b.values())
                s, e = min(x.start for x in evs), max(x.end for x in evs)
                if duration_ok(s, e) and _accept(pattern, b, ctx):
                    return b
                return None
            used = {id(v) for v in b.values()}
            cands = pool.between(ops[i].types, anchor.start - g, anchor.start + g)
            cands.sort(key=lambda c: (abs(c.start - anchor.start), c.start, c.id))
            for cand in cands:
                if id(cand) in used:
                    continue
                got = extend_and({**b, ops[i].name: cand}, anchor, i + 1)
                if got is not None:
                    return got
            return None

        for e1 in pool.all(ops[0].types):
            b = extend_and({ops[0].name: e1}, e1, 1)
            if b is not None:
                evs = list(b.values())
                yield b, min(x.start for x in evs), max(x.end for x in evs)
        return
    raise ValueError(f"unknown operator {op}")


def detect_complex(atomics: Sequence[AtomicEvent], rules: CompiledRuleSet,
                   ctx: SpatialContext, merge_gap: int = MERGE_GAP) -> list[IntervalEvent]:
    """Evaluate every rule in dependency order.

    The result holds merged BallPossession intervals plus each rule's
    instances; internal helper types (``TackleRun``) are not emitted.
    A rule's output shadows any atomic type of the same name for the rules
    that follow it.
    """
    pool = _Pool()
    by_type: dict[str, list[AtomicEvent]] = defaultdict(list)
    for a in atomics:
        by_type[a.event_type].append(a)
    for t, evs in by_type.items():
        pool.add(t, evs)
    pool.add("TackleRun", merge_tackles(atomics, merge_gap))
    possession = merge_possession(atomics, merge_gap)
    out: list[IntervalEvent] = list(possession)
    for name, pattern in rules.rules:
        made: dict[tuple, IntervalEvent] = {}
        for b, start, end in _instances(pattern, pool, ctx):
            roles = {}
            for role, fn in pattern.emit.items():
                v = fn(b, ctx)
                if v is not None:
                    roles[role] = int(v)
            ordered = sorted(b.values(), key=lambda e: (e.start, e.end, e.id))
            ev = IntervalEvent.make(name, start, end, roles, flatten_subevents(ordered))
            made.setdefault(ev.key(), ev)
        events = list(made.values())
        pool.add(name, events)
        if name not in INTERNAL_TYPES:
            out.extend(events)
    return _unique_ids(out)


def _unique_ids(events: list[IntervalEvent]) -> list[IntervalEvent]:
    seen: dict[str, int] = {}
    out = []
    for e in sorted(events, key=lambda e: (e.start, e.end, e.event_type, e.id)):
        n = seen.get(e.id, 0)
        seen[e.id] = n + 1
        if n:
            e = IntervalEvent(f"{e.id}#{n}", e.event_type, e.start, e.end, e.roles, e.sub_events)
        out.append(e)
    return out


# -- durations --------------------------------------------------------------

@dataclass(frozen=True)
class DurationSummary:
    event_type: str
    count: int
    min_frames: int
    mean_frames: float
    max_frames: int
    fps: float

    @property
    def min_s(self) -> float:
        return self.min_frames / self.fps

    @property
    def mean_s(self) -> float:
        return self.mean_frames / self.fps

    @property
    def max_s(self) -> float:
        return self.max_frames / self.fps


def duration_stats(events: Iterable[IntervalEvent], fps: float = 30.0) -> dict[str, DurationSummary]:
    """Per-type durations, measured as ``end - start`` frames."""
    grouped: dict[str, list[int]] = defaultdict(list)
    for e in events:
        grouped[e.event_type].append(e.end - e.start)
    return {t: DurationSummary(t, len(d), min(d), float(np.mean(d)), max(d), fps)
            for t, d in sorted(grouped.items())}


def write_duration_csv(stats: Mapping[str, DurationSummary], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_type", "count", "min_frames", "mean_frames", "max_frames",
                    "min_s", "mean_s", "max_s"])
        for s in stats.values():
            w.writerow([s.event_type, s.count, s.min_frames, f"{s.mean_frames:.3f}",
                        s.max_frames, f"{s.min_s:.3f}", f"{s.mean_s:.3f}", f"{s.max_s:.3f}"])
