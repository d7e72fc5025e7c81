"""Scoring detections against ground truth.

Atomic events match one-to-one within a frame tolerance.
Interval events match one-to-one by intersection over union, highest first.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .trace import AtomicEvent, EventLog, IntervalEvent

ATOMIC_TOLERANCE = 3
IOU_THRESHOLD = 0.2


@dataclass(frozen=True)
class EvalConfig:
    tolerance: int = ATOMIC_TOLERANCE
    iou_threshold: float = IOU_THRESHOLD
    atomic_types: tuple[str, ...] | None = None    # None scores every type present
    complex_types: tuple[str, ...] | None = None


@dataclass(frozen=True)
class TypeScore:
    event_type: str
    level: str
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f_score(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {**asdict(self), "precision": self.precision, "recall": self.recall,
                "f_score": self.f_score}


@dataclass(frozen=True)
class MetricsReport:
    scores: tuple[TypeScore, ...] = field(default_factory=tuple)

    def __getitem__(self, event_type: str) -> TypeScore:
        for s in self.scores:
            if s.event_type == event_type:
                return s
        raise KeyError(event_type)

    def __contains__(self, event_type: str) -> bool:
        return any(s.event_type == event_type for s in self.scores)

    def level(self, level: str) -> list[TypeScore]:
        return [s for s in self.scores if s.level == level]

    def macro(self, level: str | None = None) -> dict[str, float]:
        ss = [s for s in self.scores if level is None or s.level == level]
        if not ss:
            return {"precision": 0.0, "recall": 0.0, "f_score": 0.0}
        n = len(ss)
        return {"precision": sum(s.precision for s in ss) / n,
                "recall": sum(s.recall for s in ss) / n,
                "f_score": sum(s.f_score for s in ss) / n}

    def to_json(self) -> str:
        return json.dumps({"types": [s.to_dict() for s in self.scores],
                           "macro": {"atomic": self.macro("atomic"),
                                     "complex": self.macro("complex"),
                                     "all": self.macro()}}, indent=2)

    def to_table(self) -> str:
        head = f"{'event type':<24}{'level':<9}{'TP':>5}{'FP':>5}{'FN':>5}{'P':>8}{'R':>8}{'F':>8}"
        lines = [head, "-" * len(head)]
        for s in self.scores:
            lines.append(f"{s.event_type:<24}{s.level:<9}{s.tp:>5}{s.fp:>5}{s.fn:>5}"
                         f"{s.precision:>8.3f}{s.recall:>8.3f}{s.f_score:>8.3f}")
        lines.append("-" * len(head))
        for lv in ("atomic", "complex"):
            if self.level(lv):
                m = self.macro(lv)
                lines.append(f"{'macro ' + lv:<33}{'':>15}{m['precision']:>8.3f}"
                             f"{m['recall']:>8.3f}{m['f_score']:>8.3f}")
        return "\n".join(lines)


def match_atomic(detected: Sequence[AtomicEvent], truth: Sequence[AtomicEvent],
                 tolerance: int = ATOMIC_TOLERANCE) -> list[tuple[int, int]]:
    """One-to-one matching of same-type events with ``|Δt| <= tolerance``.

    Maximises the number of matched pairs, then prefers the smallest total
    ``|Δt|``.  Plain closest-first greedy can leave a truth event unmatched
    that an alternative pairing would cover.  Returns ``(i_detected, j_truth)``.
    """
    pairs: list[tuple[int, int]] = []
    by_type: dict[str, tuple[list, list]] = defaultdict(lambda: ([], []))
    for i, d in enumerate(detected):
        by_type[d.event_type][0].append((d.t, i))
    for j, g in enumerate(truth):
        by_type[g.event_type][1].append((g.t, j))
    for ds, gs in by_type.values():
        for cd, cg in _clusters(ds, gs, tolerance):
            pairs += _assign(cd, cg, tolerance)
    return sorted(pairs)


def _clusters(ds, gs, tolerance):
    # events further apart than the tolerance never interact
    pts = sorted([(t, 0, i) for t, i in ds] + [(t, 1, j) for t, j in gs])
    group: list = []
    for p in pts:
        if group and p[0] - group[-1][0] > tolerance:
            yield _split(group)
            group = []
        group.append(p)
    if group:
        yield _split(group)


def _split(group):
    return ([(t, i) for t, k, i in group if k == 0], [(t, j) for t, k, j in group if k == 1])


def _assign(ds, gs, tolerance):
    if not ds or not gs:
        return []
    dt = np.abs(np.array([t for t, _ in ds], float)[:, None] - np.array([t for t, _ in gs], float))
    ok = dt <= tolerance
    # every feasible edge outweighs any sum of |Δt| tie-breaks
    big = (tolerance + 1) * (min(len(ds), len(gs)) + 1)
    rows, cols = linear_sum_assignment(np.where(ok, dt - big, 0.0))
    return [(ds[r][1], gs[c][1]) for r, c in zip(rows, cols) if ok[r, c]]


def interval_iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    inter = min(a[1], b[1]) - max(a[0], b[0]) + 1
    if inter <= 0:
        return 0.0
    union = (a[1] - a[0] + 1) + (b[1] - b[0] + 1) - inter
    return inter / union


def match_intervals(detected: Sequence[IntervalEvent], truth: Sequence[IntervalEvent],
                    threshold: float = IOU_THRESHOLD) -> list[tuple[int, int]]:
    """Greedy one-to-one matching of same-type intervals by decreasing IoU."""
    cands = []
    for i, d in enumerate(detected):
        for j, g in enumerate(truth):
            if d.event_type != g.event_type:
                continue
            iou = interval_iou((d.start, d.end), (g.start, g.end))
            if iou >= threshold:
                cands.append((-iou, g.start, d.start, i, j))
    cands.sort()
    used_d, used_g, pairs = set(), set(), []
    for _, _, _, i, j in cands:
        if i not in used_d and j not in used_g:
            used_d.add(i)
            used_g.add(j)
            pairs.append((i, j))
    return sorted(pairs)


def _score(level: str, detected, truth, types: Iterable[str] | None, matcher) -> list[TypeScore]:
    det, gt = defaultdict(list), defaultdict(list)
    for e in detected:
        det[e.event_type].append(e)
    for e in truth:
        gt[e.event_type].append(e)
    names = sorted(set(det) | set(gt)) if types is None else list(types)
    out = []
    for t in names:
        tp = len(matcher(det[t], gt[t]))
        out.append(TypeScore(t, level, tp, len(det[t]) - tp, len(gt[t]) - tp))
    return out


def evaluate(detected: EventLog, truth: EventLog, config: EvalConfig = EvalConfig()) -> MetricsReport:
    atomic = _score("atomic", detected.atomic, truth.atomic, config.atomic_types,
                    lambda d, g: match_atomic(d, g, config.tolerance))
    complex_ = _score("complex", detected.complex, truth.complex, config.complex_types,
                      lambda d, g: match_intervals(d, g, config.iou_threshold))
    return MetricsReport(tuple(atomic + complex_))
