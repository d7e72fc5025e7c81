"""Tuning atomic rule parameters with SPEA2.

The genome holds the thresholds each rule actually reads (12) plus one
window per rule; ``full_genes`` switches to all four thresholds per rule (20).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .atomic import REFERENCE_PARAMS, RULES, RuleParameterSet, RuleThresholds, detect_atomic
from .evaluation import ATOMIC_TOLERANCE, EvalConfig, evaluate
from .features import frame_features
from .optimizer import (Archive, Gene, GeneSpace, Genome, SPEA2Config, Telemetry,
                        lehmer_encode, spea2)
from .trace import EventLog, Trace


class NoTrainingData(ValueError):
    pass


class NoArchive(ValueError):
    pass


_FIELDS = {"KickingTheBall": "kicking", "BallPossession": "possession",
           "Tackle": "tackle", "BallDeflection": "deflection"}
_SHORT = {"KickingTheBall": "kick", "BallPossession": "poss",
          "Tackle": "tackle", "BallDeflection": "defl"}
# thresholds read by each rule
_USED = {"KickingTheBall": ("inner_distance", "speed", "acceleration"),
         "BallPossession": ("inner_distance", "outer_distance", "speed"),
         "Tackle": ("inner_distance", "outer_distance", "speed"),
         "BallDeflection": ("inner_distance", "speed", "acceleration")}
_ALL = ("inner_distance", "outer_distance", "speed", "acceleration")

DEFAULT_GRIDS = {
    "inner_distance": (0.1, 2.0, 0.1),
    "outer_distance": (0.1, 2.0, 0.1),
    "speed": (1.0, 15.0, 1.0),
    "acceleration": (1.0, 30.0, 1.0),
    "window": (3.0, 30.0, 1.0),
}


def gene_space(full_genes: bool = False, grids: Mapping[str, Sequence[float]] | None = None) -> GeneSpace:
    grids = {**DEFAULT_GRIDS, **(grids or {})}
    genes = []
    for rule in RULES:
        for th in (_ALL if full_genes else _USED[rule]) + ("window",):
            lo, hi, step = grids[th]
            genes.append(Gene(f"{_SHORT[rule]}.{th}", float(lo), float(hi), float(step)))
    return GeneSpace(tuple(genes), RULES)


def decode(genome: Genome, space: GeneSpace, smooth: int = 1,
           base: RuleParameterSet = REFERENCE_PARAMS) -> RuleParameterSet:
    """Genome to parameter set; unencoded thresholds keep ``base`` values."""
    space.check(genome)
    values = dict(zip(space.names, genome.genes))
    rules = {}
    for rule in RULES:
        r = base.rule(rule)
        kw = {}
        for th in _ALL + ("window",):
            v = values.get(f"{_SHORT[rule]}.{th}")
            if v is not None:
                kw[th] = int(round(v)) if th == "window" else float(v)
        rules[_FIELDS[rule]] = replace(r, **kw)
    return replace(base, **rules, order=space.permutation(genome), smooth=smooth)


def encode(params: RuleParameterSet, space: GeneSpace) -> Genome:
    genes = []
    for name, g in zip(space.names, space.genes):
        short, th = name.split(".")
        rule = next(r for r, s in _SHORT.items() if s == short)
        genes.append(g.snap(float(getattr(params.rule(rule), th))))
    return Genome(tuple(genes), lehmer_encode(params.order, space.order_items))


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 200
    archive: int = 100
    generations: int = 50
    crossover: float = 0.9
    mutation: float = 0.2
    alpha: float = 0.5
    per_gene_mutation: bool = False
    full_genes: bool = False
    smooth: int = 1
    tolerance: int = ATOMIC_TOLERANCE
    weights: dict[str, float] = field(default_factory=lambda: {r: 1.0 for r in RULES})
    grids: dict[str, list[float]] = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_GRIDS.items()})
    workers: int = 1
    seed: int = 0

    def spea2(self) -> SPEA2Config:
        return SPEA2Config(self.population, self.archive, self.generations, self.crossover,
                           self.mutation, self.alpha, self.per_gene_mutation, self.seed)

    def space(self) -> GeneSpace:
        return gene_space(self.full_genes, self.grids)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "OptimizerConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown optimizer config keys: {sorted(extra)}")
        kw = dict(d)
        if "grids" in kw:
            kw["grids"] = {**{k: list(v) for k, v in DEFAULT_GRIDS.items()}, **kw["grids"]}
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "OptimizerConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


# -- objectives ---------------------------------------------------------------

@dataclass(frozen=True)
class Counts:
    """Pooled TP/FP/FN per atomic type for one parameter set."""
    tp: tuple[int, ...]
    fp: tuple[int, ...]
    fn: tuple[int, ...]

    def precision(self) -> np.ndarray:
        tp, fp = np.array(self.tp, float), np.array(self.fp, float)
        return np.divide(tp, tp + fp, out=np.zeros_like(tp), where=tp + fp > 0)

    def recall(self) -> np.ndarray:
        tp, fn = np.array(self.tp, float), np.array(self.fn, float)
        return np.divide(tp, tp + fn, out=np.zeros_like(tp), where=tp + fn > 0)

    def f_score(self) -> np.ndarray:
        p, r = self.precision(), self.recall()
        return np.divide(2 * p * r, p + r, out=np.zeros_like(p), where=p + r > 0)


class AtomicObjective:
    """Weighted mean precision and recall over the parameterized atomic types."""

    def __init__(self, traces: Sequence[Trace], truths: Sequence[EventLog],
                 space: GeneSpace, smooth: int = 1, tolerance: int = ATOMIC_TOLERANCE,
                 weights: Mapping[str, float] | None = None):
        if not traces or len(traces) != len(truths):
            raise NoTrainingData("need at least one trace with matching ground truth")
        self.traces = list(traces)
        self.truths = list(truths)
        self.space = space
        self.smooth = smooth
        self.tolerance = tolerance
        w = np.array([(weights or {}).get(r, 1.0) for r in RULES], float)
        self.weights = w / w.sum()
        self._features = [None] * len(self.traces)

    def features(self, i: int):
        if self._features[i] is None:
            self._features[i] = frame_features(self.traces[i], self.smooth)
        return self._features[i]

    def counts(self, params: RuleParameterSet) -> Counts:
        cfg = EvalConfig(tolerance=self.tolerance, atomic_types=RULES, complex_types=())
        tp = np.zeros(len(RULES), int)
        fp = np.zeros(len(RULES), int)
        fn = np.zeros(len(RULES), int)
        for i, (trace, truth) in enumerate(zip(self.traces, self.truths)):
            det = detect_atomic(trace, params, features=self.features(i))
            rep = evaluate(EventLog(det, ()), EventLog(truth.atomic, ()), cfg)
            for j, r in enumerate(RULES):
                s = rep[r]
                tp[j] += s.tp
                fp[j] += s.fp
                fn[j] += s.fn
        return Counts(tuple(tp.tolist()), tuple(fp.tolist()), tuple(fn.tolist()))

    def point(self, c: Counts) -> np.ndarray:
        return np.array([self.weights @ c.precision(), self.weights @ c.recall()])

    def genome_counts(self, genome: Genome) -> Counts:
        return self.counts(decode(genome, self.space, self.smooth))

    def __call__(self, genome: Genome) -> np.ndarray:
        return self.point(self.genome_counts(genome))


_WORKER: AtomicObjective | None = None


def _init_worker(obj: AtomicObjective) -> None:
    global _WORKER
    _WORKER = obj


def _work(genome: Genome) -> Counts:
    return _WORKER.genome_counts(genome)


@dataclass
class OptimizationResult:
    archive: Archive
    telemetry: Telemetry
    counts: dict[tuple, Counts]
    space: GeneSpace
    config: OptimizerConfig

    def initial_population(self) -> tuple[Genome, ...]:
        return self.telemetry.records[0].population

    def f_scores(self, genomes) -> np.ndarray:
        """Per-type training F of already evaluated genomes, shape (n, 4)."""
        return np.array([self.counts[g.key()].f_score() for g in genomes]).reshape(-1, len(RULES))


def run_optimization(traces: Sequence[Trace], truths: Sequence[EventLog],
                     config: OptimizerConfig = OptimizerConfig(),
                     on_generation: Callable[[int, Archive], None] | None = None) -> OptimizationResult:
    space = config.space()
    objective = AtomicObjective(traces, truths, space, config.smooth, config.tolerance, config.weights)
    counts: dict[tuple, Counts] = {}
    pool = None
    if config.workers > 1:
        pool = ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(objective,))

    def evaluate_batch(genomes: list[Genome]) -> np.ndarray:
        if pool is None:
            cs = [objective.genome_counts(g) for g in genomes]
        else:
            cs = list(pool.map(_work, genomes, chunksize=max(1, len(genomes) // (4 * config.workers))))
        for g, c in zip(genomes, cs):
            counts[g.key()] = c
        return np.array([objective.point(c) for c in cs])

    try:
        archive, telemetry = spea2(space, evaluate_batch, config.spea2(), on_generation)
    finally:
        if pool is not None:
            pool.shutdown()
    return OptimizationResult(archive, telemetry, counts, space, config)


def best_per_event(archive: Archive | Sequence[Genome], traces: Sequence[Trace],
                   truths: Sequence[EventLog], space: GeneSpace, smooth: int = 1,
                   tolerance: int = ATOMIC_TOLERANCE) -> dict[str, Genome]:
    """Archive member with the highest F per atomic type; ties go to macro-F."""
    genomes = list(archive.genomes if isinstance(archive, Archive) else archive)
    if not genomes:
        raise NoArchive("archive is empty")
    objective = AtomicObjective(traces, truths, space, smooth, tolerance)
    fs = np.array([objective.genome_counts(g).f_score() for g in genomes])
    macro = fs.mean(axis=1)
    out = {}
    for j, rule in enumerate(RULES):
        best = max(range(len(genomes)), key=lambda i: (fs[i, j], macro[i], -i))
        out[rule] = genomes[best]
    return out


# -- output -------------------------------------------------------------------

def write_telemetry_csv(telemetry: Telemetry, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "gene", "mean", "std"])
        for gen, name, m, s in telemetry.rows():
            w.writerow([gen, name, f"{m:.6g}", f"{s:.6g}"])


def archive_to_json(result: OptimizationResult) -> dict:
    members = []
    for g, point in zip(result.archive.genomes, result.archive.objectives):
        params = decode(g, result.space, result.config.smooth)
        c = result.counts.get(g.key())
        members.append({
            "genes": dict(zip(result.space.names, g.genes)),
            "lehmer": list(g.order),
            "objectives": {"precision": float(point[0]), "recall": float(point[1])},
            "f_score": None if c is None else dict(zip(RULES, c.f_score().round(6).tolist())),
            "params": params.to_dict(),
        })
    return {"config": result.config.to_dict(), "members": members}


def load_archive(path: str | Path) -> list[RuleParameterSet]:
    data = json.loads(Path(path).read_text())
    return [RuleParameterSet.from_dict(m["params"]) for m in data["members"]]
