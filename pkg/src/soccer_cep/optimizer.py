"""SPEA2 over discretized real genes plus a Lehmer-coded permutation.

Objectives are maximized throughout. The loop is generic: it receives an
``evaluate`` callable mapping a list of genomes to an ``(n, m)`` objective
array, so the same code drives rule tuning and the analytic test problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class OutOfGrid(ValueError):
    def __init__(self, gene: str, value: float):
        super().__init__(f"gene {gene!r} value {value!r} is off its grid")
        self.gene = gene
        self.value = value


@dataclass(frozen=True)
class Gene:
    name: str
    lo: float
    hi: float
    step: float

    @property
    def levels(self) -> int:
        return int(round((self.hi - self.lo) / self.step)) + 1

    def snap(self, v: float) -> float:
        v = min(max(v, self.lo), self.hi)
        return round(self.lo + round((v - self.lo) / self.step) * self.step, 10)

    def on_grid(self, v: float) -> bool:
        if not self.lo - 1e-9 <= v <= self.hi + 1e-9:
            return False
        q = (v - self.lo) / self.step
        return abs(q - round(q)) < 1e-6

    def sample(self, rng: np.random.Generator) -> float:
        return round(self.lo + int(rng.integers(self.levels)) * self.step, 10)


@dataclass(frozen=True)
class Genome:
    genes: tuple[float, ...]
    order: tuple[int, ...] = ()     # Lehmer digits

    def key(self) -> tuple:
        return self.genes + tuple(float(d) for d in self.order)


@dataclass(frozen=True)
class GeneSpace:
    genes: tuple[Gene, ...]
    order_items: tuple[str, ...] = ()

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.genes)

    @property
    def n_slots(self) -> int:
        """Mutation slots: every real gene plus one for the order, if any."""
        return len(self.genes) + (1 if self.order_items else 0)

    def digit_bounds(self) -> tuple[int, ...]:
        n = len(self.order_items)
        return tuple(n - 1 - i for i in range(n))

    def random(self, rng: np.random.Generator) -> Genome:
        genes = tuple(g.sample(rng) for g in self.genes)
        order = tuple(int(rng.integers(b + 1)) for b in self.digit_bounds())
        return Genome(genes, order)

    def check(self, genome: Genome) -> None:
        if len(genome.genes) != len(self.genes):
            raise OutOfGrid("genes", len(genome.genes))
        for g, v in zip(self.genes, genome.genes):
            if not g.on_grid(v):
                raise OutOfGrid(g.name, v)
        if len(genome.order) != len(self.order_items):
            raise OutOfGrid("order", genome.order)
        for i, (d, b) in enumerate(zip(genome.order, self.digit_bounds())):
            if not 0 <= d <= b:
                raise OutOfGrid(f"order[{i}]", d)

    def permutation(self, genome: Genome) -> tuple[str, ...]:
        return lehmer_decode(genome.order, self.order_items)


def lehmer_decode(digits: Sequence[int], items: Sequence[str]) -> tuple[str, ...]:
    pool = list(items)
    if len(digits) != len(pool):
        raise OutOfGrid("order", tuple(digits))
    out = []
    for i, d in enumerate(digits):
        if not 0 <= d < len(pool):
            raise OutOfGrid(f"order[{i}]", d)
        out.append(pool.pop(d))
    return tuple(out)


def lehmer_encode(perm: Sequence[str], items: Sequence[str]) -> tuple[int, ...]:
    pool = list(items)
    digits = []
    for p in perm:
        i = pool.index(p)
        digits.append(i)
        pool.pop(i)
    return tuple(digits)


# -- SPEA2 fitness and selection ----------------------------------------------

def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a >= b) and np.any(a > b))


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when ``i`` dominates ``j``."""
    ge = np.all(F[:, None, :] >= F[None, :, :], axis=2)
    gt = np.any(F[:, None, :] > F[None, :, :], axis=2)
    return ge & gt


@dataclass(frozen=True)
class Fitness:
    strength: np.ndarray
    raw: np.ndarray
    density: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.raw + self.density


def spea2_fitness(F: np.ndarray) -> Fitness:
    """Strength, raw fitness and k-th nearest-neighbour density (lower is better)."""
    F = np.asarray(F, float)
    n = len(F)
    if n == 0:
        z = np.zeros(0)
        return Fitness(z, z, z)
    D = dominance_matrix(F)
    strength = D.sum(axis=1)
    raw = (D * strength[:, None]).sum(axis=0).astype(float)
    dist = np.sqrt(((F[:, None, :] - F[None, :, :]) ** 2).sum(axis=2))
    k = min(int(math.isqrt(n)), n - 1)
    if k >= 1:
        sigma = np.sort(dist, axis=1)[:, k]     # column 0 is the point itself
    else:
        sigma = np.zeros(n)
    return Fitness(strength, raw, 1.0 / (sigma + 2.0))


def environmental_selection(F: np.ndarray, size: int, fitness: Fitness | None = None) -> np.ndarray:
    """Indices of the next archive.

    Nondominated points are kept, truncated by iteratively dropping the one
    closest to its neighbours (lexicographic on sorted distances), or topped
    up with the best dominated points by fitness.
    """
    F = np.asarray(F, float)
    n = len(F)
    if n == 0 or size <= 0:
        return np.zeros(0, int)
    fit = fitness if fitness is not None else spea2_fitness(F)
    front = np.flatnonzero(fit.raw == 0)
    if len(front) <= size:
        rest = np.setdiff1d(np.arange(n), front)
        rest = rest[np.argsort(fit.value[rest], kind="stable")]
        return np.concatenate([front, rest[:size - len(front)]])
    return front[_truncate(F[front], size)]


def _truncate(P: np.ndarray, size: int) -> np.ndarray:
    dist = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    alive = np.ones(len(P), bool)
    while alive.sum() > size:
        idx = np.flatnonzero(alive)
        rows = np.sort(dist[np.ix_(idx, idx)], axis=1)
        # lexicographic minimum over the sorted distance vectors
        order = np.lexsort(rows.T[::-1])
        alive[idx[order[0]]] = False
    return np.flatnonzero(alive)


# -- variation ----------------------------------------------------------------

def blx_crossover(p1: Genome, p2: Genome, space: GeneSpace, rng: np.random.Generator,
                  alpha: float = 0.5) -> Genome:
    genes = []
    for g, a, b in zip(space.genes, p1.genes, p2.genes):
        lo, hi = min(a, b), max(a, b)
        d = hi - lo
        genes.append(g.snap(rng.uniform(lo - alpha * d, hi + alpha * d)))
    order = p1.order if rng.random() < 0.5 else p2.order
    return Genome(tuple(genes), order)


def mutate(genome: Genome, space: GeneSpace, rng: np.random.Generator,
           probability: float = 0.2, per_gene: bool = False) -> Genome:
    """Resample one uniformly chosen slot with ``probability``.

    With ``per_gene`` every slot is resampled independently instead.
    """
    n = space.n_slots
    if per_gene:
        slots = [i for i in range(n) if rng.random() < probability]
    else:
        slots = [int(rng.integers(n))] if rng.random() < probability else []
    genes = list(genome.genes)
    order = list(genome.order)
    for s in slots:
        if s < len(space.genes):
            genes[s] = space.genes[s].sample(rng)
        else:
            bounds = space.digit_bounds()
            free = [i for i, b in enumerate(bounds) if b > 0]
            i = free[int(rng.integers(len(free)))]
            order[i] = int(rng.integers(bounds[i] + 1))
    return Genome(tuple(genes), tuple(order))


def binary_tournament(fitness: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.integers(len(fitness), size=n)
    b = rng.integers(len(fitness), size=n)
    return np.where(fitness[a] <= fitness[b], a, b)


# -- main loop ----------------------------------------------------------------

@dataclass(frozen=True)
class SPEA2Config:
    population: int = 200
    archive: int = 100
    generations: int = 50
    crossover: float = 0.9
    mutation: float = 0.2
    alpha: float = 0.5
    per_gene_mutation: bool = False
    seed: int = 0


@dataclass
class GenerationRecord:
    generation: int
    gene_mean: np.ndarray
    gene_std: np.ndarray
    archive_points: np.ndarray
    population_points: np.ndarray
    population: tuple[Genome, ...] = ()


@dataclass
class Telemetry:
    gene_names: tuple[str, ...]
    records: list[GenerationRecord] = field(default_factory=list)

    def rows(self):
        for r in self.records:
            for name, m, s in zip(self.gene_names, r.gene_mean, r.gene_std):
                yield r.generation, name, float(m), float(s)


@dataclass
class Archive:
    genomes: list[Genome]
    objectives: np.ndarray

    def __len__(self) -> int:
        return len(self.genomes)


Evaluate = Callable[[list[Genome]], np.ndarray]


def spea2(space: GeneSpace, evaluate: Evaluate, config: SPEA2Config,
          on_generation: Callable[[int, Archive], None] | None = None) -> tuple[Archive, Telemetry]:
    """Run SPEA2; generation 0 is the random initial population."""
    root = np.random.SeedSequence(config.seed)
    init_rng = np.random.default_rng(root.spawn(1)[0])
    pop = [space.random(init_rng) for _ in range(config.population)]
    arch_g: list[Genome] = []
    arch_f = np.zeros((0, 0))
    tele = Telemetry(space.names)
    cache: dict[tuple, np.ndarray] = {}
    for gen in range(config.generations + 1):
        todo = [g for g in dict.fromkeys(x.key() for x in pop) if g not in cache]
        if todo:
            by_key = {x.key(): x for x in pop}
            scores = np.asarray(evaluate([by_key[k] for k in todo]), float)
            for k, s in zip(todo, scores):
                cache[k] = s
        pop_f = np.array([cache[x.key()] for x in pop])
        genes = np.array([x.genes for x in pop], float)
        union_g = pop + arch_g
        union_f = pop_f if len(arch_g) == 0 else np.vstack([pop_f, arch_f])
        fit = spea2_fitness(union_f)
        keep = environmental_selection(union_f, config.archive, fit)
        arch_g = [union_g[i] for i in keep]
        arch_f = union_f[keep]
        tele.records.append(GenerationRecord(gen, genes.mean(axis=0), genes.std(axis=0),
                                             arch_f.copy(), pop_f, tuple(pop)))
        archive = Archive(list(arch_g), arch_f.copy())
        if on_generation is not None:
            on_generation(gen, archive)
        if gen == config.generations:
            return archive, tele
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(gen + 1,)))
        arch_fit = spea2_fitness(arch_f).value
        mates = binary_tournament(arch_fit, config.population + 1, rng)
        children = []
        for i in range(config.population):
            crng = np.random.default_rng(
                np.random.SeedSequence(config.seed, spawn_key=(gen + 1, i + 1)))
            a, b = arch_g[mates[i]], arch_g[mates[i + 1]]
            child = blx_crossover(a, b, space, crng, config.alpha) \
                if crng.random() < config.crossover else a
            children.append(mutate(child, space, crng, config.mutation,
                                   config.per_gene_mutation))
        pop = children
    raise AssertionError("unreachable")


def nondominated(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, float)
    if len(F) == 0:
        return np.zeros(0, int)
    return np.flatnonzero(~dominance_matrix(F).any(axis=0))


def hypervolume_2d(F: np.ndarray, ref: Sequence[float]) -> float:
    """Area dominated by maximization points ``F`` and bounded below by ``ref``."""
    F = np.asarray(F, float)
    if len(F) == 0:
        return 0.0
    F = F[np.all(F > np.asarray(ref), axis=1)]
    if len(F) == 0:
        return 0.0
    F = F[np.argsort(-F[:, 0], kind="stable")]
    area, best_y = 0.0, ref[1]
    for x, y in F:
        if y > best_y:
            area += (x - ref[0]) * (y - best_y)
            best_y = y
    return float(area)
