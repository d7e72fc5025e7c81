import csv
import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from soccer_cep.atomic import REFERENCE_PARAMS, RULES, detect_atomic
from soccer_cep.evaluation import EvalConfig, evaluate
from soccer_cep.optimizer import (Gene, GeneSpace, Genome, OutOfGrid, SPEA2Config, blx_crossover,
                                  dominates, environmental_selection, hypervolume_2d, lehmer_decode,
                                  lehmer_encode, mutate, nondominated, spea2, spea2_fitness)
from soccer_cep.scenario import ScenarioSpec, generate_scenario
from soccer_cep.trace import EventLog
from soccer_cep.tuning import (NoArchive, NoTrainingData, OptimizerConfig, archive_to_json,
                               best_per_event, decode, encode, gene_space, load_archive,
                               run_optimization, write_telemetry_csv)

SPACE = gene_space()


# -- encoding -----------------------------------------------------------------

def test_lehmer_zero_is_identity():
    assert lehmer_decode([0, 0, 0, 0], RULES) == RULES


def test_lehmer_first_digit_swaps():
    assert lehmer_decode([1, 0, 0, 0], RULES) == (RULES[1], RULES[0]) + RULES[2:]


def test_lehmer_covers_all_orders():
    codes = list(itertools.product(range(4), range(3), range(2), range(1)))
    perms = {lehmer_decode(c, RULES) for c in codes}
    assert perms == set(itertools.permutations(RULES))
    assert all(lehmer_encode(lehmer_decode(c, RULES), RULES) == c for c in codes)


def test_window_off_grid():
    genome = encode(REFERENCE_PARAMS, SPACE)
    i = SPACE.names.index("kick.window")
    bad = Genome(genome.genes[:i] + (31.0,) + genome.genes[i + 1:], genome.order)
    with pytest.raises(OutOfGrid) as err:
        decode(bad, SPACE)
    assert err.value.gene == "kick.window"


def test_lehmer_digit_off_bound():
    genome = encode(REFERENCE_PARAMS, SPACE)
    with pytest.raises(OutOfGrid):
        SPACE.check(Genome(genome.genes, (0, 3, 0, 0)))


def test_sixteen_genes_and_seventeen_slots():
    assert len(SPACE.genes) == 16 and SPACE.n_slots == 17
    assert len(gene_space(full_genes=True).genes) == 20


def test_decode_encode_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = SPACE.random(rng)
        assert encode(decode(g, SPACE), SPACE) == g
    assert decode(encode(REFERENCE_PARAMS, SPACE), SPACE) == REFERENCE_PARAMS


# -- fitness and selection ----------------------------------------------------

def brute_raw(F):
    n = len(F)
    s = [sum(dominates(F[i], F[j]) for j in range(n)) for i in range(n)]
    return [sum(s[j] for j in range(n) if dominates(F[j], F[i])) for i in range(n)]


def test_fitness_example():
    fit = spea2_fitness(np.array([[0.9, 0.5], [0.5, 0.9], [0.4, 0.4]]))
    assert fit.strength.tolist() == [1, 1, 0]
    assert fit.raw.tolist() == [0, 0, 2]


def test_identical_points_are_all_nondominated():
    assert spea2_fitness(np.full((5, 2), 0.3)).raw.tolist() == [0] * 5


def test_two_points():
    assert spea2_fitness(np.array([[1.0, 1.0], [0.5, 0.5]])).raw.tolist() == [0, 1]


points = st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=2, max_size=12)


@given(points)
def test_raw_fitness_matches_brute_force(pts):
    F = np.array(pts, float)
    raw = spea2_fitness(F).raw
    assert raw.tolist() == brute_raw(F)
    front = set(nondominated(F).tolist())
    assert {i for i in range(len(F)) if raw[i] == 0} == front


def test_selection_fills_from_dominated():
    rng = np.random.default_rng(0)
    F = np.vstack([[[1.0, 0.0], [0.0, 1.0], [0.6, 0.6]], rng.uniform(0, 0.5, (200, 2))])
    keep = environmental_selection(F, 100)
    assert len(keep) == 100 and {0, 1, 2} <= set(keep.tolist())


def naive_truncate(P, size):
    # same arithmetic as the library so exact ties resolve identically
    dist = lambda i, j: float(np.sqrt(((P[i] - P[j]) ** 2).sum()))
    alive = list(range(len(P)))
    while len(alive) > size:
        vecs = {i: sorted(dist(i, j) for j in alive if j != i) for i in alive}
        alive.remove(min(alive, key=lambda i: (vecs[i], i)))
    return alive


def test_truncation_keeps_extremes():
    x = np.sort(np.random.default_rng(1).uniform(0, 1, 150))
    F = np.stack([x, 1 - x ** 2], 1)
    keep = environmental_selection(F, 100)
    assert len(keep) == 100
    assert {0, 149} <= set(keep.tolist())
    assert sorted(keep.tolist()) == naive_truncate(F, 100)


grid_xs = st.lists(st.integers(0, 1000).map(lambda v: v / 1000), min_size=5, max_size=25, unique=True)


@given(grid_xs, st.integers(2, 5))
@settings(max_examples=30, deadline=None)
def test_truncation_matches_simulation(xs, size):
    x = np.array(sorted(xs))
    F = np.stack([x, 1 - x], 1)
    assert sorted(environmental_selection(F, size).tolist()) == naive_truncate(F, size)


def test_empty_selection():
    assert environmental_selection(np.zeros((0, 2)), 100).tolist() == []


# -- variation ----------------------------------------------------------------

WIDE = GeneSpace((Gene("g", 0.0, 4.0, 0.01), Gene("w", 3, 30, 1)))


def test_blx_support():
    rng = np.random.default_rng(0)
    kids = [blx_crossover(Genome((1.0, 3.0)), Genome((2.0, 30.0)), WIDE, rng).genes for _ in range(10_000)]
    g = np.array([k[0] for k in kids])
    assert g.min() >= 0.5 and g.max() <= 2.5
    assert g.min() < 0.52 and g.max() > 2.48
    assert {k[1] for k in kids} == set(range(3, 31))


def test_blx_identical_parents():
    rng = np.random.default_rng(0)
    p = SPACE.random(rng)
    assert blx_crossover(p, p, SPACE, rng).genes == p.genes


def test_blx_order_from_a_parent():
    rng = np.random.default_rng(2)
    a, b = Genome(SPACE.random(rng).genes, (0, 0, 0, 0)), Genome(SPACE.random(rng).genes, (3, 2, 1, 0))
    orders = {blx_crossover(a, b, SPACE, rng).order for _ in range(200)}
    assert orders == {a.order, b.order}


def test_zero_mutation_is_identity():
    rng = np.random.default_rng(0)
    g = SPACE.random(rng)
    assert all(mutate(g, SPACE, rng, 0.0) == g for _ in range(100))


def test_mutation_picks_slots_uniformly():
    # an observed change reveals the slot; a resample may land on the old value
    rng = np.random.default_rng(11)
    stay = [1 / g.levels for g in SPACE.genes]
    stay.append(np.mean([1 / (b + 1) for b in SPACE.digit_bounds() if b > 0]))
    n = 10_000
    seen = np.zeros(SPACE.n_slots + 1)
    for _ in range(n):
        g = SPACE.random(rng)
        m = mutate(g, SPACE, rng, 1.0)
        diff = [i for i, (a, b) in enumerate(zip(g.genes, m.genes)) if a != b]
        if m.order != g.order:
            diff.append(SPACE.n_slots - 1)
        assert len(diff) <= 1
        seen[diff[0] if diff else -1] += 1
    p = np.array([(1 - s) / SPACE.n_slots for s in stay])
    expected = n * np.append(p, 1 - p.sum())
    assert chisquare(seen, expected).pvalue > 1e-3


@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 1), st.booleans())
@settings(max_examples=50, deadline=None)
def test_grid_closure(seed, prob, per_gene):
    rng = np.random.default_rng(seed)
    a, b = SPACE.random(rng), SPACE.random(rng)
    child = mutate(blx_crossover(a, b, SPACE, rng), SPACE, rng, prob, per_gene)
    SPACE.check(child)


# -- the generational loop on an analytic problem -----------------------------

X = GeneSpace((Gene("x", 0.0, 2.0, 0.01),))
SCHAFFER_HV = 4 * 4 - 8 / 3     # area under 4 - (2 - sqrt(4 - f1))^2 over f1 in [0, 4]


def schaffer(genomes):
    x = np.array([g.genes[0] for g in genomes])
    return np.stack([4 - x ** 2, 4 - (x - 2) ** 2], 1)


def test_schaffer_hypervolume_constant():
    xs = np.linspace(0, 2, 200_001)
    F = schaffer([Genome((x,)) for x in xs])
    assert hypervolume_2d(F, (0, 0)) == pytest.approx(SCHAFFER_HV, rel=1e-4)


def test_same_seed_same_run():
    cfg = SPEA2Config(population=20, archive=10, generations=5, seed=4)
    a, ta = spea2(SPACE, lambda gs: np.array([[sum(g.genes), -sum(g.order)] for g in gs]), cfg)
    b, tb = spea2(SPACE, lambda gs: np.array([[sum(g.genes), -sum(g.order)] for g in gs]), cfg)
    assert a.genomes == b.genomes and np.array_equal(a.objectives, b.objectives)
    assert all(np.array_equal(r.gene_mean, s.gene_mean) and np.array_equal(r.gene_std, s.gene_std)
               for r, s in zip(ta.records, tb.records))


def test_zero_generations_selects_initial_population():
    cfg = SPEA2Config(population=30, archive=10, generations=0, seed=1)
    arch, tele = spea2(X, schaffer, cfg)
    assert len(tele.records) == 1
    pop = list(tele.records[0].population)
    keep = environmental_selection(schaffer(pop), 10)
    assert arch.genomes == [pop[i] for i in keep]


def test_archive_nondominated_every_generation():
    fronts = []
    spea2(X, schaffer, SPEA2Config(population=40, archive=20, generations=10, seed=2),
          lambda gen, arch: fronts.append(len(nondominated(arch.objectives)) == len(arch)))
    assert len(fronts) == 11 and all(fronts)


def test_hypervolume_grows():
    curves = []
    for seed in range(5):
        hv = []
        spea2(X, schaffer, SPEA2Config(population=30, archive=15, generations=15, seed=seed),
              lambda gen, arch: hv.append(hypervolume_2d(arch.objectives, (0, 0))))
        curves.append(hv)
    med = np.median(np.array(curves), axis=0)
    assert np.all(np.diff(med) >= -0.01 * SCHAFFER_HV)
    assert med[-1] > med[0]


# -- rule tuning ----------------------------------------------------------------

@pytest.fixture(scope="module")
def training():
    plays = [ScenarioSpec("Pass", seed=21), ScenarioSpec("Tackle", "won", seed=22),
             ScenarioSpec("Shot", "Saved", seed=23)]
    pairs = [generate_scenario(s) for s in plays]
    return [t for t, _ in pairs], [log for _, log in pairs]


TINY = OptimizerConfig(population=6, archive=4, generations=2, seed=5)


def test_no_training_data():
    with pytest.raises(NoTrainingData):
        run_optimization([], [], TINY)


def test_parallel_matches_serial(training):
    serial = run_optimization(*training, TINY)
    par = run_optimization(*training, OptimizerConfig(**{**TINY.to_dict(), "workers": 2}))
    assert serial.archive.genomes == par.archive.genomes
    assert np.array_equal(serial.archive.objectives, par.archive.objectives)


def test_telemetry_and_outputs(training, tmp_path):
    res = run_optimization(*training, TINY)
    assert [r.generation for r in res.telemetry.records] == [0, 1, 2]
    write_telemetry_csv(res.telemetry, tmp_path / "t.csv")
    rows = list(csv.DictReader(open(tmp_path / "t.csv")))
    assert len(rows) == 3 * 16 and set(rows[0]) == {"generation", "gene", "mean", "std"}
    (tmp_path / "a.json").write_text(json.dumps(archive_to_json(res)))
    loaded = load_archive(tmp_path / "a.json")
    assert loaded == [decode(g, res.space) for g in res.archive.genomes]


def test_config_file(tmp_path):
    TINY.save(tmp_path / "c.json")
    assert OptimizerConfig.load(tmp_path / "c.json") == TINY
    with pytest.raises(ValueError):
        OptimizerConfig.from_dict({"populaton": 5})


def per_type_f(params, traces, truths):
    cfg = EvalConfig(atomic_types=RULES, complex_types=())
    tp, fp, fn = (np.zeros(4) for _ in range(3))
    for trace, truth in zip(traces, truths):
        rep = evaluate(EventLog(detect_atomic(trace, params), ()), EventLog(truth.atomic, ()), cfg)
        for j, r in enumerate(RULES):
            tp[j] += rep[r].tp
            fp[j] += rep[r].fp
            fn[j] += rep[r].fn
    return np.where(tp > 0, 2 * tp / np.maximum(2 * tp + fp + fn, 1), 0.0)


def test_best_per_event_scan(training):
    traces, truths = training
    rng = np.random.default_rng(8)
    genomes = [encode(REFERENCE_PARAMS, SPACE)] + [SPACE.random(rng) for _ in range(6)]
    fs = np.array([per_type_f(decode(g, SPACE), traces, truths) for g in genomes])
    best = best_per_event(genomes, traces, truths, SPACE)
    for j, r in enumerate(RULES):
        assert fs[genomes.index(best[r]), j] == fs[:, j].max()


def test_best_per_event_single_member(training):
    g = encode(REFERENCE_PARAMS, SPACE)
    assert set(best_per_event([g], *training, SPACE).values()) == {g}


def test_best_per_event_empty(training):
    with pytest.raises(NoArchive):
        best_per_event([], *training, SPACE)
