"""Acceptance gate: one PASS/FAIL line per criterion, summarised at the end of the run."""

import os
import time

import numpy as np
import pytest

from soccer_cep.atomic import RULES, detect_atomic
from soccer_cep.dsl import builtin_rules
from soccer_cep.evaluation import evaluate, interval_iou, match_atomic
from soccer_cep.optimizer import (Gene, GeneSpace, SPEA2Config, hypervolume_2d, nondominated,
                                  spea2)
from soccer_cep.reference import detect_reference
from soccer_cep.scenario import (NoiseSpec, add_noise, generate_scenario, generate_sequence,
                                 scenario_suite)
from soccer_cep.spatial import SpatialContext
from soccer_cep.temporal import detect_complex
from soccer_cep.trace import (ATOMIC_TYPES, COMPLEX_TYPES, AtomicEvent, EventLog, load_events,
                              load_trace)
from soccer_cep.tuning import OptimizerConfig, run_optimization


@pytest.fixture(scope="module")
def suite_run():
    t0 = time.perf_counter()
    specs = scenario_suite(224, seed=0)
    trace, truth, _ = generate_sequence(specs)
    atoms = detect_atomic(trace)
    ctx = SpatialContext.from_trace(trace)
    complex_ = detect_complex(atoms, builtin_rules(), ctx)
    report = evaluate(EventLog(tuple(atoms), tuple(complex_)), truth)
    elapsed = time.perf_counter() - t0
    return dict(specs=specs, trace=trace, truth=truth, atoms=atoms, ctx=ctx,
                complex=complex_, report=report, elapsed=elapsed)


def test_1_oracle_equivalence(suite_run, acceptance):
    rep, truth = suite_run["report"], suite_run["truth"]
    present = {e.event_type for e in truth.atomic} | {e.event_type for e in truth.complex}
    missing = (set(ATOMIC_TYPES) | set(COMPLEX_TYPES)) - present
    worst = min(min(s.precision, s.recall) for s in rep.scores)
    ok = (len(suite_run["specs"]) >= 200 and not missing and worst == 1.0
          and suite_run["elapsed"] < 30.0)
    acceptance(1, ok, f"{len(suite_run['specs'])} scenarios, {len(rep.scores)} types, "
                      f"min P/R {worst:.3f}, missing {sorted(missing)}, {suite_run['elapsed']:.1f}s < 30s")
    assert ok, rep.to_table()


def test_2_dsl_matches_reference(suite_run, acceptance):
    ref = {e.key() for e in detect_reference(suite_run["atoms"], suite_run["ctx"])}
    dsl = {e.key() for e in suite_run["complex"]}
    diff = ref ^ dsl
    ok = not diff and len(dsl) > 0
    acceptance(2, ok, f"{len(dsl)} complex events, {len(diff)} mismatches")
    assert ok, sorted(diff)[:10]


SCHAFFER_HV = 40 / 3


def test_3_spea2_on_schaffer(acceptance):
    space = GeneSpace((Gene("x", 0.0, 2.0, 0.01),))

    def objectives(genomes):
        x = np.array([g.genes[0] for g in genomes])
        return np.stack([4 - x ** 2, 4 - (x - 2) ** 2], 1)

    dominated_at = []

    def check(gen, archive):
        if len(nondominated(archive.objectives)) != len(archive):
            dominated_at.append(gen)

    t0 = time.perf_counter()
    archive, _ = spea2(space, objectives, SPEA2Config(population=200, archive=100, generations=50,
                                                     seed=0), check)
    elapsed = time.perf_counter() - t0
    hv = hypervolume_2d(archive.objectives, (0.0, 0.0))
    ok = hv >= 0.95 * SCHAFFER_HV and not dominated_at and elapsed < 60.0
    acceptance(3, ok, f"hypervolume {hv:.3f} / {SCHAFFER_HV:.3f} ({hv / SCHAFFER_HV:.1%}), "
                      f"dominated members at generations {dominated_at}, {elapsed:.1f}s < 60s")
    assert ok


def test_4_optimization_lift(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    traces, truths = [], []
    # scenarios stay separate traces: concatenation makes the ball jump at the seams
    for spec in scenario_suite(56, seed=1):
        trace, log = generate_scenario(spec)
        traces.append(add_noise(trace, NoiseSpec(0.3), rng))
        truths.append(log)
    config = OptimizerConfig(population=40, archive=20, generations=15, smooth=9, seed=0)
    result = run_optimization(traces, truths, config)
    elapsed = time.perf_counter() - t0
    best = result.f_scores(result.archive.genomes)
    start = result.f_scores(result.initial_population()).mean(axis=1)
    lift = best.mean(axis=1).max() - np.median(start)
    kick = best[:, RULES.index("KickingTheBall")].max()
    ok = lift >= 0.15 and kick >= 0.90 and elapsed < 600
    acceptance(4, ok, f"best macro-F {best.mean(axis=1).max():.3f} vs initial median "
                      f"{np.median(start):.3f} (lift {lift:.3f} >= 0.15), kick F {kick:.3f} >= 0.90, "
                      f"{elapsed:.0f}s < 600s")
    assert ok


def brute_force_size(det, gt, tol):
    """Exhaustive one-to-one matching: most pairs, then least total |dt|."""
    best = (0, 0)

    def walk(i, used, pairs, cost):
        nonlocal best
        if i == len(det):
            best = max(best, (pairs, -cost))
            return
        walk(i + 1, used, pairs, cost)
        for j, g in enumerate(gt):
            if j not in used and abs(det[i] - g) <= tol:
                walk(i + 1, used | {j}, pairs + 1, cost + abs(det[i] - g))

    walk(0, frozenset(), 0, 0)
    return best


def kicks(frames):
    return [AtomicEvent.make("KickingTheBall", int(t), {"KickingPlayer": 1}) for t in frames]


def test_5_evaluation_arithmetic(acceptance):
    iou = interval_iou((100, 199), (150, 249))
    rng = np.random.default_rng(2024)
    disagree = 0
    for _ in range(1000):
        det = rng.choice(40, rng.integers(0, 7), replace=False)
        gt = rng.choice(40, rng.integers(0, 7), replace=False)
        pairs = match_atomic(kicks(det), kicks(gt), 3)
        got = (len(pairs), -sum(abs(int(det[i]) - int(gt[j])) for i, j in pairs))
        disagree += got != brute_force_size(det.tolist(), gt.tolist(), 3)
    ok = abs(iou - 50 / 150) <= 1e-9 and disagree == 0
    acceptance(5, ok, f"IoU {iou:.12f} vs {50 / 150:.12f}, {disagree}/1000 matcher disagreements")
    assert ok


def test_6_chain_invariants(suite_run, acceptance):
    atoms = {a.id: a for a in suite_run["atoms"]}
    out = suite_run["complex"]
    by_type = {}
    for e in out:
        by_type.setdefault(e.event_type, []).append(e)

    def kick(e):
        return next(s for s in e.sub_events if atoms[s].event_type == "KickingTheBall")

    violations = []
    pass_kicks = {kick(e) for e in by_type.get("Pass", [])}
    for kind in ("FilteringPass", "Cross"):
        violations += [e.id for e in by_type.get(kind, []) if kick(e) not in pass_kicks]
    chains = [e for t, es in by_type.items() if t.endswith("ThenGoal") for e in es]
    for e in chains:
        last = atoms.get(e.sub_events[-1])
        if last is None or last.event_type != "Goal" or last.t != e.end:
            violations.append(e.id)
    tackles = {(e.start, e.end) for e in by_type.get("Tackle", [])}
    won = {(e.start, e.end) for e in by_type.get("WonTackle", [])}
    lost = {(e.start, e.end) for e in by_type.get("LostTackle", [])}
    if won | lost != tackles or won & lost:
        violations.append("tackle partition")
    checked = sum(len(by_type.get(k, [])) for k in ("FilteringPass", "Cross")) + len(chains) + len(tackles)
    ok = not violations and checked > 0
    acceptance(6, ok, f"{checked} chain events checked, {len(violations)} violations")
    assert ok, violations[:10]


def test_7_real_match_optional(acceptance):
    path = os.environ.get("SOCCER_MATCH")
    if not path:
        acceptance(7, None, "optional, not gating: no SoccER-format match supplied (set SOCCER_MATCH)")
        pytest.skip("no SoccER-format match supplied")
    trace = load_trace(path)
    atoms = detect_atomic(trace)
    out = detect_complex(atoms, builtin_rules(), SpatialContext.from_trace(trace))
    truth_path = os.environ.get("SOCCER_TRUTH")
    detail = f"{len(atoms)} atomic, {len(out)} complex events"
    if truth_path:
        report = evaluate(EventLog(tuple(atoms), tuple(out)), load_events(truth_path))
        print(report.to_table())
        detail += ", per-event report printed"
    acceptance(7, True, detail)
