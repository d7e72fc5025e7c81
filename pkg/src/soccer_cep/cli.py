"""Command-line pipeline: generate, detect, evaluate, optimize, stats."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .atomic import REFERENCE_PARAMS, RuleParameterSet, detect_atomic_stream
from .dsl import RuleError, builtin_rules, compile_source
from .evaluation import EvalConfig, evaluate
from .scenario import InfeasibleScript, OverlappingScenarios, add_noise, generate_match, load_script
from .spatial import SpatialContext
from .temporal import CyclicRuleSet, detect_complex, duration_stats, write_duration_csv
from .trace import (EventLog, TraceError, iter_trace_chunks, load_events, load_trace,
                    save_events, save_trace)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RULES = 4


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _need(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise DataError(f"{path}: no such file or directory")
    return p


def _read(path: str, loader):
    p = _need(path)
    try:
        return loader(p)
    except (TraceError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: {exc}") from None


# -- subcommands ----------------------------------------------------------------

def cmd_generate(a) -> None:
    script, noise, seed = _read(a.script, load_script)
    out = Path(a.output)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    try:
        if a.split:
            for i, (_, spec) in enumerate(script):
                trace, log = generate_match([(0, spec)], rng)
                trace = add_noise(trace, noise, rng)
                save_trace(trace, out / f"scenario_{i:03d}.csv")
                save_events(log, out / f"scenario_{i:03d}.jsonl")
            print(f"wrote {len(script)} scenario pairs to {out}")
            return
        trace, log = generate_match(script, rng)
        trace = add_noise(trace, noise, rng)
    except (InfeasibleScript, OverlappingScenarios) as exc:
        raise DataError(f"{a.script}: {exc}") from None
    save_trace(trace, out / "trace.csv")
    save_events(log, out / "truth.jsonl")
    print(f"wrote {len(trace)} frames, {len(log.atomic)} atomic and "
          f"{len(log.complex)} complex events to {out}")


def _rules(path: str | None):
    if path is None:
        return builtin_rules()
    source = _need(path).read_text()
    return compile_source(source)


def cmd_detect(a) -> None:
    params = _read(a.params, RuleParameterSet.load) if a.params else REFERENCE_PARAMS
    rules = _rules(a.rules)
    _need(a.trace)
    try:
        chunks = iter_trace_chunks(a.trace, size=a.chunk)
        atomics, det = detect_atomic_stream(chunks, params, keep_snapshots=True)
        first = next(iter_trace_chunks(a.trace, size=1))
    except TraceError as exc:
        raise DataError(f"{a.trace}: {exc}") from None
    ctx = SpatialContext(first.roster, det.snapshots, first.fps, first.geometry)
    complex_ = detect_complex(atomics, rules, ctx) if not a.atomic_only else []
    save_events(EventLog(tuple(atomics), tuple(complex_)), a.output)
    print(f"{len(atomics)} atomic, {len(complex_)} complex events -> {a.output}")


def cmd_evaluate(a) -> None:
    detected = _read(a.detected, load_events)
    truth = _read(a.truth, load_events)
    report = evaluate(detected, truth, EvalConfig(tolerance=a.tolerance, iou_threshold=a.iou))
    if a.output:
        Path(a.output).write_text(report.to_json() + "\n")
    print(report.to_table())


def _training_pairs(root: Path) -> list[tuple[Path, Path]]:
    pairs = []
    for csv_path in sorted(root.rglob("*.csv")):
        for cand in (csv_path.with_suffix(".jsonl"), csv_path.parent / "truth.jsonl"):
            if cand.exists():
                pairs.append((csv_path, cand))
                break
    return pairs


def cmd_optimize(a) -> None:
    from .tuning import (NoTrainingData, OptimizerConfig, archive_to_json, run_optimization,
                         write_telemetry_csv)
    config = _read(a.config, OptimizerConfig.load)
    if a.seed is not None:
        config = OptimizerConfig.from_dict({**config.to_dict(), "seed": a.seed})
    if a.workers is not None:
        config = OptimizerConfig.from_dict({**config.to_dict(), "workers": a.workers})
    pairs = _training_pairs(_need(a.train_dir))
    traces = [_read(str(t), load_trace) for t, _ in pairs]
    truths = [_read(str(g), load_events) for _, g in pairs]

    def progress(gen, archive):
        if a.verbose:
            best = archive.objectives.max(axis=0)
            print(f"generation {gen}: archive {len(archive)}, best P {best[0]:.3f} "
                  f"best R {best[1]:.3f}", file=sys.stderr)

    try:
        result = run_optimization(traces, truths, config, progress)
    except NoTrainingData as exc:
        raise DataError(f"{a.train_dir}: {exc}") from None
    Path(a.output).write_text(json.dumps(archive_to_json(result), indent=2) + "\n")
    if a.telemetry:
        write_telemetry_csv(result.telemetry, a.telemetry)
    print(f"archive of {len(result.archive)} from {len(traces)} traces -> {a.output}")


def cmd_stats(a) -> None:
    log = _read(a.events, load_events)
    stats = duration_stats(log.complex, a.fps)
    print(f"{'event type':<24}{'count':>7}{'min s':>9}{'mean s':>9}{'max s':>9}")
    for s in stats.values():
        print(f"{s.event_type:<24}{s.count:>7}{s.min_s:>9.2f}{s.mean_s:>9.2f}{s.max_s:>9.2f}")
    counts: dict[str, int] = {}
    for e in log.atomic:
        counts[e.event_type] = counts.get(e.event_type, 0) + 1
    for t, n in sorted(counts.items()):
        print(f"{t:<24}{n:>7}")
    if a.csv:
        write_duration_csv(stats, a.csv)


def cmd_params(a) -> None:
    params = REFERENCE_PARAMS
    if a.archive:
        from .tuning import load_archive
        members = _read(a.archive, load_archive)
        if not 0 <= a.member < len(members):
            raise DataError(f"{a.archive}: no member {a.member} in an archive of {len(members)}")
        params = members[a.member]
    params.save(a.output)
    print(f"wrote {a.output}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="soccer-cep", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="render a scenario script to a trace and ground truth")
    g.add_argument("script")
    g.add_argument("-o", "--output", required=True, help="output directory")
    g.add_argument("--split", action="store_true",
                   help="one trace/truth pair per scenario instead of one concatenated match")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("detect", help="stream a trace through the atomic and complex detectors")
    d.add_argument("trace")
    d.add_argument("--params", required=True, help="rule parameter set (JSON)")
    d.add_argument("--rules", help="complex rule file; builtin rules if omitted")
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--chunk", type=int, default=300, help="frames read per chunk")
    d.add_argument("--atomic-only", action="store_true")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("evaluate", help="score detected events against ground truth")
    e.add_argument("detected")
    e.add_argument("truth")
    e.add_argument("-o", "--output", help="JSON report")
    e.add_argument("--tolerance", type=int, default=3, help="atomic match window (frames)")
    e.add_argument("--iou", type=float, default=0.2, help="interval match threshold")
    e.set_defaults(func=cmd_evaluate)

    o = sub.add_parser("optimize", help="tune atomic rule parameters with SPEA2")
    o.add_argument("config")
    o.add_argument("train_dir")
    o.add_argument("-o", "--output", required=True, help="archive JSON")
    o.add_argument("--telemetry", help="per-generation gene statistics (CSV)")
    o.add_argument("--seed", type=int)
    o.add_argument("--workers", type=int)
    o.add_argument("-v", "--verbose", action="store_true")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("stats", help="duration summaries of interval events")
    s.add_argument("events")
    s.add_argument("--csv")
    s.add_argument("--fps", type=float, default=30.0)
    s.set_defaults(func=cmd_stats)

    r = sub.add_parser("params", help="write the reference parameter set or an archive member")
    r.add_argument("-o", "--output", required=True)
    r.add_argument("--archive")
    r.add_argument("--member", type=int, default=0)
    r.set_defaults(func=cmd_params)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RuleError, CyclicRuleSet) as exc:
        where = getattr(args, "rules", None) or "rules"
        print(f"error: {where}: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_RULES
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
