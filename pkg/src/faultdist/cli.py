"""Command-line front end: generate, build, query, verify, bench.

Exit codes: 0 for success, 2 when a campaign crosses its thresholds
(a soundness violation or too many stretch misses), 3 when a build or
run blows its configured budget, and 1 for bad inputs or unreadable
files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .campaign import (
    ExperimentConfig,
    Thresholds,
    Workload,
    run_campaign,
)
from .dso import preprocess
from .forest import MemoryBudgetError
from .generators import generate
from .graphs import INF, FailureSet, dump_dimacs
from .reference import exact_replacement
from .serialize import OracleFormatError, load_oracle, read_header, save_oracle

_CONFIG_FIELDS = ("graph", "f", "alpha", "eps", "seed", "component",
                  "L_override", "lam_override", "c_forest", "c_hit",
                  "c_ball", "short_circuit")
_WORKLOAD_FIELDS = ("queries", "fail_min", "fail_max",
                    "distinct_endpoints")
_THRESHOLD_FIELDS = ("max_stretch_violation_rate", "budget_words",
                     "time_budget_s")


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="er(n,p) | grid(w,h) | rgg(n,r) | "
                   "file:PATH")
    p.add_argument("-f", "--sensitivity", type=int, dest="f",
                   help="maximum number of simultaneous edge failures")
    p.add_argument("--alpha", type=float, help="space exponent in (0, 0.5)")
    p.add_argument("--eps", type=float, help="stretch slack in (0, 3)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--component", choices=("all", "largest"),
                   help="keep the whole graph or its largest component")
    p.add_argument("--L-override", type=int, dest="L_override",
                   help="force the short-path hop cutoff")
    p.add_argument("--lam-override", type=int, dest="lam_override",
                   help="force the granularity (0 disables ball routing)")
    p.add_argument("--c-forest", type=float, dest="c_forest",
                   help="tree-count multiplier of the covering forest")
    p.add_argument("--c-hit", type=float, dest="c_hit",
                   help="part-hitting pivot sampling multiplier")
    p.add_argument("--c-ball", type=float, dest="c_ball",
                   help="ball pivot sampling multiplier")
    p.add_argument("--no-short-circuit", action="store_true",
                   help="disable the hop-bounded fast path on unit hosts")
    p.add_argument("--config", help="JSON file with an ExperimentConfig; "
                   "explicit flags override its fields")


def _add_workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--queries", type=int, help="number of queries to fire")
    p.add_argument("--fail-min", type=int, dest="fail_min",
                   help="smallest failure-set size sampled")
    p.add_argument("--fail-max", type=int, dest="fail_max",
                   help="largest failure-set size sampled (default f)")
    p.add_argument("--distinct-endpoints", action="store_true",
                   help="resample until s differs from t")
    p.add_argument("--max-violation-rate", type=float,
                   dest="max_stretch_violation_rate",
                   help="allowed fraction of stretch misses (default 0.01)")
    p.add_argument("--budget-words", type=int,
                   help="abort builds projected beyond this many words")
    p.add_argument("--time-budget", type=float, dest="time_budget_s",
                   help="wall-clock budget for the whole run, in seconds")


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    """Layer config file under explicit flags, over dataclass defaults."""
    base: dict = {}
    if getattr(args, "config", None):
        base = json.loads(Path(args.config).read_text())
    work = dict(base.pop("workload", {}))
    thresh = dict(base.pop("thresholds", {}))
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if name == "short_circuit":
            if getattr(args, "no_short_circuit", False):
                base[name] = False
        elif value is not None:
            base[name] = value
    for name in _WORKLOAD_FIELDS:
        value = getattr(args, name, None)
        if name == "distinct_endpoints":
            if value:
                work[name] = True
        elif value is not None:
            work[name] = value
    for name in _THRESHOLD_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            thresh[name] = value
    if "graph" not in base:
        raise ValueError("a graph spec is required (--graph or --config)")
    return ExperimentConfig(workload=Workload(**work),
                            thresholds=Thresholds(**thresh), **base)


def _build_oracle(config: ExperimentConfig):
    g = generate(config.graph, config.seed, config.component)
    t0 = time.perf_counter()
    dso = preprocess(
        g, config.f, config.alpha, config.eps, config.seed,
        budget_words=config.thresholds.budget_words,
        L_override=config.L_override, lam_override=config.lam_override,
        c_forest=config.c_forest, c_hit=config.c_hit,
        c_ball=config.c_ball, short_circuit=config.short_circuit)
    return dso, (time.perf_counter() - t0) * 1000.0


def _cmd_generate(args: argparse.Namespace) -> int:
    g = generate(args.spec, args.seed or 0, args.component or "all")
    text = dump_dimacs(g)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    print(f"generated {args.spec}: n={g.n} m={g.m}", file=sys.stderr)
    return 0


def _cmd_build(args: argparse.Namespace) -> int:
    config = _merge_config(args)
    dso, build_ms = _build_oracle(config)
    digest = save_oracle(dso, args.output)
    words = dso.space_words()
    print(json.dumps({
        "oracle": str(args.output), "sha256": digest,
        "n": dso.g.n, "m": dso.g.m,
        "params": {"f": dso.params.f, "L": dso.params.L,
                   "lam": dso.params.lam, "eps": dso.params.eps},
        "trees": len(dso.forest.trees),
        "oracle_words": words["oracle_words"],
        "build_ms": round(build_ms, 3),
    }, sort_keys=True))
    return 0


def _cmd_query(args: argparse.Namespace) -> int:
    dso = load_oracle(args.oracle)
    fails = FailureSet.of(args.fail or [])
    rep = dso.query_report(args.s, args.t, fails)
    exact = exact_replacement(dso.g, args.s, args.t, fails)
    stretch = None
    if 0 < exact < INF:
        stretch = round(rep.answer / exact, 6)
    elif exact == 0:
        stretch = 1.0
    print(json.dumps({
        "s": args.s, "t": args.t, "fails": list(fails.eids),
        "answer": None if rep.answer >= INF else rep.answer,
        "exact": None if exact >= INF else exact,
        "stretch": stretch, "case": rep.st_case,
        "flags": list(rep.flags),
    }, sort_keys=True))
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    head = read_header(args.oracle)
    meta = head["meta"]
    print(f"checksum ok: sha256={head['checksum']}", file=sys.stderr)
    dso = load_oracle(args.oracle)
    config = ExperimentConfig(
        graph=f"file:{args.oracle}",
        f=meta["params"]["f"], alpha=meta["params"]["alpha"],
        eps=meta["params"]["eps"], seed=args.seed or meta["seed"],
        workload=Workload(queries=args.queries or 200),
        thresholds=Thresholds(
            max_stretch_violation_rate=(
                args.max_stretch_violation_rate
                if args.max_stretch_violation_rate is not None else 0.01)))
    report = run_campaign(config, oracle=dso)
    _emit_report(report, args)
    return report.exit_code()


def _cmd_bench(args: argparse.Namespace) -> int:
    config = _merge_config(args)
    oracle = None
    if args.load_oracle:
        oracle = load_oracle(args.load_oracle)
    elif args.save_oracle:
        oracle, _ = _build_oracle(config)
        digest = save_oracle(oracle, args.save_oracle)
        print(f"oracle saved: sha256={digest}", file=sys.stderr)
    report = run_campaign(config, oracle=oracle)
    _emit_report(report, args)
    return report.exit_code()


def _emit_report(report, args) -> None:
    if getattr(args, "report_json", None):
        Path(args.report_json).write_text(report.to_json())
    if getattr(args, "report_csv", None):
        Path(args.report_csv).write_text(report.to_csv())
    print(json.dumps({
        "queries": len(report.rows),
        "soundness_violations": report.soundness_violations,
        "stretch_violations": report.stretch_violations,
        "eligible": report.eligible,
        "flagged": report.flagged,
        "violation_rate": round(report.violation_rate, 6),
        "threshold_ok": report.threshold_ok,
        "cases": report.case_counts["st"],
        "oracle_words": report.space["oracle_words"],
        "build_ms": round(report.build_wall_ms, 3),
        "query_ms": round(report.query_wall_ms, 3),
    }, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultdist",
        description="Fault-tolerant distance oracle bench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a graph as DIMACS")
    p.add_argument("spec", help="er(n,p) | grid(w,h) | rgg(n,r)")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--seed", type=int)
    p.add_argument("--component", choices=("all", "largest"))
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("build", help="build an oracle and save it")
    _add_param_flags(p)
    p.add_argument("-o", "--output", required=True,
                   help="oracle file to write")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("query", help="answer one query from a saved oracle")
    p.add_argument("--oracle", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--fail", type=int, nargs="*", default=[],
                   help="edge ids to remove")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("verify", help="checksum a saved oracle and score "
                       "it against the exact reference")
    p.add_argument("--oracle", required=True)
    p.add_argument("--queries", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-violation-rate", type=float,
                   dest="max_stretch_violation_rate")
    p.add_argument("--report-json", dest="report_json")
    p.add_argument("--report-csv", dest="report_csv")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("bench", help="run a full campaign")
    _add_param_flags(p)
    _add_workload_flags(p)
    p.add_argument("--report-json", dest="report_json")
    p.add_argument("--report-csv", dest="report_csv")
    p.add_argument("--save-oracle", dest="save_oracle")
    p.add_argument("--load-oracle", dest="load_oracle")
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MemoryBudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (OracleFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
