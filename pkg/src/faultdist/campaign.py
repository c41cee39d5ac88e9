"""Experiment campaigns: build an oracle, fire queries, score the run.

A campaign is fully described by an :class:`ExperimentConfig`.  The
same config and seed reproduce every random choice, so the JSON report
is byte for byte identical across runs; wall-clock measurements are
kept out of the JSON for exactly that reason and live in the CSV and
in the in-memory rows instead.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

from .dso import DSO, derive_dso_params, preprocess
from .generators import generate
from .graphs import INF, FailureSet, Graph
from .reference import exact_replacement
from .seeding import stream

_STRETCH_SLACK = 1e-9


@dataclass(frozen=True)
class Workload:
    """What to ask the oracle once it is built."""

    queries: int = 100
    fail_min: int = 0
    fail_max: int | None = None   # None means the sensitivity bound f
    distinct_endpoints: bool = False


@dataclass(frozen=True)
class Thresholds:
    """Pass/fail knobs scored at the end of a run."""

    max_stretch_violation_rate: float = 0.01
    budget_words: int = 1_500_000_000
    time_budget_s: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """One reproducible experiment, serializable as plain JSON."""

    graph: str
    f: int = 2
    alpha: float = 0.4
    eps: float = 1.0
    seed: int = 0
    component: str = "largest"
    L_override: int | None = None
    lam_override: int | None = None
    c_forest: float = 1.0
    c_hit: float = 1.0
    c_ball: float = 1.0
    short_circuit: bool = True
    workload: Workload = field(default_factory=Workload)
    thresholds: Thresholds = field(default_factory=Thresholds)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "workload" in data:
            data["workload"] = Workload(**data["workload"])
        if "thresholds" in data:
            data["thresholds"] = Thresholds(**data["thresholds"])
        return ExperimentConfig(**data)


def validate_config(config: ExperimentConfig, n: int) -> None:
    """Check everything the oracle preconditions would reject later."""
    derive_dso_params(n, config.f, config.alpha, config.eps,
                      L_override=config.L_override,
                      lam_override=config.lam_override)
    w = config.workload
    if w.queries < 0:
        raise ValueError("query count must be non-negative")
    hi = config.f if w.fail_max is None else w.fail_max
    if not 0 <= w.fail_min <= hi:
        raise ValueError("failure-size range is empty or negative")
    if hi > config.f:
        raise ValueError("failure sizes above the sensitivity are "
                         "rejected at query time; lower fail_max")
    for name in ("c_forest", "c_hit", "c_ball"):
        if getattr(config, name) <= 0:
            raise ValueError(f"{name} must be positive")
    if config.thresholds.max_stretch_violation_rate < 0:
        raise ValueError("violation-rate threshold must be non-negative")


@dataclass(frozen=True)
class QueryRow:
    """One answered query with its score against the exact reference."""

    index: int
    s: int
    t: int
    fails: tuple[int, ...]
    answer: int
    exact: int
    stretch: float | None
    case: str
    flags: tuple[str, ...]
    wall_ms: float


@dataclass
class Report:
    """Everything a campaign produced, scored and serializable."""

    config: ExperimentConfig
    n: int
    m: int
    params: dict
    space: dict
    case_counts: dict
    rows: list[QueryRow]
    soundness_violations: int
    stretch_violations: int
    eligible: int
    flagged: int
    violation_rate: float
    threshold_ok: bool
    budget_exceeded: bool
    build_wall_ms: float
    query_wall_ms: float

    def exit_code(self) -> int:
        if self.budget_exceeded:
            return 3
        if not self.threshold_ok:
            return 2
        return 0

    def deterministic_dict(self) -> dict:
        """Report content minus every wall-clock measurement."""
        return {
            "config": self.config.to_dict(),
            "n": self.n,
            "m": self.m,
            "params": self.params,
            "space": self.space,
            "case_counts": self.case_counts,
            "soundness_violations": self.soundness_violations,
            "stretch_violations": self.stretch_violations,
            "eligible": self.eligible,
            "flagged": self.flagged,
            "violation_rate": self.violation_rate,
            "threshold_ok": self.threshold_ok,
            "rows": [{
                "index": r.index, "s": r.s, "t": r.t,
                "fails": list(r.fails),
                "answer": None if r.answer >= INF else r.answer,
                "exact": None if r.exact >= INF else r.exact,
                "stretch": r.stretch,
                "case": r.case,
                "flags": list(r.flags),
            } for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.deterministic_dict(), sort_keys=True,
                          separators=(",", ":")) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "s", "t", "fails", "answer", "exact",
                         "stretch", "case", "flags", "wall_ms"])
        for r in self.rows:
            writer.writerow([
                r.index, r.s, r.t, "|".join(map(str, r.fails)),
                "inf" if r.answer >= INF else r.answer,
                "inf" if r.exact >= INF else r.exact,
                "" if r.stretch is None else f"{r.stretch:.6f}",
                r.case, "|".join(r.flags), f"{r.wall_ms:.3f}",
            ])
        return buf.getvalue()


def sample_workload(g: Graph, config: ExperimentConfig
                    ) -> list[tuple[int, int, FailureSet]]:
    """Draw the whole query list up front from one labeled stream."""
    w = config.workload
    hi = config.f if w.fail_max is None else w.fail_max
    rng = stream(config.seed, "campaign", "workload")
    out = []
    for _ in range(w.queries):
        s, t = (int(x) for x in rng.integers(g.n, size=2))
        while w.distinct_endpoints and g.n > 1 and s == t:
            t = int(rng.integers(g.n))
        size = int(rng.integers(w.fail_min, hi + 1))
        size = min(size, g.m)
        eids = rng.choice(g.m, size=size, replace=False)
        out.append((s, t, FailureSet.of(eids)))
    return out


def run_campaign(config: ExperimentConfig, *,
                 oracle: DSO | None = None) -> Report:
    """Run one experiment end to end; rows are ordered by query index.

    An existing oracle may be passed in (the CLI does this after loading
    one from disk); its embedded graph is then used directly and the
    config's graph spec is kept for the record only.
    """
    t0 = time.perf_counter()
    if oracle is None:
        g = generate(config.graph, config.seed, config.component)
        validate_config(config, g.n)
        dso = preprocess(
            g, config.f, config.alpha, config.eps, config.seed,
            budget_words=config.thresholds.budget_words,
            L_override=config.L_override,
            lam_override=config.lam_override,
            c_forest=config.c_forest, c_hit=config.c_hit,
            c_ball=config.c_ball, short_circuit=config.short_circuit)
    else:
        dso = oracle
        g = dso.g
        validate_config(config, g.n)
    build_ms = (time.perf_counter() - t0) * 1000.0

    limit = 3.0 + config.eps
    rows: list[QueryRow] = []
    soundness = stretch_bad = eligible = flagged = 0
    stats_before = dict(dso.stats)
    t1 = time.perf_counter()
    for i, (s, t, fails) in enumerate(sample_workload(g, config)):
        q0 = time.perf_counter()
        rep = dso.query_report(s, t, fails)
        wall_ms = (time.perf_counter() - q0) * 1000.0
        exact = exact_replacement(g, s, t, fails)
        if rep.answer < exact:
            soundness += 1
        stretch: float | None = None
        if rep.flags:
            flagged += 1
        elif exact == 0:
            eligible += 1
            stretch = 1.0
        elif exact < INF:
            eligible += 1
            stretch = rep.answer / exact
            if rep.answer > limit * exact + _STRETCH_SLACK:
                stretch_bad += 1
        rows.append(QueryRow(
            index=i, s=s, t=t, fails=fails.eids, answer=rep.answer,
            exact=exact, stretch=stretch, case=rep.st_case,
            flags=rep.flags, wall_ms=wall_ms))
    query_ms = (time.perf_counter() - t1) * 1000.0

    rate = stretch_bad / eligible if eligible else 0.0
    ok = (soundness == 0
          and rate <= config.thresholds.max_stretch_violation_rate)
    over_time = (config.thresholds.time_budget_s is not None
                 and (build_ms + query_ms) / 1000.0
                 > config.thresholds.time_budget_s)
    # Two views of the branch distribution: per answered (s, t) pair
    # and per auxiliary-graph pair evaluation during this run only.
    case_counts: dict[str, int] = {}
    for r in rows:
        case_counts[r.case] = case_counts.get(r.case, 0) + 1
    pair_counts = {k: v - stats_before.get(k, 0)
                   for k, v in sorted(dso.stats.items())
                   if k.startswith("case_")}
    return Report(
        config=config, n=g.n, m=g.m, params=asdict(dso.params),
        space=dso.space_words(),
        case_counts={"st": case_counts, "pairs": pair_counts},
        rows=rows, soundness_violations=soundness,
        stretch_violations=stretch_bad, eligible=eligible,
        flagged=flagged, violation_rate=rate, threshold_ok=ok,
        budget_exceeded=over_time, build_wall_ms=build_ms,
        query_wall_ms=query_ms)
