"""``trendbandit`` command line: run experiments and analytic queries.

Exit codes: 0 success, 1 usage or config error, 2 runtime or domain error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .harness import ConfigError, RunError, run_experiment
from .io import fmt, load_config, write_outputs
from .oracle import greedy_oracle, theorem1_bound
from .policies import PolicySpec
from .trend import TrendDomainError, cumulative_trend, trend_eval

log = logging.getLogger("trendbandit")

OUT_DIR_ENV = "TRENDBANDIT_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_policy_list(text: str) -> tuple[PolicySpec, ...]:
    """``aucb,exp3:gamma=0.2,sw-ucb:window=100,xi=1``; bare ``key=value`` items
    attach to the preceding policy."""
    groups: list[str] = []
    for item in (p.strip() for p in text.split(",")):
        if not item:
            continue
        if "=" in item and ":" not in item:
            if not groups:
                raise ValueError(f"parameter {item!r} does not follow a policy name")
            sep = "," if ":" in groups[-1] else ":"
            groups[-1] += sep + item
        else:
            groups.append(item)
    if not groups:
        raise ValueError("empty policy list")
    return tuple(PolicySpec.parse(g) for g in groups)


def parse_counts(text: str) -> list[int]:
    """Counts given inline (``31000,1000``) or as a path to a one-row CSV file."""
    if os.path.exists(text):
        text = Path(text).read_text(encoding="utf-8")
    tokens = [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]
    try:
        counts = [int(t) for t in tokens]
    except ValueError:
        bad = next(t for t in tokens if not t.lstrip("-").isdigit())
        raise ValueError(f"--counts: {bad!r} is not an integer") from None
    if any(c < 0 for c in counts):
        raise ValueError("--counts: counts must be non-negative")
    return counts


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trendbandit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a replicated experiment and write CSV outputs")
    run.add_argument("--config", required=True)
    run.add_argument("--out-dir")
    run.add_argument("--seed", type=int, help="override master_seed")
    run.add_argument("--policies", help="comma-separated policy list, e.g. aucb,exp3:gamma=0.1")
    run.add_argument("--runs", type=int)
    run.add_argument("--horizon", type=int)
    run.add_argument("--jobs", type=int, default=1, help="worker processes (output does not depend on it)")

    oracle = sub.add_parser("oracle", help="print the greedy oracle schedule")
    oracle.add_argument("--config", required=True)

    bound = sub.add_parser("bound", help="print the closed-form regret bound for given pull counts")
    bound.add_argument("--config", required=True)
    bound.add_argument("--counts", required=True, help="per-arm pull counts, inline or a CSV file")
    bound.add_argument("--condition", choices=("overplayed", "underplayed"), default="overplayed")

    trend = sub.add_parser("trend", help="print a D(n), F(n) table")
    trend.add_argument("--config", required=True)
    trend.add_argument("--max-n", type=int, required=True)
    return parser


def _cmd_run(args, out) -> None:
    config = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.policies:
        changes["policies"] = parse_policy_list(args.policies)
    if args.runs is not None:
        changes["runs"] = args.runs
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if changes:
        config = config.with_overrides(**changes)
    if args.jobs < 1:
        raise ConfigError("--jobs: must be >= 1")
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "results"
    log.info("running %s: %d policies x %d runs x %d steps",
             config.scenario, len(config.policies), config.runs, config.horizon)
    aggregates, records = run_experiment(config, jobs=args.jobs)
    paths = write_outputs(records, aggregates, out_dir, config)
    for a in aggregates:
        if a.t:
            print(f"{a.policy}\tt={a.t[-1]}\tmodulated={fmt(a.mean['modulated_reward'][-1])}"
                  f"\tregret={fmt(a.mean['expected_regret'][-1])}", file=out)
    print(f"wrote {', '.join(str(p) for p in paths.values())}", file=out)


def _cmd_oracle(args, out) -> None:
    config = load_config(args.config)
    schedule = greedy_oracle(config.means, config.trend, config.horizon)
    print(json.dumps(schedule.to_dict(), indent=2), file=out)


def _cmd_bound(args, out) -> None:
    config = load_config(args.config)
    try:
        counts = parse_counts(args.counts)
    except OSError as exc:
        raise ConfigError(f"--counts: cannot read {args.counts}: {exc.strerror}") from None
    if len(counts) != config.n_arms:
        raise ConfigError(f"--counts: expected {config.n_arms} counts, got {len(counts)}")
    T = sum(counts)
    if T > config.trend.horizon_cap:
        raise ConfigError(f"--counts: total {T} exceeds trend.horizon_cap {config.trend.horizon_cap}")
    schedule = greedy_oracle(config.means, config.trend, T)
    report = theorem1_bound(config.means, config.trend, T, schedule, counts, condition=args.condition)
    print(json.dumps({"T": T, **report.to_dict()}, indent=2), file=out)


def _cmd_trend(args, out) -> None:
    config = load_config(args.config)
    trend = config.trend
    if not 1 <= args.max_n <= trend.horizon_cap:
        raise ConfigError(f"--max-n: must lie in [1, {trend.horizon_cap}], got {args.max_n}")
    print("n,D,F", file=out)
    for n in range(1, args.max_n + 1):
        print(f"{n},{fmt(trend_eval(trend, n))},{fmt(cumulative_trend(trend, n))}", file=out)


COMMANDS = {"run": _cmd_run, "oracle": _cmd_oracle, "bound": _cmd_bound, "trend": _cmd_trend}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"trendbandit: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args, out)
    except (ConfigError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"trendbandit: config error: {exc}", file=sys.stderr)
        return 1
    except (RunError, TrendDomainError, OSError) as exc:
        print(f"trendbandit: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # malformed JSON, policy strings and count lists surface as ValueError
        print(f"trendbandit: config error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
