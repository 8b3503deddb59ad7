"""Command-line interface: ``activesampling {pool,sample,estimate,experiment,loo,validate}``.

Exit status is 0 on success, 1 for invalid input or arguments and 2 for
failures while working. Errors go to stderr as ``error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from collections import Counter
from pathlib import Path
from typing import Sequence

from . import __version__
from .estimation import Measures, estimate_measures
from .experiments import STATS_FIELDS, SweepConfig, budget_sweep, coverage_gaps, leave_one_group_out
from .history import dump_history, load_history
from .sampler import STRATEGIES, ConsoleOracle, SamplerConfig, SamplingAborted, budget_for, qrels_oracle, sample_topic
from .trec_io import (
    TrecFormatError,
    build_pool,
    parse_group_map,
    parse_qrels,
    parse_run_file,
    read_runs,
    truncate_to_depth,
    write_csv,
)

log = logging.getLogger("activesampling")

OUTPUT_ENV = "ACTIVE_SAMPLING_OUTPUT"
ESTIMATE_FIELDS = ("topic", "run_tag", "measure", "value", "variance", "budget_fraction", "seed", "method")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _words(text: str) -> tuple[str, ...]:
    return tuple(x for x in text.replace(" ", "").split(",") if x)


def _common(p: argparse.ArgumentParser, runs=True, depth=True) -> None:
    if runs:
        p.add_argument("--runs", nargs="+", help="run files or directories of run files")
    if depth:
        p.add_argument("--depth", type=int, default=100, help="truncate every list to this depth (default 100)")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./out)")


def _sweep_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--qrels")
    p.add_argument("--fractions", type=_floats, default=",".join(str(round(0.01 * i, 2)) for i in range(1, 21)))
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--methods", type=_words, default=",".join(STRATEGIES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cutoffs", type=_ints, default="30")
    p.add_argument("--batch-size", type=int, default=3)
    p.add_argument("--census", action="store_true", help="score a fully judged pool with pi = 1")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-cache", action="store_true", help="do not reuse or store per-cell results")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="activesampling", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="key = value file; command-line flags take precedence")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = subs["pool"] = sub.add_parser("pool", help="per-topic depth-k pool sizes")
    _common(p)

    p = subs["sample"] = sub.add_parser("sample", help="sample judgments for every topic and estimate measures")
    _common(p)
    p.add_argument("--oracle", choices=("qrels", "console"), default="qrels")
    p.add_argument("--qrels")
    p.add_argument("--journal", help="judgment journal for --oracle console (default <out>/judgments.journal)")
    p.add_argument("--method", choices=STRATEGIES, default="active")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--fraction", type=float, default=0.1, help="judgments per topic as a fraction of its pool")
    budget.add_argument("--budget", type=int, help="absolute judgments per topic")
    p.add_argument("--batch-size", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cutoffs", type=_ints, default="30")
    p.add_argument("--topics", type=_words, help="comma-separated subset of topics")

    p = subs["estimate"] = sub.add_parser("estimate", help="estimate measures from saved sample histories")
    _common(p)
    p.add_argument("--histories", help="directory of .hist files")
    p.add_argument("--cutoffs", type=_ints, default="30")

    p = subs["experiment"] = sub.add_parser("experiment", help="budget sweep against full judgments")
    _common(p)
    _sweep_options(p)

    p = subs["loo"] = sub.add_parser("loo", help="leave-one-group-out reusability sweep")
    _common(p)
    _sweep_options(p)
    p.add_argument("--groups", help="file of 'run_tag group' lines")

    p = subs["validate"] = sub.add_parser("validate", help="check run files, qrels and group maps")
    p.add_argument("--runs", nargs="*", default=[])
    p.add_argument("--qrels")
    p.add_argument("--groups")
    p.add_argument("--depth", type=int, default=100, help="lists shorter than this are reported")
    return parser, subs


def _read_config(path: str) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config(path: str, subs: dict[str, argparse.ArgumentParser]) -> None:
    values = _read_config(path)
    for sp in subs.values():
        known = {}
        for action in sp._actions:
            if action.dest in values:
                v = values[action.dest]
                if isinstance(action, argparse._StoreTrueAction):
                    v = v.lower() in ("1", "true", "yes", "on")
                elif action.nargs in ("+", "*"):
                    v = v.split()
                known[action.dest] = v
        sp.set_defaults(**known)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_runs(args):
    if not args.runs:
        raise UsageError("--runs is required")
    if args.depth < 1:
        raise UsageError(f"--depth must be >= 1, got {args.depth}")
    missing = [p for p in args.runs if not Path(p).exists()]
    if missing:
        raise UsageError(f"run path not found: {missing[0]}")
    try:
        runset = read_runs(args.runs)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    if not runset.lists:
        raise UsageError("run files contain no entries")
    return truncate_to_depth(runset, args.depth)


def _need_file(path: str | None, flag: str) -> str:
    if not path:
        raise UsageError(f"{flag} is required")
    if not Path(path).is_file():
        raise UsageError(f"{flag} file not found: {path}")
    return path


def _estimate_records(est: Measures, runs: Sequence[str], cutoffs, fraction_of: dict, seed_of: dict, method_of: dict):
    measures = ["R", "AP", "RP"] + [f"P@{c}" for c in cutoffs]
    records = []
    topics = est.topics
    for topic in topics:
        for run in runs:
            for m in measures:
                records.append({
                    "topic": topic,
                    "run_tag": run,
                    "measure": m,
                    "value": est.values[(topic, run, m)],
                    "variance": est.variances.get((topic, run, m), math.nan),
                    "budget_fraction": fraction_of[topic],
                    "seed": seed_of[topic],
                    "method": method_of[topic],
                })
    methods = sorted(set(method_of.values()))
    for run in runs:
        for m in measures:
            records.append({
                "topic": "all",
                "run_tag": run,
                "measure": m,
                "value": est.topic_mean(m, [run])[run],
                "variance": math.nan,
                "budget_fraction": math.nan,
                "seed": "",
                "method": methods[0] if len(methods) == 1 else "mixed",
            })
    return records


def cmd_pool(args) -> int:
    runset = _load_runs(args)
    records = []
    for topic in runset.topics:
        pool = build_pool(runset, topic)
        n_runs = sum(1 for r in runset.runs if (r, topic) in runset.lists)
        records.append({"topic": topic, "runs": n_runs, "pool_size": len(pool)})
    out = _out_dir(args)
    write_csv(records, ("topic", "runs", "pool_size"), out / "pool.csv")
    sizes = [r["pool_size"] for r in records]
    print(f"runs: {len(runset.runs)}  depth: {args.depth}  topics: {len(records)}")
    print(f"pooled documents: total {sum(sizes)}  mean per topic {sum(sizes) / len(sizes):.1f}  min {min(sizes)}  max {max(sizes)}")
    print(f"wrote {out / 'pool.csv'}")
    return 0


def cmd_sample(args) -> int:
    runset = _load_runs(args)
    out = _out_dir(args)
    if args.batch_size < 1:
        raise UsageError("--batch-size must be >= 1")
    if args.budget is None and not 0 < args.fraction <= 1:
        raise UsageError(f"--fraction must be in (0, 1], got {args.fraction}")
    if args.budget is not None and args.budget < 1:
        raise UsageError("--budget must be >= 1")
    if args.oracle == "qrels":
        oracle = qrels_oracle(parse_qrels(_need_file(args.qrels, "--qrels")))
    else:
        journal = args.journal or out / "judgments.journal"
        oracle = ConsoleOracle(sys.stdin, sys.stderr, journal)
    topics = args.topics or runset.topics
    unknown = [t for t in topics if t not in runset.topics]
    if unknown:
        raise UsageError(f"unknown topic(s): {', '.join(unknown)}")

    hist_dir = out / "histories"
    hist_dir.mkdir(parents=True, exist_ok=True)
    est = Measures()
    fraction_of, seed_of, method_of = {}, {}, {}
    for topic in topics:
        pool = build_pool(runset, topic)
        budget = args.budget if args.budget is not None else budget_for(args.fraction, len(pool))
        budget = min(budget, len(pool))
        config = SamplerConfig(budget=budget, batch_size=args.batch_size, strategy=args.method, seed=args.seed)
        try:
            history = sample_topic(runset, topic, oracle, config)
        except SamplingAborted as exc:
            (hist_dir / f"{topic}.hist.partial").write_text(dump_history(exc.history), encoding="utf-8")
            raise
        (hist_dir / f"{topic}.hist").write_text(dump_history(history), encoding="utf-8")
        est.update(estimate_measures(history, runset, args.cutoffs))
        fraction_of[topic] = budget / len(pool)
        seed_of[topic] = "" if args.method == "mtf" else args.seed
        method_of[topic] = args.method
        log.info("topic %s: %d judgments in %d rounds", topic, len(history.judgments), history.n_rounds)
    records = _estimate_records(est, runset.runs, args.cutoffs, fraction_of, seed_of, method_of)
    write_csv(records, ESTIMATE_FIELDS, out / "estimates.csv")
    print(f"sampled {len(topics)} topics with {args.method}; wrote {hist_dir} and {out / 'estimates.csv'}")
    return 0


def cmd_estimate(args) -> int:
    runset = _load_runs(args)
    if not args.histories:
        raise UsageError("--histories is required")
    hist_dir = Path(args.histories)
    files = sorted(hist_dir.glob("*.hist")) if hist_dir.is_dir() else []
    if not files:
        raise UsageError(f"no .hist files in {hist_dir}")
    est = Measures()
    fraction_of, seed_of, method_of = {}, {}, {}
    for f in files:
        try:
            h = load_history(f.read_text(encoding="utf-8"))
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{f}: {exc}") from None
        if h.topic not in runset.topics:
            raise UsageError(f"{f}: topic {h.topic} is not in the runs")
        est.update(estimate_measures(h, runset, args.cutoffs))
        fraction_of[h.topic] = h.budget / h.pool_size if h.pool_size else math.nan
        seed_of[h.topic] = "" if h.seed is None else h.seed
        method_of[h.topic] = h.method
    out = _out_dir(args)
    records = _estimate_records(est, runset.runs, args.cutoffs, fraction_of, seed_of, method_of)
    write_csv(records, ESTIMATE_FIELDS, out / "estimates.csv")
    print(f"estimated {len(files)} topics; wrote {out / 'estimates.csv'}")
    return 0


def _sweep_config(args, out: Path) -> SweepConfig:
    try:
        return SweepConfig(
            fractions=tuple(args.fractions),
            repeats=args.repeats,
            methods=tuple(args.methods),
            seed=args.seed,
            cutoffs=tuple(args.cutoffs),
            batch_size=args.batch_size,
            census=args.census,
            jobs=max(1, args.jobs),
            cache_dir=None if args.no_cache else str(out / "cells" / args.command),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_experiment(args) -> int:
    runset = _load_runs(args)
    qrels = parse_qrels(_need_file(args.qrels, "--qrels"))
    out = _out_dir(args)
    config = _sweep_config(args, out)
    rows = budget_sweep(runset, qrels, config)
    write_csv([r.record() for r in rows], STATS_FIELDS, out / "sweep.csv")
    print(f"{len(rows)} rows; wrote {out / 'sweep.csv'}")
    return 0


def cmd_loo(args) -> int:
    runset = _load_runs(args)
    qrels = parse_qrels(_need_file(args.qrels, "--qrels"))
    groups = parse_group_map(_need_file(args.groups, "--groups"))
    out = _out_dir(args)
    config = _sweep_config(args, out)
    try:
        rows = leave_one_group_out(runset, groups, qrels, config)
    except ValueError as exc:
        if "group" in str(exc):
            raise UsageError(str(exc)) from None
        raise
    write_csv([r.record() for r in rows], STATS_FIELDS, out / "loo.csv")
    coverage = []
    for g in sorted(set(groups[r] for r in runset.runs)):
        participating = [r for r in runset.runs if groups[r] != g]
        for topic in runset.topics:
            for run, missing in coverage_gaps(runset, participating, topic).items():
                if groups[run] == g:
                    coverage.append({"group": g, "topic": topic, "run_tag": run, "unjudgeable": missing})
    write_csv(coverage, ("group", "topic", "run_tag", "unjudgeable"), out / "loo_coverage.csv")
    print(f"{len(rows)} rows; wrote {out / 'loo.csv'} and {out / 'loo_coverage.csv'}")
    return 0


def cmd_validate(args) -> int:
    errors: list[str] = []
    warnings: list[str] = []
    files: list[Path] = []
    for p in map(Path, args.runs):
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.is_file() and not f.name.startswith(".")))
        elif p.exists():
            files.append(p)
        else:
            errors.append(f"{p}: not found")
    tags: Counter = Counter()
    for f in files:
        try:
            rs = parse_run_file(f, strict=False)
        except TrecFormatError as exc:
            errors.extend(f"{f}:{n}: {msg}" for n, msg in exc.errors)
            continue
        errors.extend(f"{f}:{n}: {msg}" for n, msg in rs.errors)
        tags.update(rs.runs)
        for (tag, topic), entries in sorted(rs.lists.items()):
            if len(entries) < args.depth:
                warnings.append(f"{f}: run {tag} topic {topic} has {len(entries)} documents (< depth {args.depth})")
    for tag, count in sorted(tags.items()):
        if count > 1:
            warnings.append(f"run tag {tag} appears in {count} files")
    for path, parser in ((args.qrels, parse_qrels), (args.groups, parse_group_map)):
        if path is None:
            continue
        try:
            parser(path)
        except FileNotFoundError:
            errors.append(f"{path}: not found")
        except TrecFormatError as exc:
            errors.extend(f"{exc.source}:{n}: {msg}" for n, msg in exc.errors)
    for w in warnings:
        print(f"warning: {w}")
    for e in errors:
        print(f"error: validation: {e}", file=sys.stderr)
    print(f"{len(files)} run files checked: {len(errors)} errors, {len(warnings)} warnings")
    return 1 if errors else 0


COMMANDS = {
    "pool": cmd_pool,
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "experiment": cmd_experiment,
    "loo": cmd_loo,
    "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            if not Path(known.config).is_file():
                raise UsageError(f"config file not found: {known.config}")
            _apply_config(known.config, subs)
        args = parser.parse_args(argv)
        logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return 1
    except TrecFormatError as exc:
        for n, msg in exc.errors:
            print(f"error: validation: {exc.source}:{n}: {msg}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("error: runtime: interrupted", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"error: runtime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
