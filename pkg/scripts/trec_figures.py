"""The same tables on TREC runs and qrels supplied by the user.

    python3 scripts/trec_figures.py --runs trec5/runs --qrels trec5/qrels.txt \
        --groups trec5/groups.txt --out results/trec5 --jobs 8
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from _figures import write_figures

from activesampling.experiments import DEFAULT_FRACTIONS, SweepConfig
from activesampling.trec_io import parse_group_map, parse_qrels, read_runs, truncate_to_depth


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--qrels", type=Path, required=True)
    p.add_argument("--groups", type=Path, help="'run_tag group' lines; enables the leave-one-group-out table")
    p.add_argument("--depth", type=int, default=100)
    p.add_argument("--out", type=Path, default=Path("results/trec"))
    p.add_argument("--topic", help="topic for the run-distribution snapshot (default: first)")
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--fractions", type=lambda s: tuple(float(x) for x in s.split(",")), default=DEFAULT_FRACTIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    runset = truncate_to_depth(read_runs(args.runs), args.depth)
    qrels = parse_qrels(args.qrels)
    groups = parse_group_map(args.groups) if args.groups else None
    config = SweepConfig(
        fractions=args.fractions,
        repeats=args.repeats,
        seed=args.seed,
        jobs=args.jobs,
        cache_dir=str(args.out / "cells"),
    )
    write_figures(args.out, runset, qrels, config, groups=groups, snapshot_topic=args.topic, seed=args.seed)


if __name__ == "__main__":
    main()
