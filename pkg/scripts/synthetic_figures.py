"""Budget sweep, per-run bias/variance, run-distribution snapshot and
leave-one-group-out tables on a synthetic collection.

    python3 scripts/synthetic_figures.py --out results/synthetic --jobs 4
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from _figures import write_figures

from activesampling.experiments import DEFAULT_FRACTIONS, SweepConfig
from activesampling.synthetic import SyntheticConfig, synthetic_collection


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("results/synthetic"))
    p.add_argument("--topics", type=int, default=10)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--groups", type=int, default=5, help="runs are dealt round-robin into this many groups")
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--fractions", type=lambda s: tuple(float(x) for x in s.split(",")), default=DEFAULT_FRACTIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    runset, qrels = synthetic_collection(
        SyntheticConfig(n_topics=args.topics, n_runs=args.runs, n_docs=args.docs, seed=args.seed)
    )
    groups = {run: f"g{i % args.groups}" for i, run in enumerate(runset.runs)}
    config = SweepConfig(
        fractions=args.fractions,
        repeats=args.repeats,
        seed=args.seed,
        jobs=args.jobs,
        cache_dir=str(args.out / "cells"),
    )
    write_figures(args.out, runset, qrels, config, groups=groups if args.groups > 1 else None, seed=args.seed)


if __name__ == "__main__":
    main()
