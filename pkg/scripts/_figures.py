"""CSV writers shared by the reproduction scripts."""

from __future__ import annotations

from pathlib import Path

from activesampling.estimation import actual_measures
from activesampling.experiments import (
    SNAPSHOT_FIELDS,
    STATS_FIELDS,
    SweepConfig,
    bias_variance,
    budget_sweep,
    leave_one_group_out,
    run_distribution_snapshot,
)
from activesampling.trec_io import JudgmentPool, RunSet, write_csv

PER_RUN_FIELDS = ("method", "fraction", "measure", "run_tag", "actual", "bias", "variance", "mse")


def per_run_rows(rows, runset: RunSet, qrels: JudgmentPool, config: SweepConfig) -> list[dict]:
    """Bias, variance and mse of every run's estimate, one row per (method, fraction, measure, run)."""
    actual = actual_measures(runset, qrels, config.cutoffs)
    truth = {label: actual.topic_mean(key, runset.runs) for label, key in config.summary_measures()}
    out = []
    for row in rows:
        samples = row.extra["samples"]
        for run in runset.runs:
            bv = bias_variance(
                [{run: s[run]} for s in samples], {run: truth[row.measure][run]}, deterministic=len(samples) == 1
            )
            out.append({
                "method": row.method,
                "fraction": row.fraction,
                "measure": row.measure,
                "run_tag": run,
                "actual": truth[row.measure][run],
                "bias": bv.bias,
                "variance": bv.variance,
                "mse": bv.mse,
            })
    return out


def write_figures(out: Path, runset, qrels, config: SweepConfig, groups=None, snapshot_topic=None, seed=0) -> None:
    out.mkdir(parents=True, exist_ok=True)
    topic = snapshot_topic or runset.topics[0]
    _, snapshot = run_distribution_snapshot(runset, qrels, topic, 0.1, seed=seed, batch_size=config.batch_size)
    write_csv(snapshot, SNAPSHOT_FIELDS, out / "run_distribution.csv")
    print(f"run distribution snapshot for topic {topic}: {out / 'run_distribution.csv'}")

    rows = budget_sweep(runset, qrels, config)
    write_csv([r.record() for r in rows], STATS_FIELDS, out / "sweep.csv")
    write_csv(per_run_rows(rows, runset, qrels, config), PER_RUN_FIELDS, out / "per_run.csv")
    print(f"budget sweep ({len(rows)} rows): {out / 'sweep.csv'}, {out / 'per_run.csv'}")

    if groups:
        loo = leave_one_group_out(runset, groups, qrels, config)
        write_csv([r.record() for r in loo], STATS_FIELDS, out / "loo.csv")
        print(f"leave-one-group-out ({len(loo)} rows): {out / 'loo.csv'}")
