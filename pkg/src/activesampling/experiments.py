"""Accuracy statistics, budget sweeps and leave-one-group-out reusability runs."""

from __future__ import annotations

import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .estimation import Measures, actual_measures, estimate_measures, measure_name
from .history import SampleHistory
from .sampler import STRATEGIES, SamplerConfig, budget_for, qrels_oracle, sample_topic
from .trec_io import JudgmentPool, RunSet, build_pool

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = tuple(round(0.01 * i, 2) for i in range(1, 21))
DETERMINISTIC = frozenset({"mtf"})
_METHOD_CODES = {m: i for i, m in enumerate(STRATEGIES)}

STATS_FIELDS = (
    "method", "fraction", "measure", "rms", "bias", "variance", "mse",
    "tau", "tau_variance", "repeats", "rms_variance", "bias_sq",
)


# --- statistics ----------------------------------------------------------------


def _aligned(estimates: Mapping[str, float], actuals: Mapping[str, float]) -> tuple[np.ndarray, np.ndarray]:
    if set(estimates) != set(actuals):
        raise ValueError("estimates and actual values cover different runs")
    runs = sorted(actuals)
    return np.array([estimates[r] for r in runs]), np.array([actuals[r] for r in runs])


def rms_error(estimates: Mapping[str, float], actuals: Mapping[str, float]) -> float:
    """Root mean squared error over runs for one sample."""
    f, h = _aligned(estimates, actuals)
    return float(np.sqrt(np.mean((f - h) ** 2)))


def mean_rms(samples: Sequence[Mapping[str, float]], actuals: Mapping[str, float]) -> float:
    """rms averaged over sample sets (square root taken per sample)."""
    return float(np.mean([rms_error(s, actuals) for s in samples]))


@dataclass(frozen=True)
class BiasVariance:
    bias: float
    variance: float
    mse: float
    bias_sq: float  # mean over runs of the squared per-run bias; mse = bias_sq + variance


def bias_variance(
    samples: Sequence[Mapping[str, float]],
    actuals: Mapping[str, float],
    *,
    deterministic: bool = False,
) -> BiasVariance:
    """Decompose the mse over sample sets and runs.

    Variances use the population convention (divide by the number of
    samples), which makes ``mse == bias_sq + variance`` exact. A single
    sample is only accepted for deterministic methods.
    """
    if not samples:
        raise ValueError("need at least one sample")
    if len(samples) < 2 and not deterministic:
        raise ValueError("variance is undefined for a single sample of a stochastic method")
    F = np.array([_aligned(s, actuals)[0] for s in samples])  # samples x runs
    h = _aligned(samples[0], actuals)[1]
    err = F - h
    per_run_bias = err.mean(axis=0)
    variance = float(F.var(axis=0).mean())
    return BiasVariance(
        bias=float(per_run_bias.mean()),
        variance=variance,
        mse=float((err**2).mean()),
        bias_sq=float((per_run_bias**2).mean()),
    )


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> float:
    """Kendall's tau-b between two score vectors over the same items.

    Returns NaN when either vector is constant (tau-b is 0/0 there).
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("score vectors must have the same length")
    if x.size < 2:
        raise ValueError("Kendall's tau needs at least two items")
    iu = np.triu_indices(x.size, k=1)
    dx = np.sign(x[:, None] - x[None, :])[iu]
    dy = np.sign(y[:, None] - y[None, :])[iu]
    s = float(np.sum(dx * dy))
    nx = float(np.count_nonzero(dx))
    ny = float(np.count_nonzero(dy))
    if nx == 0 or ny == 0:
        return math.nan
    return s / math.sqrt(nx * ny)


# --- sweeps --------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    repeats: int = 30
    methods: tuple[str, ...] = STRATEGIES
    seed: int = 0
    cutoffs: tuple[int, ...] = (30,)
    batch_size: int = 3
    census: bool = False
    jobs: int = 1
    cache_dir: str | None = None

    def __post_init__(self):
        if not self.fractions:
            raise ValueError("need at least one budget fraction")
        for f in self.fractions:
            if not 0 < f <= 1:
                raise ValueError(f"budget fraction must be in (0, 1], got {f}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        for m in self.methods:
            if m not in STRATEGIES:
                raise ValueError(f"unknown method {m!r}")
        if any(c < 1 for c in self.cutoffs):
            raise ValueError("cutoffs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")

    def summary_measures(self) -> list[tuple[str, str]]:
        """``(reported label, per-topic measure)`` pairs, e.g. ``("MAP", "AP")``."""
        return [("MAP", "AP"), ("RP", "RP")] + [(measure_name(c), measure_name(c)) for c in self.cutoffs]


@dataclass
class StatsRow:
    method: str
    fraction: float
    measure: str
    rms: float
    bias: float
    variance: float
    mse: float
    tau: float
    tau_variance: float
    repeats: int
    rms_variance: float
    bias_sq: float
    extra: dict = field(default_factory=dict, repr=False)

    def record(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def derive_seed(master: int, method: str, fraction: float, repeat: int, topic: str = "", group: str = "") -> int:
    """Independent, reproducible seed for one (method, fraction, repeat, topic) cell."""
    entropy = [
        master,
        _METHOD_CODES[method],
        int(round(fraction * 1_000_000)),
        repeat,
        zlib.crc32(topic.encode()),
        zlib.crc32(group.encode()),
    ]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def sample_collection(
    runset: RunSet,
    qrels: JudgmentPool,
    method: str,
    fraction: float,
    seed: int,
    *,
    batch_size: int = 3,
    topics: Sequence[str] | None = None,
    group: str = "",
    repeat: int = 0,
) -> list[SampleHistory]:
    """Sample every topic of ``runset`` at ``fraction`` of its pool."""
    oracle = qrels_oracle(qrels)
    histories = []
    for topic in topics if topics is not None else runset.topics:
        try:
            pool = build_pool(runset, topic)
        except KeyError:
            # no sampling run retrieved anything for this topic
            histories.append(SampleHistory(topic, method, (), runs=runset.runs))
            continue
        config = SamplerConfig(
            budget=budget_for(fraction, len(pool)),
            batch_size=batch_size,
            strategy=method,
            seed=derive_seed(seed, method, fraction, repeat, topic, group),
        )
        histories.append(sample_topic(runset, topic, oracle, config))
    return histories


# worker state for process pools: (full runset, qrels, topics, config)
_STATE: dict = {}


def _init_worker(state: dict) -> None:
    _STATE.clear()
    _STATE.update(state)


def _cell(key: tuple[str, str, float, int]) -> dict[str, dict[str, float]]:
    group, method, fraction, repeat = key
    runset: RunSet = _STATE["runset"]
    config: SweepConfig = _STATE["config"]
    participating = _STATE["participating"][group]
    histories = sample_collection(
        runset.restrict(participating),
        _STATE["qrels"],
        method,
        fraction,
        config.seed,
        batch_size=config.batch_size,
        topics=_STATE["topics"],
        group=group,
        repeat=repeat,
    )
    est = Measures()
    for h in histories:
        est.update(estimate_measures(h, runset, config.cutoffs, census=config.census, variance=False))
    return {label: est.topic_mean(key_, runset.runs) for label, key_ in config.summary_measures()}


def _cache_path(cache_dir: str, key) -> Path:
    group, method, fraction, repeat = key
    return Path(cache_dir) / f"{group or 'all'}__{method}__{fraction!r}__{repeat}.json"


def _run_cells(keys: list, state: dict, config: SweepConfig) -> dict:
    results: dict = {}
    todo = []
    for key in keys:
        if config.cache_dir is not None and _cache_path(config.cache_dir, key).exists():
            results[key] = json.loads(_cache_path(config.cache_dir, key).read_text())
        else:
            todo.append(key)
    if todo:
        log.info("%d cells to run (%d cached)", len(todo), len(keys) - len(todo))

    def store(key, value):
        results[key] = value
        if config.cache_dir is not None:
            path = _cache_path(config.cache_dir, key)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(value, sort_keys=True))
        log.info("cell %s done (%d/%d)", key, len(results), len(keys))

    if config.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(config.jobs, initializer=_init_worker, initargs=(state,)) as pool:
            for key, value in zip(todo, pool.map(_cell, todo)):
                store(key, value)
    else:
        _init_worker(state)
        for key in todo:
            store(key, _cell(key))
    return results


def _stats(method, fraction, label, samples, actual_means, deterministic) -> StatsRow:
    rms = [rms_error(s, actual_means) for s in samples]
    runs = sorted(actual_means)
    truth = [actual_means[r] for r in runs]
    taus = np.array([kendall_tau([s[r] for r in runs], truth) for s in samples])
    # one sample of a stochastic method: bias and mse are still reported, variance is not
    bv = bias_variance(samples, actual_means, deterministic=deterministic or len(samples) == 1)
    variance = bv.variance if len(samples) >= 2 or deterministic else math.nan
    finite = taus[np.isfinite(taus)]
    return StatsRow(
        method=method,
        fraction=fraction,
        measure=label,
        rms=float(np.mean(rms)),
        bias=bv.bias,
        variance=variance,
        mse=bv.mse,
        tau=float(finite.mean()) if finite.size else math.nan,
        tau_variance=float(finite.var()) if finite.size else math.nan,
        repeats=len(samples),
        rms_variance=float(np.var(rms)),
        bias_sq=bv.bias_sq,
        extra={"rms": rms, "tau": taus.tolist(), "samples": samples},
    )


def _sweep_rows(runset, qrels, actual: Measures, config: SweepConfig, groups: dict[str, tuple[str, ...]]) -> dict:
    """Run every (group, method, fraction, repeat) cell; return rows per group."""
    keys = [
        (g, m, f, j)
        for g in groups
        for m in config.methods
        for f in config.fractions
        for j in range(1 if m in DETERMINISTIC else config.repeats)
    ]
    state = {"runset": runset, "qrels": qrels, "config": config, "participating": groups, "topics": runset.topics}
    results = _run_cells(keys, state, config)
    out = {}
    for g in groups:
        rows = []
        for m in config.methods:
            reps = 1 if m in DETERMINISTIC else config.repeats
            for f in config.fractions:
                for label, key in config.summary_measures():
                    samples = [results[(g, m, f, j)][label] for j in range(reps)]
                    truth = actual.topic_mean(key, runset.runs)
                    rows.append(_stats(m, f, label, samples, truth, m in DETERMINISTIC))
        out[g] = rows
    return out


def budget_sweep(runset: RunSet, qrels: JudgmentPool, config: SweepConfig = SweepConfig()) -> list[StatsRow]:
    """Accuracy of each method at each budget fraction, against exact measures.

    Measures are estimated per topic and averaged over topics per run
    (MAP, mean RP, mean P@r) before computing rms, bias, variance and tau.
    """
    actual = actual_measures(runset, qrels, config.cutoffs)
    return _sweep_rows(runset, qrels, actual, config, {"": runset.runs})[""]


def _nanmean(values: Sequence[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else math.nan


def leave_one_group_out(
    runset: RunSet,
    groups: Mapping[str, str],
    qrels: JudgmentPool,
    config: SweepConfig = SweepConfig(),
) -> list[StatsRow]:
    """Reusability: for each group, sample with the other groups' runs only
    and score every run, then average the statistics over groups."""
    unmapped = [r for r in runset.runs if r not in groups]
    if unmapped:
        raise ValueError(f"runs without a group: {unmapped}")
    group_ids = sorted({groups[r] for r in runset.runs})
    if len(group_ids) < 2:
        raise ValueError("leave-one-group-out needs at least two groups; leaving out the only group leaves no runs to sample with")
    participating = {g: tuple(r for r in runset.runs if groups[r] != g) for g in group_ids}
    actual = actual_measures(runset, qrels, config.cutoffs)
    per_group = _sweep_rows(runset, qrels, actual, config, participating)
    rows = []
    for i, first in enumerate(per_group[group_ids[0]]):
        members = [per_group[g][i] for g in group_ids]
        avg = {
            f: _nanmean([getattr(r, f) for r in members])
            for f in ("rms", "bias", "variance", "mse", "tau", "tau_variance", "rms_variance", "bias_sq")
        }
        rows.append(
            StatsRow(first.method, first.fraction, first.measure, repeats=first.repeats, extra={"groups": len(group_ids)}, **avg)
        )
    return rows


def coverage_gaps(runset: RunSet, participating: Sequence[str], topic: str) -> dict[str, int]:
    """Per run, how many of its documents lie outside the participating runs' pool."""
    try:
        pool = set(build_pool(runset.restrict(participating), topic))
    except KeyError:
        pool = set()
    return {run: sum(1 for d in runset.ranking(run, topic) if d not in pool) for run in runset.runs}


SNAPSHOT_FIELDS = ("topic", "round", "run_tag", "probability", "actual_ap", "actual_share")


def run_distribution_snapshot(
    runset: RunSet,
    qrels: JudgmentPool,
    topic: str,
    fraction: float,
    seed: int = 0,
    batch_size: int = 3,
) -> tuple[SampleHistory, list[dict]]:
    """Active-sampling run distribution of every round beside each run's
    actual AP, normalised to sum to one over runs (``actual_share``)."""
    pool = build_pool(runset, topic)
    config = SamplerConfig(budget=budget_for(fraction, len(pool)), batch_size=batch_size, seed=seed)
    history = sample_topic(runset, topic, qrels_oracle(qrels), config)
    actual = actual_measures(runset, qrels, topics=[topic])
    ap = {run: actual.get(topic, run, "AP") for run in history.runs}
    total = math.fsum(ap.values())
    rows = []
    for r in history.rounds:
        for run, p in zip(history.runs, r.run_probs):
            rows.append({
                "topic": topic,
                "round": r.index,
                "run_tag": run,
                "probability": float(p),
                "actual_ap": ap[run],
                "actual_share": ap[run] / total if total > 0 else math.nan,
            })
    return history, rows
