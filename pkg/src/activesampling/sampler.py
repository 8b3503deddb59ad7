"""Judgment samplers: active sampling, static stratified sampling and Move-to-Front."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, TextIO

import numpy as np

from .distributions import (
    DocDistribution,
    RankedPool,
    RankPrior,
    ap_prior,
    run_distribution_from_estimates,
    sample_doc,
    uniform_run_distribution,
)
from .estimation import SurvivalAccumulator, estimates_from_weights
from .history import DrawRecord, Round, SampleHistory
from .trec_io import JudgmentPool, RunSet, build_pool

log = logging.getLogger(__name__)

STRATEGIES = ("active", "stratified", "mtf")

JudgmentOracle = Callable[[str, str], int]


class OracleError(RuntimeError):
    pass


class SamplingAborted(RuntimeError):
    """The oracle failed mid-run; ``history`` holds everything drawn so far."""

    def __init__(self, message: str, history: SampleHistory):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class SamplerConfig:
    budget: int
    batch_size: int = 3
    strategy: str = "active"
    seed: int = 0
    rank_prior: RankPrior = ap_prior
    max_draws_per_round: int = 10_000_000

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")


def budget_for(fraction: float, pool_size: int) -> int:
    """Judgments allowed for a topic: ``ceil(fraction * pool_size)``."""
    if not 0 < fraction <= 1:
        raise ValueError(f"budget fraction must be in (0, 1], got {fraction}")
    # round first so 0.07 * 100 does not become 8
    return max(1, math.ceil(round(fraction * pool_size, 9)))


def _judge(oracle: JudgmentOracle, topic: str, doc: str) -> int:
    y = oracle(topic, doc)
    if y not in (0, 1):
        raise OracleError(f"oracle returned {y!r} for topic {topic} document {doc}; expected 0 or 1")
    return int(y)


def _topic_runs(runset: RunSet, topic: str) -> tuple[tuple[str, ...], list[tuple[str, ...]]]:
    runs, lists = [], []
    for run in runset.runs:
        ranking = runset.ranking(run, topic)
        if ranking:
            runs.append(run)
            lists.append(ranking)
    return tuple(runs), lists


def _sample(runset: RunSet, topic: str, oracle: JudgmentOracle, config: SamplerConfig, adaptive: bool) -> SampleHistory:
    pool = build_pool(runset, topic)
    runs, lists = _topic_runs(runset, topic)
    if config.budget > len(pool):
        raise ValueError(f"budget {config.budget} exceeds the pool of {len(pool)} documents for topic {topic}")
    ranked = RankedPool(pool, lists, prior=config.rank_prior)
    n_docs = len(pool)
    rng = np.random.default_rng(config.seed)
    history = SampleHistory(
        topic=topic,
        method="active" if adaptive else "stratified",
        docs=ranked.docs,
        runs=runs,
        pool_size=n_docs,
        budget=config.budget,
        batch_size=config.batch_size,
        seed=config.seed,
    )
    uniform = uniform_run_distribution(len(runs))
    run_p = uniform
    judged = np.zeros(n_docs, dtype=bool)
    weights = np.zeros(n_docs + 1)  # y/pi per pooled doc; trailing slot feeds rank padding
    survival = SurvivalAccumulator(n_docs)
    static = DocDistribution(ranked.docs, ranked.joint(uniform))

    while len(history.judgments) < config.budget:
        t = history.n_rounds + 1
        dist = DocDistribution(ranked.docs, ranked.joint(run_p)) if adaptive else static
        reachable = int(np.count_nonzero((dist.probs > 0) & ~judged))
        if reachable == 0:
            # every unjudged doc belongs to runs with zero probability
            log.debug("topic %s round %d: no reachable unjudged document, using uniform run distribution", topic, t)
            run_p = uniform
            dist = static
            reachable = int(np.count_nonzero((dist.probs > 0) & ~judged))
        need = min(config.batch_size, config.budget - len(history.judgments), reachable)
        current = Round(t, [], dist.probs, run_p)
        history.rounds.append(current)
        new = 0
        while new < need:
            if current.n_draws >= config.max_draws_per_round:
                raise RuntimeError(f"topic {topic} round {t}: no new document after {current.n_draws} draws")
            i = sample_doc(dist, rng)
            doc = ranked.docs[i]
            p = float(dist.probs[i])
            if judged[i]:
                current.draws.append(DrawRecord(t, current.n_draws + 1, doc, p, None, False))
                continue
            try:
                y = _judge(oracle, topic, doc)
            except Exception as exc:
                raise SamplingAborted(f"oracle failed on topic {topic} document {doc}: {exc}", history) from exc
            judged[i] = True
            history.judgments[doc] = y
            current.draws.append(DrawRecord(t, current.n_draws + 1, doc, p, y, True))
            new += 1
        survival.add(dist.probs, current.n_draws)
        if adaptive:
            idx = np.flatnonzero(judged)
            pi = survival.inclusion(idx)
            labels = np.array([history.judgments[ranked.docs[i]] for i in idx], dtype=float)
            weights[idx] = labels / pi
            r_hat = math.fsum(weights[idx])
            ap_hat = estimates_from_weights(weights[ranked.rank_index], r_hat, ())["AP"]
            run_p = run_distribution_from_estimates(ap_hat)
    return history


def run_active_sampling(runset: RunSet, topic: str, oracle: JudgmentOracle, config: SamplerConfig) -> SampleHistory:
    """Active sampling on one topic.

    Each round draws with replacement from the joint document distribution
    until ``batch_size`` previously unjudged documents have been seen, then
    re-estimates AP for every run and makes the run distribution
    proportional to it. Re-draws of judged documents are recorded and count
    toward the round's draw total.
    """
    return _sample(runset, topic, oracle, config, adaptive=True)


def run_stratified_sampling(runset: RunSet, topic: str, oracle: JudgmentOracle, config: SamplerConfig) -> SampleHistory:
    """Same batching as active sampling, with the run distribution frozen at uniform."""
    return _sample(runset, topic, oracle, config, adaptive=False)


def run_mtf(runset: RunSet, topic: str, oracle: JudgmentOracle, budget: int) -> SampleHistory:
    """Move-to-Front: keep judging down the current run until a nonrelevant
    document sends it below every other run.

    Runs start at priority 0; ties go to the lexicographically smallest tag.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    pool = build_pool(runset, topic)
    runs, lists = _topic_runs(runset, topic)
    history = SampleHistory(
        topic=topic, method="mtf", docs=pool, runs=runs, pool_size=len(pool), budget=budget, batch_size=1
    )
    priority = {run: 0.0 for run in runs}
    cursor = {run: 0 for run in runs}
    ranking = dict(zip(runs, lists))
    active = set(runs)
    tie = {run: -i for i, run in enumerate(sorted(runs))}
    while len(history.judgments) < budget and active:
        run = max(active, key=lambda r: (priority[r], tie[r]))
        lst = ranking[run]
        while cursor[run] < len(lst) and lst[cursor[run]] in history.judgments:
            cursor[run] += 1
        if cursor[run] >= len(lst):
            active.discard(run)
            continue
        doc = lst[cursor[run]]
        try:
            y = _judge(oracle, topic, doc)
        except Exception as exc:
            raise SamplingAborted(f"oracle failed on topic {topic} document {doc}: {exc}", history) from exc
        history.judgments[doc] = y
        t = history.n_rounds + 1
        history.rounds.append(Round(t, [DrawRecord(t, 1, doc, 1.0, y, True)]))
        if not y:
            priority[run] = min(priority.values()) - 1.0
    return history


def sample_topic(runset: RunSet, topic: str, oracle: JudgmentOracle, config: SamplerConfig) -> SampleHistory:
    if config.strategy == "active":
        return run_active_sampling(runset, topic, oracle, config)
    if config.strategy == "stratified":
        return run_stratified_sampling(runset, topic, oracle, config)
    return run_mtf(runset, topic, oracle, config.budget)


# --- oracles -----------------------------------------------------------------


def qrels_oracle(qrels: JudgmentPool, unjudged_policy: str = "nonrelevant") -> JudgmentOracle:
    """Answer from qrels; pairs missing from the qrels resolve per ``unjudged_policy``
    (``"nonrelevant"``, ``"relevant"`` or ``"error"``)."""
    if unjudged_policy not in ("nonrelevant", "relevant", "error"):
        raise ValueError(f"unknown unjudged policy {unjudged_policy!r}")

    def oracle(topic: str, doc: str) -> int:
        y = qrels.get(topic, doc)
        if y is not None:
            return y
        if unjudged_policy == "error":
            raise OracleError(f"no judgment for topic {topic} document {doc}")
        return 1 if unjudged_policy == "relevant" else 0

    return oracle


class ConsoleOracle:
    """Ask a human for judgments on a text stream.

    Answers are cached, and appended to ``journal`` (``topic doc label``
    per line) when given so an interrupted session can resume.
    """

    def __init__(self, stdin: TextIO, stdout: TextIO, journal: Optional[os.PathLike | str] = None):
        self.stdin = stdin
        self.stdout = stdout
        self.journal = Path(journal) if journal is not None else None
        self.cache: dict[tuple[str, str], int] = {}
        if self.journal is not None and self.journal.exists():
            for line in self.journal.read_text(encoding="utf-8").splitlines():
                parts = line.split()
                if len(parts) == 3 and parts[2] in ("0", "1"):
                    self.cache[(parts[0], parts[1])] = int(parts[2])

    def __call__(self, topic: str, doc: str) -> int:
        key = (topic, doc)
        if key in self.cache:
            return self.cache[key]
        while True:
            self.stdout.write(f"topic {topic} document {doc} relevant? [0/1]: ")
            self.stdout.flush()
            line = self.stdin.readline()
            if not line:
                raise OracleError("input closed before a judgment was given")
            answer = line.strip()
            if answer in ("0", "1"):
                break
            self.stdout.write("please answer 0 or 1\n")
        y = int(answer)
        self.cache[key] = y
        if self.journal is not None:
            self.journal.parent.mkdir(parents=True, exist_ok=True)
            with open(self.journal, "a", encoding="utf-8") as fh:
                fh.write(f"{topic} {doc} {y}\n")
        return y


def console_oracle(stdin: TextIO, stdout: TextIO, journal=None) -> ConsoleOracle:
    return ConsoleOracle(stdin, stdout, journal)
