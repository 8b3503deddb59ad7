"""Synthetic collections with planted relevance and a run-quality gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trec_io import JudgmentPool, RunSet


@dataclass(frozen=True)
class SyntheticConfig:
    n_topics: int = 1
    n_runs: int = 10
    n_docs: int = 200
    depth: int = 100
    relevant_fraction: float = 0.1
    best_quality: float = 3.0
    worst_quality: float = 0.0
    noise: float = 1.0
    seed: int = 0


def synthetic_collection(config: SyntheticConfig = SyntheticConfig()) -> tuple[RunSet, JudgmentPool]:
    """Each run scores document ``i`` as ``quality * y_i + noise * N(0, 1)``
    and returns its top ``depth``; run qualities fall linearly from best to worst.

    Every document of the universe is judged in the returned qrels.
    """
    rng = np.random.default_rng(config.seed)
    qualities = np.linspace(config.best_quality, config.worst_quality, config.n_runs)
    tags = [f"run{k:02d}" for k in range(config.n_runs)]
    rankings: dict[str, dict[str, list[str]]] = {tag: {} for tag in tags}
    labels: dict[tuple[str, str], int] = {}
    n_rel = max(1, round(config.relevant_fraction * config.n_docs))
    for t in range(1, config.n_topics + 1):
        topic = str(t)
        docs = np.array([f"T{t}-D{i:04d}" for i in range(config.n_docs)])
        y = np.zeros(config.n_docs)
        y[rng.choice(config.n_docs, size=n_rel, replace=False)] = 1
        for doc, rel in zip(docs, y):
            labels[(topic, str(doc))] = int(rel)
        for tag, q in zip(tags, qualities):
            scores = q * y + config.noise * rng.standard_normal(config.n_docs)
            order = np.argsort(-scores, kind="stable")[: config.depth]
            rankings[tag][topic] = [str(d) for d in docs[order]]
    return RunSet.from_rankings(rankings, depth=config.depth), JudgmentPool(labels)
