"""Inclusion probabilities and Horvitz-Thompson estimates of R, P@r, AP and RP."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .history import SampleHistory
from .trec_io import JudgmentPool, RunSet, build_pool, topic_sort_key

# tolerance for treating a real-valued R-hat as an integer rank threshold
_RANK_EPS = 1e-9


class EstimatorUndefined(ValueError):
    """The variance estimator needs a joint inclusion probability that is zero."""


class SurvivalAccumulator:
    """Running ``sum_t N_t log(1 - p_t)`` per document with Kahan compensation.

    Documents hit with probability one are tracked separately so their
    inclusion probability is exactly 1.
    """

    def __init__(self, size: int):
        self.log_sum = np.zeros(size)
        self._comp = np.zeros(size)
        self.certain = np.zeros(size, dtype=bool)

    def add(self, probs: np.ndarray, n_draws: int) -> None:
        if n_draws == 0:
            return
        hit = probs >= 1.0
        self.certain |= hit
        term = n_draws * np.log1p(-np.where(hit, 0.0, probs))
        y = term - self._comp
        t = self.log_sum + y
        self._comp = (t - self.log_sum) - y
        self.log_sum = t

    def inclusion(self, idx=slice(None)) -> np.ndarray:
        return np.where(self.certain[idx], 1.0, -np.expm1(self.log_sum[idx]))


def _check_ht(history: SampleHistory) -> None:
    if not history.supports_ht:
        raise ValueError(f"history of method {history.method!r} has no selection probabilities")


def inclusion_vector(history: SampleHistory) -> np.ndarray:
    """First-order inclusion probability of every document in ``history.docs``."""
    _check_ht(history)
    acc = SurvivalAccumulator(len(history.docs))
    for r in history.rounds:
        acc.add(r.probs, r.n_draws)
    return acc.inclusion()


def first_order_inclusion(history: SampleHistory, doc: str) -> float:
    """``1 - prod_t (1 - p_t(doc))^N_t``."""
    _check_ht(history)
    if doc not in history.positions:
        raise KeyError(f"document {doc!r} is not in the sampled pool")
    i = history.doc_position(doc)
    terms = []
    for r in history.rounds:
        p = float(r.probs[i])
        if p >= 1.0 and r.n_draws:
            return 1.0
        terms.append(r.n_draws * math.log1p(-p))
    return -math.expm1(math.fsum(terms))


def _structural_zero(history: SampleHistory, i: int, j: int) -> bool:
    # no two distinct draws can pick i and j respectively
    n_i = sum(r.n_draws for r in history.rounds if r.probs[i] > 0)
    n_j = sum(r.n_draws for r in history.rounds if r.probs[j] > 0)
    n_ij = sum(r.n_draws for r in history.rounds if r.probs[i] > 0 and r.probs[j] > 0)
    return n_i == 0 or n_j == 0 or (n_i == 1 and n_j == 1 and n_ij == 1)


def second_order_inclusion(history: SampleHistory, doc_i: str, doc_j: str) -> float:
    """``pi_i + pi_j - [1 - prod_t (1 - p_t(i) - p_t(j))^N_t]``."""
    if doc_i == doc_j:
        raise ValueError("second-order inclusion needs two distinct documents; use first_order_inclusion")
    pi_i = first_order_inclusion(history, doc_i)
    pi_j = first_order_inclusion(history, doc_j)
    i, j = history.doc_position(doc_i), history.doc_position(doc_j)
    if _structural_zero(history, i, j):
        return 0.0
    terms = []
    for r in history.rounds:
        q = float(r.probs[i] + r.probs[j])
        if q >= 1.0 and r.n_draws:
            either = 1.0
            break
        terms.append(r.n_draws * math.log1p(-q))
    else:
        either = -math.expm1(math.fsum(terms))
    return min(max(pi_i + pi_j - either, 0.0), pi_i, pi_j)


class InclusionTable:
    """First-order probabilities for the judged documents of a history,
    with second-order probabilities computed on demand."""

    def __init__(self, history: SampleHistory):
        self.history = history
        vec = inclusion_vector(history)
        self.first = {d: float(vec[history.doc_position(d)]) for d in history.judgments}
        self._pairs: dict[tuple[str, str], float] = {}

    def __getitem__(self, doc: str) -> float:
        return self.first[doc]

    def second(self, doc_i: str, doc_j: str) -> float:
        key = (doc_i, doc_j) if doc_i <= doc_j else (doc_j, doc_i)
        if key not in self._pairs:
            self._pairs[key] = second_order_inclusion(self.history, *key)
        return self._pairs[key]

    def pair_matrix(self, docs: Sequence[str]) -> np.ndarray:
        return pair_inclusion_matrix(self.history, docs)


def pair_inclusion_matrix(history: SampleHistory, docs: Sequence[str]) -> np.ndarray:
    """Second-order inclusion probabilities for all pairs of ``docs``; the
    diagonal holds the first-order ones."""
    _check_ht(history)
    idx = np.array([history.doc_position(d) for d in docs], dtype=np.intp)
    m = len(idx)
    single = SurvivalAccumulator(m)
    log_sum = np.zeros((m, m))
    certain = np.zeros((m, m), dtype=bool)
    n_i = np.zeros(m, dtype=int)
    n_ij = np.zeros((m, m), dtype=int)
    for r in history.rounds:
        p = r.probs[idx]
        single.add(p, r.n_draws)
        q = p[:, None] + p[None, :]
        hit = q >= 1.0
        certain |= hit
        log_sum += r.n_draws * np.log1p(-np.where(hit, 0.0, q))
        pos = p > 0
        n_i += r.n_draws * pos
        n_ij += r.n_draws * (pos[:, None] & pos[None, :])
    pi = single.inclusion()
    either = np.where(certain, 1.0, -np.expm1(log_sum))
    out = pi[:, None] + pi[None, :] - either
    out = np.minimum(np.maximum(out, 0.0), np.minimum(pi[:, None], pi[None, :]))
    zero = (n_i[:, None] == 0) | (n_i[None, :] == 0) | ((n_i[:, None] == 1) & (n_i[None, :] == 1) & (n_ij == 1))
    out[zero] = 0.0
    np.fill_diagonal(out, pi)
    return out


# --- reference estimators over explicit label / probability maps -----------


def _weight(doc: str, labels: Mapping[str, int], pi: Mapping[str, float]) -> float:
    y = labels[doc]
    p = pi[doc]
    if not 0 < p <= 1:
        raise ValueError(f"inclusion probability of judged document {doc!r} is {p}, outside (0, 1]")
    return y / p


def ht_total(labels: Mapping[str, int], pi: Mapping[str, float]) -> float:
    """Estimated number of relevant documents, ``sum y/pi`` over the judged set."""
    return math.fsum(_weight(d, labels, pi) for d in labels)


def ht_pc(labels: Mapping[str, int], pi: Mapping[str, float], ranking: Sequence[str], cutoff: int) -> float:
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    top = [d for d in ranking[:cutoff] if d in labels]
    return math.fsum(_weight(d, labels, pi) for d in top) / cutoff


def ht_ap(labels: Mapping[str, int], pi: Mapping[str, float], ranking: Sequence[str], r_hat: float) -> float:
    if r_hat <= 0:
        return 0.0
    total = 0.0
    for rank, doc in enumerate(ranking, 1):
        if doc in labels and labels[doc]:
            total += ht_pc(labels, pi, ranking, rank) * _weight(doc, labels, pi)
    return total / r_hat


def ht_rp(labels: Mapping[str, int], pi: Mapping[str, float], ranking: Sequence[str], r_hat: float) -> float:
    if r_hat <= 0:
        return 0.0
    cut = math.floor(r_hat + _RANK_EPS)
    top = [d for d in ranking[:cut] if d in labels]
    return math.fsum(_weight(d, labels, pi) for d in top) / r_hat


def ht_variance(
    labels: Mapping[str, int],
    pi: Mapping[str, float],
    pair_pi: Callable[[str, str], float],
) -> float:
    """Unbiased variance estimate of the HT total.

    Raises :class:`EstimatorUndefined` when a pair of judged relevant
    documents has zero joint inclusion probability.
    """
    rel = [d for d in labels if labels[d]]
    total = math.fsum((1 / pi[d] ** 2 - 1 / pi[d]) * labels[d] ** 2 for d in rel)
    cross = []
    for a in range(len(rel)):
        for b in range(a):
            i, j = rel[a], rel[b]
            pij = pair_pi(i, j)
            if pij <= 0:
                raise EstimatorUndefined(f"joint inclusion probability of {i} and {j} is zero")
            cross.append((1 / (pi[i] * pi[j]) - 1 / pij) * labels[i] * labels[j])
    return total + 2 * math.fsum(cross)


# --- vectorised estimates for many runs at once ------------------------------


def measure_name(cutoff: int) -> str:
    return f"P@{cutoff}"


def estimates_from_weights(W: np.ndarray, r_hat: float, cutoffs: Sequence[int]) -> dict[str, np.ndarray]:
    """Per-run AP, RP and P@r from a ``runs x ranks`` matrix of ``y/pi``.

    Unjudged documents and padding beyond a run's list carry weight 0.
    """
    n_runs, kmax = W.shape
    C = np.cumsum(W, axis=1)
    out: dict[str, np.ndarray] = {}
    for c in cutoffs:
        out[measure_name(c)] = (C[:, min(c, kmax) - 1] / c) if kmax else np.zeros(n_runs)
    if r_hat > 0 and kmax:
        ranks = np.arange(1, kmax + 1)
        out["AP"] = ((C / ranks) * W).sum(axis=1) / r_hat
        cut = min(math.floor(r_hat + _RANK_EPS), kmax)
        out["RP"] = C[:, cut - 1] / r_hat if cut >= 1 else np.zeros(n_runs)
    else:
        out["AP"] = np.zeros(n_runs)
        out["RP"] = np.zeros(n_runs)
    return out


def weight_matrix(rankings: Sequence[Sequence[str]], weights: Mapping[str, float]) -> np.ndarray:
    kmax = max((len(r) for r in rankings), default=0)
    W = np.zeros((len(rankings), kmax))
    for k, ranking in enumerate(rankings):
        for r, doc in enumerate(ranking):
            w = weights.get(doc)
            if w:
                W[k, r] = w
    return W


@dataclass
class Measures:
    """Per-topic, per-run measure values keyed ``(topic, run, measure)``.

    Used both for HT estimates and for the exact values computed from full
    judgments. ``flags`` holds diagnostics keyed ``(topic, run)``; run ``"*"``
    marks a topic-level note.
    """

    values: dict[tuple[str, str, str], float] = field(default_factory=dict)
    variances: dict[tuple[str, str, str], float] = field(default_factory=dict)
    flags: dict[tuple[str, str], str] = field(default_factory=dict)

    def update(self, other: "Measures") -> None:
        self.values.update(other.values)
        self.variances.update(other.variances)
        self.flags.update(other.flags)

    @property
    def topics(self) -> list[str]:
        return sorted({t for t, _, _ in self.values}, key=topic_sort_key)

    def get(self, topic: str, run: str, measure: str) -> float:
        return self.values[(topic, run, measure)]

    def topic_mean(self, measure: str, runs: Iterable[str]) -> dict[str, float]:
        """Mean over topics, per run (MAP for ``"AP"``)."""
        topics = self.topics
        return {
            run: math.fsum(self.values[(t, run, measure)] for t in topics) / len(topics) for run in runs
        }


def estimate_measures(
    history: SampleHistory,
    runset: RunSet,
    cutoffs: Sequence[int] = (30,),
    *,
    census: bool = False,
    variance: bool = True,
) -> Measures:
    """HT estimates for every run in ``runset`` on ``history.topic``.

    Deterministic histories (MTF) carry no probabilities; their judged
    documents are scored with ``pi = 1`` and everything else counts as
    nonrelevant. With ``census=True`` a history that judged its whole pool
    is also scored with ``pi = 1``.
    """
    topic = history.topic
    labels = history.judgments
    whole_pool = history.pool_size > 0 and len(labels) >= history.pool_size
    if not history.supports_ht or (census and whole_pool):
        table = None
        pi = {d: 1.0 for d in labels}
    else:
        table = InclusionTable(history)
        pi = table.first
    weights = {d: _weight(d, labels, pi) for d in labels}
    r_hat = math.fsum(weights.values())
    rankings = [runset.ranking(run, topic) for run in runset.runs]
    est = estimates_from_weights(weight_matrix(rankings, weights), r_hat, cutoffs)

    out = Measures()
    for k, run in enumerate(runset.runs):
        out.values[(topic, run, "R")] = r_hat
        for name, vals in est.items():
            out.values[(topic, run, name)] = float(vals[k])

    if history.runs and set(history.runs) < set(runset.runs):
        sampled = set(build_pool(runset.restrict(history.runs), topic))
        for run, ranking in zip(runset.runs, rankings):
            missing = sum(1 for d in ranking if d not in sampled)
            if missing:
                out.flags[(topic, run)] = f"{missing} documents outside the sampled pool"

    if variance and table is not None:
        _add_variances(out, table, labels, rankings, runset.runs, topic, cutoffs)
    return out


def _add_variances(out, table, labels, rankings, runs, topic, cutoffs) -> None:
    rel = [d for d in labels if labels[d]]
    pos = {d: i for i, d in enumerate(rel)}
    P = table.pair_matrix(rel)
    pi = np.diag(P).copy()
    with np.errstate(divide="ignore"):
        D = np.outer(1 / pi, 1 / pi) - 1 / P
    np.fill_diagonal(D, 1 / pi**2 - 1 / pi)

    def subset_variance(members: list[int]) -> float:
        if not members:
            return 0.0
        sub = D[np.ix_(members, members)]
        return float(sub.sum()) if np.all(np.isfinite(sub)) else math.nan

    var_total = subset_variance(list(range(len(rel))))
    for run, ranking in zip(runs, rankings):
        out.variances[(topic, run, "R")] = var_total
        for c in cutoffs:
            members = [pos[d] for d in ranking[:c] if d in pos]
            out.variances[(topic, run, measure_name(c))] = subset_variance(members) / c**2


def estimate_all(
    histories: Iterable[SampleHistory],
    runset: RunSet,
    cutoffs: Sequence[int] = (30,),
    **kwargs,
) -> Measures:
    out = Measures()
    for h in histories:
        out.update(estimate_measures(h, runset, cutoffs, **kwargs))
    return out


def actual_measures(
    runset: RunSet,
    qrels: JudgmentPool,
    cutoffs: Sequence[int] = (30,),
    topics: Iterable[str] | None = None,
) -> Measures:
    """Exact measures with complete judgments; unjudged pool documents are nonrelevant.

    R counts the relevant documents in the depth-k pool of ``runset``.
    """
    out = Measures()
    for topic in topics if topics is not None else runset.topics:
        pool = build_pool(runset, topic)
        weights = {d: 1.0 for d in pool if qrels.get(topic, d)}
        R = float(len(weights))
        rankings = [runset.ranking(run, topic) for run in runset.runs]
        est = estimates_from_weights(weight_matrix(rankings, weights), R, cutoffs)
        if R == 0:
            out.flags[(topic, "*")] = "no relevant documents; AP and RP set to 0"
        for k, run in enumerate(runset.runs):
            out.values[(topic, run, "R")] = R
            for name, vals in est.items():
                out.values[(topic, run, name)] = float(vals[k])
    return out
