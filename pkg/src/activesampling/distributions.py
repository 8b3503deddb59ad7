"""Run, rank and document selection distributions used by the samplers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

RankPrior = Callable[[int], np.ndarray]


def ap_prior(n: int) -> np.ndarray:
    """AP-prior over ranks 1..n.

    ``w(r) = (1 + 1/r + 1/(r+1) + ... + 1/n) / n``, normalised. The tail
    harmonic sums are computed exactly rather than with the ``log(n/r)``
    approximation.
    """
    if n < 1:
        raise ValueError(f"list length must be >= 1, got {n}")
    inv = 1.0 / np.arange(1, n + 1, dtype=float)
    tail = np.cumsum(inv[::-1])[::-1]  # tail[r-1] = sum_{j=r}^{n} 1/j
    w = (1.0 + tail) / n
    return w / w.sum()


def uniform_run_distribution(k: int) -> np.ndarray:
    if k < 1:
        raise ValueError(f"need at least one run, got {k}")
    return np.full(k, 1.0 / k)


def run_distribution_from_estimates(ap_hat: Sequence[float]) -> np.ndarray:
    """Run probabilities proportional to estimated AP.

    Falls back to uniform when every estimate is zero.
    """
    a = np.asarray(ap_hat, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("need a non-empty vector of estimates")
    if not np.all(np.isfinite(a)):
        raise ValueError("estimates must be finite")
    if np.any(a < 0):
        raise ValueError("estimates must be non-negative")
    total = a.sum()
    if total <= 0:
        return uniform_run_distribution(a.size)
    return a / total


@dataclass(frozen=True)
class DocDistribution:
    """Selection probabilities over the pooled documents ``docs``."""

    docs: tuple[str, ...]
    probs: np.ndarray

    @cached_property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def prob(self, doc: str) -> float:
        return float(self.probs[self.docs.index(doc)])


class RankedPool:
    """Index of a topic's pool together with each run's ranked list.

    Holds the flattened ``(run, rank) -> pool index`` map and the fixed
    per-run rank priors so the joint document distribution for any run
    distribution is one ``bincount``.
    """

    def __init__(
        self,
        pool: Sequence[str],
        doc_lists: Sequence[Sequence[str]],
        rank_dists: Sequence[np.ndarray] | None = None,
        prior: RankPrior = ap_prior,
    ):
        self.docs = tuple(pool)
        self.doc_index = {d: i for i, d in enumerate(self.docs)}
        if len(self.doc_index) != len(self.docs):
            raise ValueError("pool contains duplicate documents")
        self.lengths = np.array([len(lst) for lst in doc_lists], dtype=int)
        if rank_dists is None:
            rank_dists = [prior(n) if n else np.zeros(0) for n in self.lengths]
        if len(rank_dists) != len(doc_lists):
            raise ValueError("one rank distribution per run is required")
        flat_idx, flat_p = [], []
        for lst, dist in zip(doc_lists, rank_dists):
            if len(dist) != len(lst):
                raise ValueError(f"rank distribution of length {len(dist)} for a list of {len(lst)}")
            try:
                flat_idx.extend(self.doc_index[d] for d in lst)
            except KeyError as exc:
                raise ValueError(f"document {exc.args[0]} is not in the pool") from None
            flat_p.extend(dist)
        self.flat_index = np.array(flat_idx, dtype=np.intp)
        self.flat_prior = np.array(flat_p, dtype=float)
        self.owner = np.repeat(np.arange(len(self.lengths)), self.lengths)
        # rank matrix padded with len(docs) so weight vectors can carry a trailing zero
        kmax = int(self.lengths.max()) if self.lengths.size else 0
        self.rank_index = np.full((len(self.lengths), kmax), len(self.docs), dtype=np.intp)
        for k, lst in enumerate(doc_lists):
            self.rank_index[k, : len(lst)] = [self.doc_index[d] for d in lst]

    @property
    def n_runs(self) -> int:
        return len(self.lengths)

    def joint(self, run_probs: np.ndarray) -> np.ndarray:
        run_probs = np.asarray(run_probs, dtype=float)
        if run_probs.shape != (self.n_runs,):
            raise ValueError(f"expected {self.n_runs} run probabilities, got shape {run_probs.shape}")
        weights = run_probs[self.owner] * self.flat_prior
        return np.bincount(self.flat_index, weights=weights, minlength=len(self.docs))


def joint_distribution(
    run_probs: Sequence[float],
    rank_dists: Sequence[np.ndarray],
    doc_lists: Sequence[Sequence[str]],
    pool: Sequence[str] | None = None,
) -> DocDistribution:
    """``p(i) = sum_k p(k) p(k, r_k(i))`` over the pooled documents."""
    if pool is None:
        pool = sorted({d for lst in doc_lists for d in lst})
    ranked = RankedPool(pool, doc_lists, rank_dists)
    return DocDistribution(ranked.docs, ranked.joint(np.asarray(run_probs, dtype=float)))


def sample_doc(dist: DocDistribution, rng: np.random.Generator) -> int:
    """Draw one document index by inverting the cumulative weights."""
    cdf = dist.cdf
    if cdf.size == 0 or not cdf[-1] > 0:
        raise ValueError("cannot sample from an all-zero distribution")
    x = rng.random() * cdf[-1]
    i = int(np.searchsorted(cdf, x, side="right"))
    if i >= cdf.size:
        # x rounded onto the total; take the last document with positive mass
        i = int(np.flatnonzero(dist.probs > 0)[-1])
    return i
