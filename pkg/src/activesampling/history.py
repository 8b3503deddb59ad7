"""Per-topic record of every draw made by a sampler, and its text format.

File layout (version 1)::

    # sample-history v1
    # topic=<topic> method=<method> pool_size=<N> budget=<b> batch_size=<Nb> seed=<seed>
    # runs <tag> <tag> ...
    <topic> <round> <draw> <doc> <prob> <judged 0|1> <label 0|1|->
    ...
    #P <round> <doc> <prob>          selection probability of each judged doc in each round
    #R <round> <p_1> ... <p_K>       run distribution used in the round
    #N <round> <N_t>                 draws made in the round

Probabilities are written with ``repr`` so a reloaded history reproduces
inclusion probabilities bit for bit. Deterministic methods write ``1.0``
as the draw probability and no ``#P`` lines.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

FORMAT_VERSION = 1
_MAGIC = f"# sample-history v{FORMAT_VERSION}"


@dataclass(frozen=True)
class DrawRecord:
    round: int
    draw: int
    doc_id: str
    prob: float
    label: int | None  # set only on the draw that first judged the document
    was_new: bool


@dataclass
class Round:
    index: int
    draws: list[DrawRecord]
    probs: np.ndarray | None = None  # aligned with SampleHistory.docs
    run_probs: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return len(self.draws)


@dataclass
class SampleHistory:
    topic: str
    method: str
    docs: tuple[str, ...]
    rounds: list[Round] = field(default_factory=list)
    judgments: dict[str, int] = field(default_factory=dict)
    runs: tuple[str, ...] = ()
    pool_size: int = 0
    budget: int = 0
    batch_size: int = 0
    seed: int | None = None

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    @property
    def supports_ht(self) -> bool:
        return all(r.probs is not None for r in self.rounds)

    def draws(self) -> Iterable[DrawRecord]:
        for r in self.rounds:
            yield from r.draws

    @cached_property
    def positions(self) -> dict[str, int]:
        return {d: i for i, d in enumerate(self.docs)}

    def doc_position(self, doc: str) -> int:
        return self.positions[doc]


def dump_history(h: SampleHistory) -> str:
    out = io.StringIO()
    out.write(_MAGIC + "\n")
    seed = "-" if h.seed is None else str(h.seed)
    out.write(
        f"# topic={h.topic} method={h.method} pool_size={h.pool_size} "
        f"budget={h.budget} batch_size={h.batch_size} seed={seed}\n"
    )
    out.write("# runs " + " ".join(h.runs) + "\n")
    for d in h.draws():
        label = "-" if d.label is None else str(d.label)
        out.write(f"{h.topic} {d.round} {d.draw} {d.doc_id} {d.prob!r} {int(d.was_new)} {label}\n")
    if h.supports_ht:
        judged = [h.doc_position(doc) for doc in h.judgments]
        for r in h.rounds:
            for doc, pos in zip(h.judgments, judged):
                out.write(f"#P {r.index} {doc} {float(r.probs[pos])!r}\n")
    for r in h.rounds:
        if r.run_probs is not None:
            out.write(f"#R {r.index} " + " ".join(repr(float(p)) for p in r.run_probs) + "\n")
    for r in h.rounds:
        out.write(f"#N {r.index} {r.n_draws}\n")
    return out.getvalue()


def load_history(text: str) -> SampleHistory:
    """Inverse of :func:`dump_history`.

    The reloaded history's ``docs`` are the judged documents only, which is
    all the estimators need.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise ValueError("not a version-1 sample history")
    meta = dict(kv.split("=", 1) for kv in lines[1][1:].split())
    runs: tuple[str, ...] = ()
    draws: dict[int, list[DrawRecord]] = {}
    probs: dict[int, dict[str, float]] = {}
    run_probs: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    judgments: dict[str, int] = {}
    for n, line in enumerate(lines[2:], 3):
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "#":
            if len(parts) >= 2 and parts[1] == "runs":
                runs = tuple(parts[2:])
            continue
        if tag == "#P":
            probs.setdefault(int(parts[1]), {})[parts[2]] = float(parts[3])
        elif tag == "#R":
            run_probs[int(parts[1])] = np.array([float(x) for x in parts[2:]])
        elif tag == "#N":
            counts[int(parts[1])] = int(parts[2])
        elif len(parts) == 7:
            _, t, z, doc, p, new, label = parts
            y = None if label == "-" else int(label)
            rec = DrawRecord(int(t), int(z), doc, float(p), y, new == "1")
            draws.setdefault(rec.round, []).append(rec)
            if rec.was_new:
                judgments[doc] = y
        else:
            raise ValueError(f"line {n}: cannot parse {line!r}")
    docs = tuple(judgments)
    rounds = []
    for t in sorted(counts):
        rd = draws.get(t, [])
        if len(rd) != counts[t]:
            raise ValueError(f"round {t}: footer says {counts[t]} draws, found {len(rd)}")
        p = None
        if t in probs:
            p = np.array([probs[t][d] for d in docs])
        elif not docs:
            p = np.zeros(0) if meta["method"] != "mtf" else None
        rounds.append(Round(t, rd, p, run_probs.get(t)))
    seed = None if meta.get("seed", "-") == "-" else int(meta["seed"])
    return SampleHistory(
        topic=meta["topic"],
        method=meta["method"],
        docs=docs,
        rounds=rounds,
        judgments=judgments,
        runs=runs,
        pool_size=int(meta["pool_size"]),
        budget=int(meta["budget"]),
        batch_size=int(meta["batch_size"]),
        seed=seed,
    )
