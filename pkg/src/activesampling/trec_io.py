"""Reading and writing TREC run files, qrels, group maps and CSV tables."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence, Union

# str and PathLike are paths; pass content as bytes or a (text or binary) stream.
Source = Union[str, bytes, os.PathLike, IO, Iterable]


class TrecFormatError(ValueError):
    """Raised for malformed run/qrels/group-map input.

    ``errors`` holds ``(line_number, message)`` pairs, one per bad line.
    """

    def __init__(self, errors: Sequence[tuple[int, str]], source: str = "<input>"):
        self.errors = list(errors)
        self.source = source
        self.line = self.errors[0][0] if self.errors else 0
        shown = "; ".join(f"{source}:{n}: {msg}" for n, msg in self.errors[:5])
        if len(self.errors) > 5:
            shown += f"; ... ({len(self.errors) - 5} more)"
        super().__init__(shown)


@dataclass(frozen=True)
class RunEntry:
    topic_id: str
    doc_id: str
    rank: int
    score: float
    run_tag: str


def topic_sort_key(topic: str):
    return (0, int(topic), "") if topic.isdigit() else (1, 0, topic)


@dataclass
class RunSet:
    """Ranked document lists keyed by ``(run_tag, topic)``.

    ``runs`` fixes the run order used everywhere downstream.
    """

    runs: tuple[str, ...] = ()
    lists: dict[tuple[str, str], tuple[RunEntry, ...]] = field(default_factory=dict)
    depth: int | None = None
    errors: list[tuple[int, str]] = field(default_factory=list, compare=False, repr=False)

    @property
    def topics(self) -> tuple[str, ...]:
        return tuple(sorted({t for _, t in self.lists}, key=topic_sort_key))

    def ranking(self, run: str, topic: str) -> tuple[str, ...]:
        return tuple(e.doc_id for e in self.lists.get((run, topic), ()))

    def entries(self) -> Iterable[RunEntry]:
        for run in self.runs:
            for topic in self.topics:
                yield from self.lists.get((run, topic), ())

    def restrict(self, runs: Iterable[str]) -> "RunSet":
        keep = [r for r in self.runs if r in set(runs)]
        lists = {k: v for k, v in self.lists.items() if k[0] in keep}
        return RunSet(tuple(keep), lists, self.depth)

    def merge(self, other: "RunSet") -> "RunSet":
        clash = set(self.runs) & set(other.runs)
        if clash:
            raise ValueError(f"duplicate run tags across inputs: {sorted(clash)}")
        return RunSet(self.runs + other.runs, {**self.lists, **other.lists}, self.depth)

    @classmethod
    def from_rankings(
        cls, rankings: Mapping[str, Mapping[str, Sequence[str]]], depth: int | None = None
    ) -> "RunSet":
        """Build from ``{run_tag: {topic: [doc, ...]}}``; scores are ``n - rank + 1``."""
        lists = {}
        for run, per_topic in rankings.items():
            for topic, docs in per_topic.items():
                if len(set(docs)) != len(docs):
                    raise ValueError(f"duplicate document in run {run} topic {topic}")
                n = len(docs)
                lists[(run, topic)] = tuple(
                    RunEntry(topic, d, r, float(n - r + 1), run) for r, d in enumerate(docs, 1)
                )
        return cls(tuple(rankings), lists, depth)


@dataclass
class JudgmentPool:
    """Binary relevance labels keyed by ``(topic, doc)``.

    :meth:`get` returns ``None`` for unjudged pairs so callers can decide
    how to treat them.
    """

    labels: dict[tuple[str, str], int] = field(default_factory=dict)

    def get(self, topic: str, doc: str) -> int | None:
        return self.labels.get((topic, doc))

    def __contains__(self, key) -> bool:
        return key in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def topics(self) -> tuple[str, ...]:
        return tuple(sorted({t for t, _ in self.labels}, key=topic_sort_key))

    def relevant(self, topic: str) -> set[str]:
        return {d for (t, d), y in self.labels.items() if t == topic and y}


def _lines(source: Source) -> Iterable[Union[str, bytes]]:
    if isinstance(source, (str, os.PathLike)):
        source = Path(source).read_bytes()
    if isinstance(source, bytes):
        yield from source.splitlines()
        return
    yield from source


def _source_name(source: Source) -> str:
    if isinstance(source, (str, os.PathLike)):
        return str(source)
    return str(getattr(source, "name", "<input>"))


def _decode_lines(source: Source, name: str) -> list[str]:
    lines = []
    for n, line in enumerate(_lines(source), 1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise TrecFormatError([(n, f"line is not valid UTF-8 ({exc.reason})")], name) from None
        lines.append(line.rstrip("\r\n"))
    return lines


def _parse_score(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError
    return value


def parse_run_file(source: Source, *, strict: bool = True) -> RunSet:
    """Parse a TREC run (``topic Q0 doc rank score tag``).

    Lists are reordered by descending score with ties broken by ascending
    doc id, then re-ranked 1..n. With ``strict=False`` bad lines are
    skipped and collected on ``RunSet.errors`` instead of raising.
    """
    name = _source_name(source)
    errors: list[tuple[int, str]] = []
    grouped: dict[tuple[str, str], dict[str, tuple[int, float]]] = {}
    order: list[str] = []
    for n, raw in enumerate(_decode_lines(source, name), 1):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 6:
            errors.append((n, f"expected 6 fields, got {len(parts)}"))
            continue
        topic, q0, doc, rank_s, score_s, tag = parts
        if q0.upper() != "Q0":
            errors.append((n, f"second field must be Q0, got {q0!r}"))
            continue
        try:
            rank = int(rank_s)
        except ValueError:
            errors.append((n, f"non-integer rank {rank_s!r}"))
            continue
        if rank < 1:
            errors.append((n, f"rank must be positive, got {rank}"))
            continue
        try:
            score = _parse_score(score_s)
        except ValueError:
            errors.append((n, f"non-numeric score {score_s!r}"))
            continue
        docs = grouped.setdefault((tag, topic), {})
        if doc in docs:
            errors.append((n, f"duplicate document {doc} for topic {topic} in run {tag}"))
            continue
        if tag not in order:
            order.append(tag)
        docs[doc] = (rank, score)
    if errors and strict:
        raise TrecFormatError(errors, name)
    lists = {}
    for (tag, topic), docs in grouped.items():
        ranked = sorted(docs.items(), key=lambda kv: (-kv[1][1], kv[0]))
        lists[(tag, topic)] = tuple(
            RunEntry(topic, doc, r, score, tag) for r, (doc, (_, score)) in enumerate(ranked, 1)
        )
    return RunSet(tuple(order), lists, errors=errors)


def read_runs(paths: Iterable[Union[str, os.PathLike]]) -> RunSet:
    """Load and merge run files; directories are expanded (sorted, non-hidden files)."""
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.is_file() and not f.name.startswith(".")))
        else:
            files.append(p)
    if not files:
        raise FileNotFoundError("no run files found")
    result = RunSet()
    for f in files:
        result = result.merge(parse_run_file(f))
    runs = tuple(sorted(result.runs))
    return RunSet(runs, result.lists, result.depth)


def format_run(runset: RunSet) -> str:
    out = io.StringIO()
    for e in runset.entries():
        out.write(f"{e.topic_id} Q0 {e.doc_id} {e.rank} {e.score!r} {e.run_tag}\n")
    return out.getvalue()


def parse_qrels(source: Source) -> JudgmentPool:
    """Parse ``topic iter doc rel`` lines; grades above zero become 1."""
    name = _source_name(source)
    errors: list[tuple[int, str]] = []
    labels: dict[tuple[str, str], int] = {}
    for n, raw in enumerate(_decode_lines(source, name), 1):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 4:
            errors.append((n, f"expected 4 fields, got {len(parts)}"))
            continue
        topic, _, doc, rel_s = parts
        try:
            rel = int(rel_s)
        except ValueError:
            errors.append((n, f"non-integer relevance {rel_s!r}"))
            continue
        y = 1 if rel > 0 else 0
        key = (topic, doc)
        if key in labels and labels[key] != y:
            errors.append((n, f"conflicting judgments for topic {topic} document {doc}"))
            continue
        labels[key] = y
    if errors:
        raise TrecFormatError(errors, name)
    return JudgmentPool(labels)


def parse_group_map(source: Source) -> dict[str, str]:
    """Parse ``run_tag group_id`` lines."""
    name = _source_name(source)
    errors: list[tuple[int, str]] = []
    groups: dict[str, str] = {}
    for n, raw in enumerate(_decode_lines(source, name), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split()
        if len(parts) != 2:
            errors.append((n, f"expected 2 fields, got {len(parts)}"))
            continue
        tag, group = parts
        if tag in groups and groups[tag] != group:
            errors.append((n, f"run {tag} mapped to two groups"))
            continue
        groups[tag] = group
    if errors:
        raise TrecFormatError(errors, name)
    return groups


def truncate_to_depth(runset: RunSet, k: int) -> RunSet:
    if k < 1:
        raise ValueError(f"depth must be >= 1, got {k}")
    lists = {key: entries[:k] for key, entries in runset.lists.items()}
    depth = k if runset.depth is None else min(k, runset.depth)
    return RunSet(runset.runs, lists, depth)


def build_pool(runset: RunSet, topic: str) -> tuple[str, ...]:
    """Union of all runs' lists for ``topic``, sorted by doc id."""
    docs: set[str] = set()
    found = False
    for run in runset.runs:
        entries = runset.lists.get((run, topic))
        if entries is not None:
            found = True
            docs.update(e.doc_id for e in entries)
    if not found:
        raise KeyError(f"unknown topic {topic!r}")
    return tuple(sorted(docs))


def _csv_value(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return "" if value is None else str(value)


def format_csv(records: Iterable[Mapping], fieldnames: Sequence[str]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(fieldnames)
    for rec in records:
        writer.writerow([_csv_value(rec.get(f)) for f in fieldnames])
    return out.getvalue()


def write_csv(records: Iterable[Mapping], fieldnames: Sequence[str], path: Union[str, os.PathLike]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_csv(records, fieldnames), encoding="utf-8")
