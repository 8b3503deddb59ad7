"""Fixed test instances shared by the unit and acceptance suites."""

from pathlib import Path

from activesampling.synthetic import SyntheticConfig, synthetic_collection
from activesampling.trec_io import JudgmentPool, RunSet, format_run


def tiny_instance() -> tuple[RunSet, JudgmentPool]:
    """Two runs over ten documents; d0, d1, d2 are relevant."""
    docs = [f"d{i}" for i in range(10)]
    order_b = [3, 7, 1, 9, 0, 5, 2, 8, 6, 4]
    runset = RunSet.from_rankings({"A": {"1": docs}, "B": {"1": [docs[i] for i in order_b]}}, depth=10)
    qrels = JudgmentPool({("1", d): int(d in ("d0", "d1", "d2")) for d in docs})
    return runset, qrels


def three_run_instance() -> tuple[RunSet, JudgmentPool]:
    """Three overlapping runs over a 30-document pool."""
    docs = [f"d{i:02d}" for i in range(30)]
    rankings = {
        "alpha": {"7": docs[:20]},
        "beta": {"7": docs[29:9:-1]},
        "gamma": {"7": docs[::2] + docs[1:10:2]},
    }
    relevant = {"d00", "d03", "d05", "d11", "d17", "d22"}
    qrels = JudgmentPool({("7", d): int(d in relevant) for d in docs})
    return RunSet.from_rankings(rankings, depth=20), qrels


def write_collection(root: Path, config: SyntheticConfig = SyntheticConfig(n_topics=3, n_runs=6, n_docs=60, depth=30, seed=1)):
    """Write a synthetic collection as TREC files: runs/<tag>, qrels.txt, groups.txt."""
    runset, qrels = synthetic_collection(config)
    runs = root / "runs"
    runs.mkdir(parents=True)
    for tag in runset.runs:
        (runs / tag).write_text(format_run(runset.restrict([tag])))
    (root / "qrels.txt").write_text("".join(f"{t} 0 {d} {y}\n" for (t, d), y in sorted(qrels.labels.items())))
    (root / "groups.txt").write_text("".join(f"{tag} g{i % 3}\n" for i, tag in enumerate(runset.runs)))
    return runs, root / "qrels.txt", root / "groups.txt"
