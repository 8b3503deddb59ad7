import io
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activesampling.estimation import first_order_inclusion
from activesampling.history import dump_history
from activesampling.sampler import (
    ConsoleOracle,
    OracleError,
    SamplerConfig,
    SamplingAborted,
    budget_for,
    qrels_oracle,
    run_active_sampling,
    run_mtf,
    run_stratified_sampling,
    sample_topic,
)
from activesampling.synthetic import SyntheticConfig, synthetic_collection
from activesampling.trec_io import JudgmentPool, RunSet, build_pool

GOLDEN = Path(__file__).parent / "fixtures" / "golden_active_7.hist"


def always(label):
    return lambda topic, doc: label


def exact_prior(n):
    w = [(1 + sum(Fraction(1, j) for j in range(r, n + 1))) / n for r in range(1, n + 1)]
    return [x / sum(w) for x in w]


def test_pool_of_one():
    runset = RunSet.from_rankings({"r": {"1": ["only"]}})
    for strategy in ("active", "stratified"):
        h = sample_topic(runset, "1", always(1), SamplerConfig(budget=1, strategy=strategy))
        assert h.n_rounds == 1
        assert h.judgments == {"only": 1}
        assert first_order_inclusion(h, "only") == 1.0


def test_all_nonrelevant_keeps_run_distribution_uniform(three_runs):
    runset, _ = three_runs
    h = run_active_sampling(runset, "7", always(0), SamplerConfig(budget=20, seed=1))
    for r in h.rounds:
        assert r.run_probs.tolist() == [1 / 3] * 3


def test_golden_trace(three_runs):
    runset, qrels = three_runs
    h = run_active_sampling(runset, "7", qrels_oracle(qrels), SamplerConfig(budget=9, batch_size=3, seed=7))
    assert dump_history(h) == GOLDEN.read_text()


def test_golden_trace_round_one_by_hand(three_runs):
    runset, _ = three_runs
    pool = build_pool(runset, "7")
    expected = {d: Fraction(0) for d in pool}
    for run in runset.runs:
        ranking = runset.ranking(run, "7")
        for d, p in zip(ranking, exact_prior(len(ranking))):
            expected[d] += Fraction(1, 3) * p
    assert sum(expected.values()) == 1
    lines = GOLDEN.read_text().splitlines()
    round1 = [ln.split() for ln in lines if ln.startswith("7 1 ")]
    for _, _, _, doc, prob, _, _ in round1:
        assert float(prob) == pytest.approx(float(expected[doc]), rel=1e-12)
    # first draw: invert the cumulative weights at the first uniform of the seeded stream
    u = np.random.default_rng(7).random()
    acc = Fraction(0)
    for d in pool:
        acc += expected[d]
        if u < acc:
            break
    assert round1[0][3] == d


def test_stratified_round_one_matches_active(three_runs):
    runset, qrels = three_runs
    cfg = SamplerConfig(budget=12, seed=5)
    active = run_active_sampling(runset, "7", qrels_oracle(qrels), cfg)
    strat = run_stratified_sampling(runset, "7", qrels_oracle(qrels), cfg)
    assert active.rounds[0].draws == strat.rounds[0].draws
    assert np.array_equal(active.rounds[0].probs, strat.rounds[0].probs)
    for r in strat.rounds:
        assert np.array_equal(r.probs, strat.rounds[0].probs)


@pytest.mark.parametrize("seed", range(4))
def test_single_run_active_equals_stratified(seed):
    runset = RunSet.from_rankings({"solo": {"1": [f"d{i}" for i in range(25)]}})
    qrels = JudgmentPool({("1", f"d{i}"): int(i % 4 == 0) for i in range(25)})
    cfg = SamplerConfig(budget=10, seed=seed)
    a = run_active_sampling(runset, "1", qrels_oracle(qrels), cfg)
    s = run_stratified_sampling(runset, "1", qrels_oracle(qrels), cfg)
    assert dump_history(a).replace("method=active", "") == dump_history(s).replace("method=stratified", "")


def test_mtf_single_run_judges_in_rank_order():
    docs = [f"d{i}" for i in range(10)]
    runset = RunSet.from_rankings({"r": {"1": docs}})
    h = run_mtf(runset, "1", always(0), 4)
    assert list(h.judgments) == docs[:4]
    assert all(r.probs is None for r in h.rounds)


def test_mtf_all_relevant_consumes_first_run_only():
    runset = RunSet.from_rankings({"b": {"1": ["x1", "x2", "x3"]}, "a": {"1": ["y1", "y2", "y3"]}})
    h = run_mtf(runset, "1", always(1), 3)
    assert list(h.judgments) == ["y1", "y2", "y3"]


def test_mtf_switches_on_nonrelevant_and_skips_judged():
    runset = RunSet.from_rankings({"a": {"1": ["n1", "r1", "r2"]}, "b": {"1": ["r1", "r3", "n2"]}})
    qrels = JudgmentPool({("1", d): int(d.startswith("r")) for d in ["n1", "n2", "r1", "r2", "r3"]})
    h = run_mtf(runset, "1", qrels_oracle(qrels), 5)
    # a: n1 demotes it; b: r1, r3, n2 demotes it; back to a, r1 judged already, so r2
    assert list(h.judgments) == ["n1", "r1", "r3", "n2", "r2"]


def test_mtf_is_deterministic_and_stops_when_runs_exhausted(three_runs):
    runset, qrels = three_runs
    a = run_mtf(runset, "7", qrels_oracle(qrels), 25)
    b = run_mtf(runset, "7", qrels_oracle(qrels), 25)
    assert dump_history(a) == dump_history(b)
    everything = run_mtf(runset, "7", qrels_oracle(qrels), 1000)
    assert len(everything.judgments) == 30


def test_budget_exceeding_pool_is_rejected(tiny):
    runset, qrels = tiny
    with pytest.raises(ValueError, match="exceeds the pool"):
        run_active_sampling(runset, "1", qrels_oracle(qrels), SamplerConfig(budget=11))


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(budget=0)
    with pytest.raises(ValueError):
        SamplerConfig(budget=3, batch_size=0)
    with pytest.raises(ValueError):
        SamplerConfig(budget=3, strategy="bandit")


def test_budget_for_rounds_up_without_float_noise():
    assert budget_for(0.07, 100) == 7
    assert budget_for(0.1, 195) == 20
    assert budget_for(0.01, 10) == 1
    assert budget_for(1.0, 37) == 37
    with pytest.raises(ValueError):
        budget_for(0.0, 10)


def test_oracle_failure_keeps_partial_history(three_runs):
    runset, qrels = three_runs
    calls = []

    def flaky(topic, doc):
        calls.append(doc)
        if len(calls) == 5:
            raise OSError("assessor went home")
        return qrels.get(topic, doc)

    with pytest.raises(SamplingAborted) as exc:
        run_active_sampling(runset, "7", flaky, SamplerConfig(budget=10, seed=0))
    assert list(exc.value.history.judgments) == calls[:4]


def test_oracle_must_answer_binary(tiny):
    runset, _ = tiny
    with pytest.raises(SamplingAborted, match="expected 0 or 1"):
        run_active_sampling(runset, "1", always(2), SamplerConfig(budget=2))


def test_unreachable_documents_fall_back_to_uniform():
    # run b's documents become unreachable once a holds all the AP mass
    runset = RunSet.from_rankings({"a": {"1": ["r1", "r2"]}, "b": {"1": ["n1", "n2", "n3"]}})
    qrels = JudgmentPool({("1", d): int(d.startswith("r")) for d in ["r1", "r2", "n1", "n2", "n3"]})
    for seed in range(20):
        h = run_active_sampling(runset, "1", qrels_oracle(qrels), SamplerConfig(budget=5, batch_size=1, seed=seed))
        assert len(h.judgments) == 5


@st.composite
def instances(draw):
    universe = [f"d{i}" for i in range(draw(st.integers(1, 30)))]
    k = draw(st.integers(1, 4))
    rankings = {f"run{j}": {"1": draw(st.lists(st.sampled_from(universe), min_size=1, unique=True))} for j in range(k)}
    runset = RunSet.from_rankings(rankings)
    pool = build_pool(runset, "1")
    rel = draw(st.sets(st.sampled_from(pool)))
    qrels = JudgmentPool({("1", d): int(d in rel) for d in pool})
    budget = draw(st.integers(1, len(pool)))
    return runset, qrels, SamplerConfig(
        budget=budget,
        batch_size=draw(st.integers(1, 4)),
        seed=draw(st.integers(0, 2**32)),
        strategy=draw(st.sampled_from(["active", "stratified", "mtf"])),
    )


@settings(max_examples=150, deadline=None)
@given(instances())
def test_budget_exactness_and_history_consistency(instance):
    runset, qrels, cfg = instance
    h = sample_topic(runset, "1", qrels_oracle(qrels), cfg)
    assert len(h.judgments) == min(cfg.budget, len(build_pool(runset, "1")))
    new = [d.doc_id for d in h.draws() if d.was_new]
    assert sorted(new) == sorted(h.judgments)
    assert all(d.label == h.judgments[d.doc_id] for d in h.draws() if d.was_new)
    assert all(d.label is None and d.doc_id in h.judgments for d in h.draws() if not d.was_new)
    for r in h.rounds:
        if r.probs is not None:
            assert abs(r.probs.sum() - 1) <= 1e-9
            assert abs(r.run_probs.sum() - 1) <= 1e-9
    assert dump_history(h) == dump_history(sample_topic(runset, "1", qrels_oracle(qrels), cfg))


def test_draw_records_carry_the_round_probability(three_runs):
    runset, qrels = three_runs
    h = run_active_sampling(runset, "7", qrels_oracle(qrels), SamplerConfig(budget=15, seed=2))
    for r in h.rounds:
        for d in r.draws:
            assert d.prob == r.probs[h.doc_position(d.doc_id)] > 0


def test_synthetic_collection_shape():
    runset, qrels = synthetic_collection(SyntheticConfig(n_topics=2, n_runs=4, n_docs=50, depth=20, seed=3))
    assert runset.runs == ("run00", "run01", "run02", "run03")
    assert runset.topics == ("1", "2")
    assert all(len(runset.ranking(r, "1")) == 20 for r in runset.runs)
    assert len(qrels.relevant("1")) == 5


def test_qrels_oracle_policies():
    q = JudgmentPool({("1", "a"): 1, ("1", "b"): 0})
    assert qrels_oracle(q)("1", "a") == 1
    assert qrels_oracle(q)("1", "b") == 0
    assert qrels_oracle(q)("1", "zzz") == 0
    assert qrels_oracle(q, "relevant")("1", "zzz") == 1
    with pytest.raises(OracleError):
        qrels_oracle(q, "error")("1", "zzz")
    with pytest.raises(ValueError):
        qrels_oracle(q, "coin-flip")


def test_console_oracle_prompts_caches_and_reprompts(tmp_path):
    journal = tmp_path / "j.txt"
    out = io.StringIO()
    oracle = ConsoleOracle(io.StringIO("yes\n1\n0\n"), out, journal)
    assert oracle("1", "a") == 1
    assert oracle("1", "a") == 1
    assert oracle("1", "b") == 0
    assert out.getvalue().count("topic 1 document a") == 2  # one re-prompt after "yes"
    assert "please answer 0 or 1" in out.getvalue()
    assert journal.read_text() == "1 a 1\n1 b 0\n"
    resumed = ConsoleOracle(io.StringIO(""), io.StringIO(), journal)
    assert resumed("1", "b") == 0
    with pytest.raises(OracleError):
        resumed("1", "c")
