from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from activesampling.distributions import (
    DocDistribution,
    RankedPool,
    ap_prior,
    joint_distribution,
    run_distribution_from_estimates,
    sample_doc,
    uniform_run_distribution,
)


def prior_by_summation(n):
    """Exact rational AP-prior: w(r) = (1 + sum_{j>=r} 1/j) / n, normalised."""
    w = [(1 + sum(Fraction(1, j) for j in range(r, n + 1))) / n for r in range(1, n + 1)]
    total = sum(w)
    return [float(x / total) for x in w]


def test_ap_prior_small_cases():
    assert ap_prior(1).tolist() == [1.0]
    assert ap_prior(2) == pytest.approx([0.625, 0.375], abs=1e-15)


@pytest.mark.parametrize("n", [3, 5, 17, 100])
def test_ap_prior_matches_direct_summation(n):
    assert ap_prior(n) == pytest.approx(prior_by_summation(n), rel=1e-12)


@given(st.integers(1, 2000))
def test_ap_prior_normalised_and_strictly_decreasing(n):
    p = ap_prior(n)
    assert abs(p.sum() - 1) <= 1e-9
    assert np.all(np.diff(p) < 0)


def test_ap_prior_rejects_empty():
    with pytest.raises(ValueError):
        ap_prior(0)


def test_uniform_run_distribution():
    assert uniform_run_distribution(4).tolist() == [0.25] * 4
    assert uniform_run_distribution(1).tolist() == [1.0]
    with pytest.raises(ValueError):
        uniform_run_distribution(0)


def test_run_distribution_from_estimates_examples():
    assert run_distribution_from_estimates([0.2, 0.3, 0.5]) == pytest.approx([0.2, 0.3, 0.5])
    assert run_distribution_from_estimates([0.1, 0.1]) == pytest.approx([0.5, 0.5])
    assert run_distribution_from_estimates([0, 0, 0]) == pytest.approx([1 / 3] * 3)
    with pytest.raises(ValueError):
        run_distribution_from_estimates([0.1, -0.1])
    with pytest.raises(ValueError):
        run_distribution_from_estimates([float("nan")])


@given(
    st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=20).filter(lambda a: sum(a) > 1e-6),
    st.floats(1e-3, 1e3),
)
def test_run_distribution_is_scale_invariant(a, c):
    assert run_distribution_from_estimates(a) == pytest.approx(
        run_distribution_from_estimates([c * x for x in a]), abs=1e-12
    )


def test_joint_single_run_maps_the_prior_onto_its_list():
    docs = ["c", "a", "b"]
    dist = joint_distribution([1.0], [ap_prior(3)], [docs])
    assert dist.docs == ("a", "b", "c")
    for r, d in enumerate(docs):
        assert dist.prob(d) == pytest.approx(ap_prior(3)[r])


def test_joint_identical_runs_equal_one_run():
    docs = ["x", "y", "z", "w"]
    one = joint_distribution([1.0], [ap_prior(4)], [docs])
    two = joint_distribution([0.3, 0.7], [ap_prior(4)] * 2, [docs, docs])
    assert two.probs == pytest.approx(one.probs, abs=1e-15)


def test_joint_hand_example_and_unreached_doc():
    # run 1 = (a, b), run 2 = (b, c); pool also holds d which no run retrieves
    dist = joint_distribution([0.25, 0.75], [ap_prior(2)] * 2, [["a", "b"], ["b", "c"]], pool=["a", "b", "c", "d"])
    expected = {"a": 0.25 * 0.625, "b": 0.25 * 0.375 + 0.75 * 0.625, "c": 0.75 * 0.375, "d": 0.0}
    for doc, p in expected.items():
        assert dist.prob(doc) == pytest.approx(p, abs=1e-15)
    # a zero-probability run contributes nothing
    assert joint_distribution([1.0, 0.0], [ap_prior(2)] * 2, [["a", "b"], ["b", "c"]]).prob("c") == 0.0


def test_ranked_pool_rejects_inconsistent_indexing():
    with pytest.raises(ValueError, match="not in the pool"):
        RankedPool(["a"], [["a", "b"]])
    with pytest.raises(ValueError):
        RankedPool(["a", "b"], [["a", "b"]], rank_dists=[ap_prior(3)])
    with pytest.raises(ValueError):
        RankedPool(["a", "a"], [["a"]])
    with pytest.raises(ValueError):
        RankedPool(["a", "b"], [["a", "b"]]).joint(np.array([0.5, 0.5]))


@st.composite
def ranked_instances(draw):
    universe = [f"d{i}" for i in range(draw(st.integers(1, 40)))]
    lists = draw(st.lists(st.lists(st.sampled_from(universe), min_size=1, unique=True), min_size=1, max_size=8))
    weights = draw(st.lists(st.floats(0, 1), min_size=len(lists), max_size=len(lists)))
    return lists, run_distribution_from_estimates(weights)


@given(ranked_instances())
def test_joint_mass_per_run_equals_run_probability(instance):
    lists, run_p = instance
    pool = sorted({d for lst in lists for d in lst})
    ranked = RankedPool(pool, lists)
    joint = ranked.joint(run_p)
    assert abs(joint.sum() - 1) <= 1e-9
    assert np.all(joint >= 0)
    per_run = np.bincount(ranked.owner, weights=run_p[ranked.owner] * ranked.flat_prior, minlength=len(lists))
    assert per_run == pytest.approx(run_p, abs=1e-9)


def test_sample_doc_degenerate_and_empty():
    rng = np.random.default_rng(0)
    one = DocDistribution(("only",), np.array([1.0]))
    assert {sample_doc(one, rng) for _ in range(100)} == {0}
    skip = DocDistribution(("a", "b", "c"), np.array([0.0, 1.0, 0.0]))
    assert {sample_doc(skip, rng) for _ in range(1000)} == {1}
    with pytest.raises(ValueError):
        sample_doc(DocDistribution(("a",), np.array([0.0])), rng)


def test_sample_doc_is_reproducible():
    dist = DocDistribution(tuple("abcde"), np.array([0.1, 0.2, 0.3, 0.25, 0.15]))
    rng1, rng2 = np.random.default_rng(7), np.random.default_rng(7)
    assert [sample_doc(dist, rng1) for _ in range(500)] == [sample_doc(dist, rng2) for _ in range(500)]


def test_fair_coin_frequencies():
    dist = DocDistribution(("a", "b"), np.array([0.5, 0.5]))
    rng = np.random.default_rng(123)
    n = 100_000
    hits = sum(sample_doc(dist, rng) == 0 for _ in range(n))
    sigma = (0.25 / n) ** 0.5
    assert abs(hits / n - 0.5) <= 3 * sigma
    assert 0.49 <= hits / n <= 0.51


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_chi_square_goodness_of_fit(seed):
    rng = np.random.default_rng(1000 + seed)
    p = rng.dirichlet(np.ones(10))
    dist = DocDistribution(tuple(f"d{i}" for i in range(10)), p)
    draw_rng = np.random.default_rng(seed)
    n = 100_000
    counts = np.bincount([sample_doc(dist, draw_rng) for _ in range(n)], minlength=10)
    assert stats.chisquare(counts, n * p).pvalue > 0.001
