import warnings

import numpy as np
import pytest

from martfl.aggregation import (DistributionKind, NoPurchasableModels, adjust_baseline, classify_distribution,
                                cluster_scores, estimate_cluster_count, gap_statistic, kappa, kmeans_scores,
                                select_and_weight)
from martfl.baselines import krum_scores, reference_aggregate
from martfl.model import ConfusionMatrix, Dataset, LocalModel

import oracles

TWO_GROUPS = [0.01, 0.02, 0.03, 0.91, 0.92, 0.93]


# -- gap statistic ---------------------------------------------------------

def test_gap_identical_and_single_scores():
    assert estimate_cluster_count([0.4] * 7) == 1
    assert estimate_cluster_count([0.4]) == 1
    with pytest.raises(ValueError):
        estimate_cluster_count([])


def test_gap_two_groups_matches_bruteforce():
    refs = np.random.default_rng(0).uniform(min(TWO_GROUPS), max(TWO_GROUPS), size=(10, len(TWO_GROUPS)))
    assert oracles.gap_choice(TWO_GROUPS, refs, 4) == 2
    assert estimate_cluster_count(TWO_GROUPS, k_max=4, seed=0) == 2
    assert estimate_cluster_count(TWO_GROUPS, seed=0) == 2


def test_dispersion_on_separated_data_is_optimal():
    for k in range(1, 5):
        _, best = oracles.best_partition(TWO_GROUPS, k)
        assert kmeans_scores(TWO_GROUPS, k).sse(TWO_GROUPS) == pytest.approx(best, abs=1e-12)
    gaps, _ = gap_statistic(TWO_GROUPS, 4, np.random.default_rng(0).uniform(0.01, 0.93, size=(10, 6)))
    assert int(np.argmax(gaps)) + 1 == 2


def test_gap_is_deterministic_and_bounded():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, 9)
    assert estimate_cluster_count(x, seed=3) == estimate_cluster_count(x, seed=3)
    assert 1 <= estimate_cluster_count(x, k_max=3) <= 3


# -- k-means --------------------------------------------------------------

def test_kmeans_trivial_cases():
    x = [0.3, 0.1, 0.5]
    r = kmeans_scores(x, 1)
    assert r.centroids[0] == pytest.approx(0.3)
    r = kmeans_scores(x, 3)
    assert r.sse(x) == 0.0 and sorted(r.labels.tolist()) == [0, 1, 2]
    with pytest.raises(ValueError):
        kmeans_scores(x, 4)


def test_kmeans_matches_exhaustive_partition():
    x = [0.1, 0.2, 0.8, 0.9]
    best, _ = oracles.best_partition(x, 2)
    r = kmeans_scores(x, 2)
    groups = [sorted(v for v, l in zip(x, r.labels) if l == j) for j in range(2)]
    assert groups == best == [[0.1, 0.2], [0.8, 0.9]]


@pytest.mark.parametrize("seed", range(20))
def test_kmeans_near_optimal_on_random_sets(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 8).tolist()
    k = int(rng.integers(1, 4))
    r = kmeans_scores(x, k)
    assert len(set(r.labels.tolist())) == k
    _, best = oracles.best_partition(x, k)
    assert r.sse(x) >= best - 1e-12


# -- distribution classes --------------------------------------------------

def test_classify_examples():
    assert classify_distribution(1, [0.50, 0.52, 0.53], 0.05) is DistributionKind.SINGLE_GATHERED
    assert classify_distribution(1, [0.1, 0.3, 0.5], 0.05) is DistributionKind.SINGLE_SCATTERED
    assert classify_distribution(3, [0.1, 0.3, 0.5], 0.05) is DistributionKind.MULTI
    with pytest.raises(ValueError):
        classify_distribution(1, [0.1], 0.0)


def test_cluster_scores_multi_trace():
    scores = {i: s for i, s in enumerate([0.9, 0.91, 0.92, 0.5, 0.51, 0.52, -0.3, -0.31, -0.32])}
    tr = cluster_scores(scores, 0.05)
    assert tr.distribution_kind is DistributionKind.MULTI
    assert tr.g_hat == 3
    assert tr.second_layer == {0: "low", 1: "high", 2: "high"}
    assert set(tr.first_layer) == set(scores)


# -- selection and weights -------------------------------------------------

def _decide(scores, beta=0.0, seed=0, anchors=()):
    rest = {i: s for i, s in scores.items() if i not in anchors}
    tr = cluster_scores(rest, 0.05) if rest else None
    return select_and_weight(scores, tr, 0.05, beta, seed=seed, anchors=anchors)


def test_gathered_selects_everyone():
    d = _decide({i: 0.5 + 0.005 * i for i in range(5)})
    assert d.trace.distribution_kind is DistributionKind.SINGLE_GATHERED
    assert len(d.selected) == 5
    assert sum(d.weights.values()) == pytest.approx(1.0, abs=1e-9)


def test_two_separated_groups_are_multi():
    scores = {0: 0.9, 1: 0.85, 2: 0.1, 3: 0.05}
    d = _decide(scores)
    assert d.trace.distribution_kind is DistributionKind.MULTI
    assert d.p1 == {0, 1} and d.p2 == {2, 3}


def test_scattered_keeps_high_half():
    scores = {0: 0.1, 1: 0.3, 2: 0.5, 3: 0.7}
    best, _ = oracles.best_partition(list(scores.values()), 2)
    d = _decide(scores)
    assert d.trace.distribution_kind is DistributionKind.SINGLE_SCATTERED
    assert {scores[i] for i in d.selected} == set(best[1]) == {0.5, 0.7}
    assert d.p2 == {0, 1}


def test_multi_qualified_weight_is_damped():
    scores = {0: 0.9, 1: 0.91, 2: 0.92, 3: 0.5, 4: 0.51, 5: 0.52, 6: -0.3, 7: -0.31, 8: -0.32}
    d = _decide(scores)
    assert d.p1 == {0, 1, 2}
    assert d.qualified == {3, 4, 5}
    assert d.p2 == {6, 7, 8}
    # a qualified DP scoring like a top DP would still weigh less
    damp = d.damping[3]
    assert damp > 1.0
    assert d.weights[3] / scores[3] < d.weights[0] / scores[0]


def test_beta_picks_ceil_of_p2():
    scores = {0: 0.9, 1: 0.85, 2: 0.1, 3: 0.05, 4: 0.07}
    d = _decide(scores, beta=0.1, seed=4)
    assert len(d.picked) == 1 and d.picked <= d.p2
    assert d.picked <= d.selected
    assert _decide(scores, beta=1.0).picked == d.p2


def test_anchor_joins_p1():
    scores = {0: 1.0, 1: 0.6, 2: 0.62, 3: -0.2, 4: -0.25}
    d = _decide(scores, anchors={0})
    assert 0 in d.p1 and d.weights[0] > 0
    assert d.p2 == {3, 4}


def test_no_purchasable_models():
    with pytest.raises(NoPurchasableModels):
        _decide({0: -0.5, 1: -0.52, 2: -0.51})


def test_trace_must_cover_non_anchors():
    tr = cluster_scores({0: 0.1, 1: 0.2}, 0.05)
    with pytest.raises(ValueError):
        select_and_weight({0: 0.1, 1: 0.2, 2: 0.3}, tr, 0.05, 0.1)
    with pytest.raises(ValueError):
        select_and_weight({0: 0.1, 1: 0.2}, tr, 0.05, 1.5)


# -- kappa and baseline ----------------------------------------------------

@pytest.mark.parametrize("cm,expected", [([[10, 0], [0, 10]], 1.0), ([[5, 5], [5, 5]], 0.0),
                                         ([[20, 5], [10, 15]], 0.4)])
def test_kappa_examples(cm, expected):
    assert float(oracles.cohen_kappa(cm)) == pytest.approx(expected)
    assert kappa(ConfusionMatrix(np.array(cm))) == pytest.approx(expected, abs=1e-12)


def test_kappa_degenerate_and_random():
    assert kappa(np.array([[7, 0], [0, 0]])) == 0.0
    with pytest.raises(ValueError):
        kappa(np.zeros((2, 2)))
    rng = np.random.default_rng(2)
    for _ in range(20):
        cm = rng.integers(0, 20, (3, 3))
        cm[0, 0] += 1
        assert kappa(cm) == pytest.approx(float(oracles.cohen_kappa(cm)), abs=1e-12)


def _root():
    x = np.array([[1.0, 0.0], [0.0, 1.0]] * 5)
    return Dataset(x, np.array([0, 1] * 5))


def test_adjust_baseline_prefers_perfect_model():
    g = LocalModel(np.zeros(6), "linear", 2, 2)
    good = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    bad = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    st = adjust_baseline({3: bad, 7: good}, _root(), g)
    assert st.preferred_dps == [7]
    assert np.array_equal(st.baseline_update, good)
    assert adjust_baseline({5: bad}, _root(), g).preferred_dps == [5]
    # order of the purchased map does not matter
    assert adjust_baseline({7: good, 3: bad}, _root(), g).kappas == st.kappas


def test_adjust_baseline_top_two_by_kappa():
    g = LocalModel(np.zeros(6), "linear", 2, 2)
    updates = {0: np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
               1: np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.5]),
               2: np.array([0.0, 1.0, 1.0, 0.0, 0.0, 0.0])}
    st = adjust_baseline(updates, _root(), g, top_n=2)
    ranked = sorted(st.kappas, key=lambda i: -st.kappas[i])
    assert st.preferred_dps == ranked[:2] == [0, 1]
    assert st.kappas[2] < 0
    nxt = st.next_baseline({0: np.ones(6), 1: np.zeros(6), 2: np.full(6, 9.0)})
    assert np.allclose(nxt, 0.5)


def test_adjust_baseline_empty_keeps_previous():
    g = LocalModel(np.zeros(6), "linear", 2, 2)
    prev = adjust_baseline({1: np.ones(6)}, _root(), g)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert adjust_baseline({}, _root(), g, previous=prev) is prev
    assert caught
    with pytest.raises(ValueError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            adjust_baseline({}, _root(), g)


# -- reference aggregators -------------------------------------------------

def test_fedavg_symmetry_and_median():
    u = np.array([1.0, -2.0, 3.0])
    r = reference_aggregate("FedAvg", {0: u, 1: -u}, {0: 10, 1: 10})
    assert np.allclose(r.update, 0.0)
    r = reference_aggregate("Median", {0: np.array([1.0]), 1: np.array([2.0]), 2: np.array([100.0])})
    assert r.update[0] == 2.0


def test_krum_excludes_outlier_like_bruteforce():
    rng = np.random.default_rng(0)
    base = rng.normal(size=4)
    vecs = [base.copy() for _ in range(4)] + [base + 50.0]
    order = oracles.krum_pick([v.tolist() for v in vecs], 1)
    assert order[-1] == 4
    r = reference_aggregate("Krum", dict(enumerate(vecs)), f=1)
    assert 4 not in r.selected and len(r.selected) == 2
    ks = krum_scores(np.stack(vecs), 1)
    assert np.argmax(ks) == 4
    with pytest.raises(ValueError):
        reference_aggregate("Krum", dict(enumerate(vecs[:3])), f=1)


def test_krum_scores_match_bruteforce_ranking():
    rng = np.random.default_rng(7)
    vecs = rng.normal(size=(9, 5))
    brute = oracles.krum_pick(vecs.tolist(), 2)
    assert list(np.lexsort((np.arange(9), krum_scores(vecs, 2)))) == brute


def test_fltrust_relu_and_norm_scaling():
    g = np.array([1.0, 0.0])
    ups = {0: np.array([10.0, 0.0]), 1: np.array([-1.0, 0.0]), 2: np.array([1.0, 1.0])}
    r = reference_aggregate("FLTrust", ups, baseline=g)
    assert r.selected == {0, 2}
    trust = np.array([1.0, 0.0, np.sqrt(0.5)])
    scaled = np.array([[1.0, 0.0], [-1.0, 0.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    assert np.allclose(r.update, (trust / trust.sum()) @ scaled)
    with pytest.raises(ValueError):
        reference_aggregate("FLTrust", ups)
    with pytest.raises(ValueError):
        reference_aggregate("Mean", ups)
