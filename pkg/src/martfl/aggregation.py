"""Quality-aware aggregation: hierarchical score clustering and dynamic baselines."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import Dataset, LocalModel, evaluate

GAP_REFERENCES = 10
GAP_K_MAX = 10
KMEANS_MAX_ITER = 100


class DistributionKind(str, enum.Enum):
    SINGLE_GATHERED = "SingleGathered"
    SINGLE_SCATTERED = "SingleScattered"
    MULTI = "Multi"


class NoPurchasableModels(RuntimeError):
    """Every candidate scored <= 0, so nothing can be bought this epoch."""


@dataclass
class KMeansResult:
    labels: np.ndarray  # cluster index per point, clusters ordered by ascending centroid
    centroids: np.ndarray

    def sse(self, points) -> float:
        points = np.asarray(points, dtype=np.float64)
        return float(np.sum((points - self.centroids[self.labels]) ** 2))


def _as_scores(scores) -> tuple[list, np.ndarray]:
    if isinstance(scores, dict):
        ids = sorted(scores)
        vals = np.array([scores[i] for i in ids], dtype=np.float64)
    else:
        vals = np.asarray(scores, dtype=np.float64).ravel()
        ids = list(range(len(vals)))
    if not np.all(np.isfinite(vals)):
        raise ValueError("scores must be finite")
    return ids, vals


def kmeans_scores(scores, k: int, seed: int = 0) -> KMeansResult:
    """Lloyd's algorithm on 1-D scores.

    Initial centroids sit at the (i + 0.5)/k quantiles, so the result does not
    depend on ``seed``; it is accepted for interface symmetry. Ties go to the
    lower cluster index and no cluster is left empty.
    """
    _, x = _as_scores(scores)
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if k == n:
        order = np.argsort(x, kind="stable")
        labels = np.empty(n, dtype=np.int64)
        labels[order] = np.arange(n)
        return KMeansResult(labels, x[order].copy())

    cent = np.quantile(x, (np.arange(k) + 0.5) / k)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        new = np.argmin(np.abs(x[:, None] - cent[None, :]), axis=1)
        new = _fill_empty(x, new, cent, k)
        new_cent = np.array([x[new == j].mean() for j in range(k)])
        converged = np.array_equal(new, labels) and np.allclose(new_cent, cent, rtol=0, atol=0)
        labels, cent = new, new_cent
        if converged:
            break

    order = np.argsort(cent, kind="stable")
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    return KMeansResult(remap[labels], cent[order])


def _fill_empty(x, labels, cent, k):
    labels = labels.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        sizes = np.bincount(labels, minlength=k)
        donors = np.flatnonzero(sizes[labels] > 1)
        dist = np.abs(x[donors] - cent[labels[donors]])
        labels[donors[int(np.argmax(dist))]] = j
    return labels


def _log_dispersion(points, k: int, floor: float) -> float:
    res = kmeans_scores(points, k)
    return math.log(max(res.sse(points), floor))


def gap_statistic(scores, k_max: int, refs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gap(k) and its standard error s_k for k = 1..k_max against reference draws ``refs`` (B x n)."""
    _, x = _as_scores(scores)
    span = float(x.max() - x.min())
    floor = max(span, 1e-12) ** 2 * 1e-12
    gaps = np.zeros(k_max)
    errs = np.zeros(k_max)
    B = len(refs)
    for k in range(1, k_max + 1):
        ref_logs = np.array([_log_dispersion(r, k, floor) for r in refs])
        gaps[k - 1] = ref_logs.mean() - _log_dispersion(x, k, floor)
        errs[k - 1] = ref_logs.std() * math.sqrt(1.0 + 1.0 / B)
    return gaps, errs


def estimate_cluster_count(scores, k_max: int = GAP_K_MAX, B: int = GAP_REFERENCES, seed: int = 0) -> int:
    """Number of score clusters by the gap statistic.

    References are ``default_rng(seed).uniform(min, max, size=(B, n))``; the
    choice is the smallest k with Gap(k) >= Gap(k+1) - s_{k+1}.
    """
    _, x = _as_scores(scores)
    if len(x) == 0:
        raise ValueError("empty score set")
    if k_max < 1 or B < 1:
        raise ValueError("k_max and B must be >= 1")
    lo, hi = float(x.min()), float(x.max())
    k_cap = min(k_max, len(x), len(np.unique(x)))
    if k_cap == 1:
        return 1
    refs = np.random.default_rng(seed).uniform(lo, hi, size=(B, len(x)))
    gaps, errs = gap_statistic(x, k_cap, refs)
    for k in range(1, k_cap):
        if gaps[k - 1] >= gaps[k] - errs[k]:
            return k
    return k_cap


def classify_distribution(g_hat: int, scores, T: float) -> DistributionKind:
    if T <= 0:
        raise ValueError("threshold T must be positive")
    _, x = _as_scores(scores)
    if g_hat >= 2:
        return DistributionKind.MULTI
    if float(x.max() - x.min()) < T:
        return DistributionKind.SINGLE_GATHERED
    return DistributionKind.SINGLE_SCATTERED


@dataclass
class ClusteringTrace:
    g_hat: int
    first_layer: dict  # dp_id -> first-layer cluster index
    centroids: list  # first-layer centroids, ascending
    distribution_kind: DistributionKind
    second_layer: dict | None = None  # first-layer cluster -> "high" | "low"
    top_centroid: float = 0.0


def cluster_scores(scores: dict, T: float, seed: int = 0, k_max: int = GAP_K_MAX,
                   B: int = GAP_REFERENCES) -> ClusteringTrace:
    ids, x = _as_scores(scores)
    g_hat = estimate_cluster_count(x, k_max=min(k_max, len(x)), B=B, seed=seed)
    first = kmeans_scores(x, g_hat)
    kind = classify_distribution(g_hat, x, T)
    trace = ClusteringTrace(
        g_hat=g_hat,
        first_layer={i: int(l) for i, l in zip(ids, first.labels)},
        centroids=[float(c) for c in first.centroids],
        distribution_kind=kind,
        top_centroid=float(first.centroids.max()),
    )
    if kind is DistributionKind.MULTI:
        second = kmeans_scores(first.centroids, 2)
        high_label = second.labels[int(np.argmax(first.centroids))]
        trace.second_layer = {j: ("high" if second.labels[j] == high_label else "low")
                              for j in range(g_hat)}
    return trace


@dataclass
class AggregationDecision:
    p1: set
    p2: set
    weights: dict  # dp_id -> non-negative weight, sums to 1
    threshold: float
    beta: float
    trace: ClusteringTrace | None
    damping: dict = field(default_factory=dict)
    qualified: set = field(default_factory=set)  # non-top clusters of the high category
    picked: set = field(default_factory=set)  # the random beta-subset of p2

    @property
    def selected(self) -> set:
        return set(self.weights)

    @property
    def purchased(self) -> set:
        return {i for i, w in self.weights.items() if w > 0}


def select_and_weight(scores: dict, trace: ClusteringTrace | None, T: float, beta: float,
                      seed: int = 0, anchors=()) -> AggregationDecision:
    """P1/P2 split and distance-damped, score-proportional weights.

    ``trace`` clusters every DP except the ``anchors`` (the DPs whose update
    served as the baseline, which score 1 against themselves and join P1
    directly).  P1 members weigh ``max(0, s)``.  Qualified DPs (the other
    high-category clusters in the multi-cluster case) and the sampled P2
    members weigh ``max(0, s) / (1 + |c_top - c|)``, with ``c`` the centroid
    of their own cluster.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    ids, x = _as_scores(scores)
    score = dict(zip(ids, x))
    anchors = set(anchors) & set(ids)
    rest = [i for i in ids if i not in anchors]
    centre = {}  # dp -> centroid of the cluster its damping is measured from
    p1, qualified, p2 = set(anchors), set(), set()
    c_top = max((score[i] for i in anchors), default=0.0)
    if rest:
        if trace is None or set(trace.first_layer) != set(rest):
            raise ValueError("clustering trace does not cover the non-anchor DPs")
        kind = trace.distribution_kind
        if kind is DistributionKind.SINGLE_GATHERED:
            p1 |= set(rest)
            c_top = trace.top_centroid
        elif kind is DistributionKind.SINGLE_SCATTERED:
            split = kmeans_scores([score[i] for i in rest], 2)
            p1 |= {i for i, l in zip(rest, split.labels) if l == 1}
            p2 = {i for i, l in zip(rest, split.labels) if l == 0}
            c_top = float(split.centroids[1])
            centre = {i: float(split.centroids[0]) for i in p2}
        else:
            top = int(np.argmax(trace.centroids))
            c_top = trace.centroids[top]
            high = {j for j, cat in trace.second_layer.items() if cat == "high"}
            for i in rest:
                j = trace.first_layer[i]
                if j == top:
                    p1.add(i)
                elif j in high:
                    qualified.add(i)
                else:
                    p2.add(i)
                centre[i] = trace.centroids[j]

    # rank P2 by score so that dp relabelling does not change which ones are drawn
    ranked = sorted(p2, key=lambda i: (-score[i], i))
    take = math.ceil(beta * len(ranked))
    picks = []
    if take:
        rng = np.random.default_rng(seed)
        picks = [ranked[j] for j in sorted(rng.choice(len(ranked), size=take, replace=False))]

    raw, damping = {}, {}
    for i in p1:
        raw[i] = max(0.0, score[i])
    for i in sorted(qualified) + picks:
        damping[i] = 1.0 + abs(c_top - centre[i])
        raw[i] = max(0.0, score[i]) / damping[i]
    total = sum(raw.values())
    if not raw or total <= 0.0:
        raise NoPurchasableModels(f"no positively scored model among {len(raw)} selected")
    weights = {i: raw[i] / total for i in sorted(raw)}
    return AggregationDecision(p1=p1, p2=p2, weights=weights, threshold=T, beta=beta, trace=trace,
                               damping=damping, qualified=qualified, picked=set(picks))


def kappa(cm) -> float:
    """Cohen's kappa of a confusion matrix; 0 when chance agreement is already 1."""
    counts = np.asarray(getattr(cm, "counts", cm), dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    p_o = np.trace(counts) / total
    p_e = float(np.dot(counts.sum(axis=0), counts.sum(axis=1))) / total ** 2
    if p_e >= 1.0:
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


@dataclass
class BaselineState:
    baseline_update: np.ndarray
    preferred_dps: list
    epoch: int = 0
    kappas: dict = field(default_factory=dict)

    def next_baseline(self, updates: dict) -> np.ndarray:
        """Uniform mean of the preferred DPs' updates for the new epoch."""
        present = [updates[i] for i in self.preferred_dps if i in updates]
        if not present:
            return self.baseline_update
        return np.mean(present, axis=0)


def adjust_baseline(purchased: dict, root_data: Dataset, global_model: LocalModel,
                    top_n: int = 1, previous: BaselineState | None = None,
                    epoch: int = 0) -> BaselineState:
    """Rank purchased updates by kappa of ``global + update`` on the root set."""
    if not purchased:
        warnings.warn("no purchased models; keeping the previous baseline", RuntimeWarning)
        if previous is None:
            raise ValueError("no purchased models and no previous baseline")
        return previous
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    kappas = {}
    for dp in sorted(purchased):
        candidate = global_model.with_weights(global_model.weights + purchased[dp])
        kappas[dp] = kappa(evaluate(candidate, root_data)[1])
    ranked = sorted(kappas, key=lambda dp: (-kappas[dp], dp))
    preferred = ranked[:top_n]
    base = np.mean([purchased[dp] for dp in preferred], axis=0)
    return BaselineState(base, preferred, epoch, kappas)
