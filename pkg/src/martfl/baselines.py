"""Reference aggregators used for comparison: FedAvg, FLTrust, Krum, Median."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import cosine_score

METHODS = ("FedAvg", "FLTrust", "Krum", "Median")


@dataclass
class ReferenceResult:
    update: np.ndarray
    selected: set
    weights: dict


def _stack(updates: dict):
    ids = sorted(updates)
    return ids, np.stack([np.asarray(updates[i], dtype=np.float64) for i in ids])


def krum_scores(vectors: np.ndarray, f: int) -> np.ndarray:
    """Sum of squared distances from each vector to its n - f - 2 nearest neighbours."""
    n = len(vectors)
    m = n - f - 2
    if m < 1:
        raise ValueError(f"Krum needs n - f - 2 >= 1 (n={n}, f={f})")
    sq = np.sum(vectors ** 2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * vectors @ vectors.T, 0.0)
    np.fill_diagonal(d2, np.inf)
    return np.sort(d2, axis=1)[:, :m].sum(axis=1)


def reference_aggregate(method: str, updates: dict, data_sizes: dict | None = None,
                        baseline=None, f: int = 0) -> ReferenceResult:
    if not updates:
        raise ValueError("no updates to aggregate")
    ids, U = _stack(updates)
    if method == "FedAvg":
        sizes = np.array([float((data_sizes or {}).get(i, 1.0)) for i in ids])
        w = sizes / sizes.sum()
        return ReferenceResult(w @ U, set(ids), dict(zip(ids, w)))

    if method == "Median":
        return ReferenceResult(np.median(U, axis=0), set(ids), {i: 1.0 / len(ids) for i in ids})

    if method == "Krum":
        m = len(ids) - f - 2
        scores = krum_scores(U, f)
        chosen = [ids[j] for j in np.lexsort((np.arange(len(ids)), scores))[:m]]
        w = {i: (1.0 / m if i in chosen else 0.0) for i in ids}
        return ReferenceResult(np.mean([updates[i] for i in chosen], axis=0), set(chosen), w)

    if method == "FLTrust":
        if baseline is None:
            raise ValueError("FLTrust needs the server's root-data update")
        g = np.asarray(baseline, dtype=np.float64)
        g_norm = np.linalg.norm(g)
        trust = np.array([max(0.0, cosine_score(g, u)) for u in U])
        norms = np.linalg.norm(U, axis=1)
        if trust.sum() == 0.0:
            return ReferenceResult(np.zeros(U.shape[1]), set(), {i: 0.0 for i in ids})
        scaled = U * (g_norm / np.where(norms > 0, norms, 1.0))[:, None]
        w = trust / trust.sum()
        selected = {i for i, t in zip(ids, trust) if t > 0}
        return ReferenceResult(w @ scaled, selected, dict(zip(ids, w)))

    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
