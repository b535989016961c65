"""Independent reference computations used to freeze derived expectations.

Nothing here imports the package's implementation of the thing being checked.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from fractions import Fraction

import numpy as np


def contiguous_partitions(n: int, k: int):
    """All ways to cut a sorted sequence of length n into k non-empty runs."""
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0,) + cuts + (n,)
        yield [(bounds[i], bounds[i + 1]) for i in range(k)]


def best_partition(points, k: int):
    """Exhaustive minimum-distortion 1-D partition (optimal 1-D clusters are contiguous)."""
    x = sorted(float(p) for p in points)
    best, best_sse = None, math.inf
    for part in contiguous_partitions(len(x), k):
        sse = 0.0
        for lo, hi in part:
            seg = x[lo:hi]
            mu = sum(seg) / len(seg)
            sse += sum((v - mu) ** 2 for v in seg)
        if sse < best_sse - 1e-15:
            best, best_sse = [x[lo:hi] for lo, hi in part], sse
    return best, best_sse


def gap_choice(points, refs, k_max: int) -> int:
    """Gap statistic with exhaustive W_k; smallest k with Gap(k) >= Gap(k+1) - s_{k+1}."""
    span = max(points) - min(points)
    floor = max(span, 1e-12) ** 2 * 1e-12

    def logw(p, k):
        return math.log(max(best_partition(p, k)[1], floor))

    gaps, errs = [], []
    B = len(refs)
    for k in range(1, k_max + 1):
        ref = [logw(list(r), k) for r in refs]
        mean = sum(ref) / B
        sd = math.sqrt(sum((v - mean) ** 2 for v in ref) / B)
        gaps.append(mean - logw(points, k))
        errs.append(sd * math.sqrt(1 + 1 / B))
    for k in range(1, k_max):
        if gaps[k - 1] >= gaps[k] - errs[k]:
            return k
    return k_max


def cohen_kappa(counts) -> Fraction:
    counts = [[Fraction(int(v)) for v in row] for row in counts]
    total = sum(sum(r) for r in counts)
    c = len(counts)
    p_o = sum(counts[i][i] for i in range(c)) / total
    rows = [sum(counts[i]) for i in range(c)]
    cols = [sum(counts[i][j] for i in range(c)) for j in range(c)]
    p_e = sum(rows[i] * cols[i] for i in range(c)) / (total * total)
    return (p_o - p_e) / (1 - p_e)


def krum_pick(vectors, f: int) -> list[int]:
    """Indices ordered by Krum score: sum of squared distances to the n-f-2 nearest others."""
    n = len(vectors)
    keep = n - f - 2
    scores = []
    for i in range(n):
        d = sorted(sum((a - b) ** 2 for a, b in zip(vectors[i], vectors[j])) for j in range(n) if j != i)
        scores.append((sum(d[:keep]), i))
    return [i for _, i in sorted(scores)]


def merkle4(values, salt: bytes) -> bytes:
    """Root of a hand-built two-level tree over four leaves."""
    def h(b):
        return hashlib.sha256(b).digest()

    leaves = [h(i.to_bytes(8, "big") + int(v).to_bytes(8, "big", signed=True) + salt)
              for i, v in enumerate(values)]
    return h(h(leaves[0] + leaves[1]) + h(leaves[2] + leaves[3]))


def hash_chain(seed: bytes, steps: int) -> bytes:
    x = hashlib.sha256(seed).digest()
    for _ in range(steps):
        x = hashlib.sha256(x).digest()
    return x


def power_law_oracle(total: int, n: int, exponent: float) -> list[int]:
    w = [(r + 1) ** -exponent for r in range(n)]
    s = sum(w)
    sizes = [math.floor(total * v / s) for v in w]
    sizes[0] += total - sum(sizes)
    return sizes


def logistic_fit_accuracy(x, y, iters: int = 500) -> float:
    """Plain full-batch gradient descent on binary logistic loss (independent of the package model)."""
    X = np.hstack([x, np.ones((len(x), 1))])
    w = np.zeros(X.shape[1])
    for _ in range(iters):
        p = 1 / (1 + np.exp(-X @ w))
        w -= 0.5 * X.T @ (p - y) / len(y)
    return float(np.mean((X @ w > 0) == (y == 1)))
