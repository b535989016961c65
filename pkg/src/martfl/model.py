"""Synthetic tasks, a small trainable classifier and the cosine scoring primitive."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

ARCHITECTURES = ("linear", "mlp")


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, *keys); stable across call order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2 or self.y.ndim != 1 or len(self.x) != len(self.y):
            raise ValueError(f"bad dataset shapes x={self.x.shape} y={self.y.shape}")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx])

    def label_counts(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.y, minlength=num_classes)

    @staticmethod
    def concat(parts) -> "Dataset":
        parts = list(parts)
        return Dataset(np.concatenate([p.x for p in parts]), np.concatenate([p.y for p in parts]))


@dataclass
class SyntheticTask:
    """Gaussian class-mean mixture.

    Each class ``c`` emits ``class_means[c] + noise_std * N(0, I)``.
    """

    num_classes: int
    feature_dim: int
    class_means: np.ndarray
    noise_std: float
    label_permutation: np.ndarray | None = None

    def __post_init__(self):
        self.class_means = np.asarray(self.class_means, dtype=np.float64)
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.class_means.shape != (self.num_classes, self.feature_dim):
            raise ValueError("class_means shape does not match (num_classes, feature_dim)")
        for i in range(self.num_classes):
            for j in range(i + 1, self.num_classes):
                if np.array_equal(self.class_means[i], self.class_means[j]):
                    raise ValueError(f"class means {i} and {j} coincide")

    @classmethod
    def make(cls, num_classes: int, feature_dim: int, separation: float = 1.0,
             noise_std: float = 1.0, seed: int = 0) -> "SyntheticTask":
        rng = child_rng(seed, 0x7A5C)
        means = rng.normal(0.0, separation, size=(num_classes, feature_dim))
        return cls(num_classes, feature_dim, means, noise_std)

    def sample(self, n: int, seed: int, class_probs=None) -> Dataset:
        """Draw ``n`` labelled samples; ``class_probs`` skews the label distribution."""
        rng = child_rng(seed, 0x5A11)
        if class_probs is None:
            y = rng.integers(0, self.num_classes, size=n)
        else:
            p = np.asarray(class_probs, dtype=np.float64)
            y = rng.choice(self.num_classes, size=n, p=p / p.sum())
        x = self.class_means[y] + self.noise_std * rng.standard_normal((n, self.feature_dim))
        if self.label_permutation is not None:
            y = np.asarray(self.label_permutation)[y]
        return Dataset(x, y)


def param_count(arch: str, feature_dim: int, num_classes: int, hidden: int = 32) -> int:
    if arch == "linear":
        return feature_dim * num_classes + num_classes
    if arch == "mlp":
        return feature_dim * hidden + hidden + hidden * num_classes + num_classes
    raise ValueError(f"unknown architecture {arch!r}")


@dataclass
class LocalModel:
    """Linear-softmax or one-hidden-layer ReLU classifier over a flat weight vector."""

    weights: np.ndarray
    arch: str
    feature_dim: int
    num_classes: int
    hidden: int = 32

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        expected = param_count(self.arch, self.feature_dim, self.num_classes, self.hidden)
        if self.weights.shape != (expected,):
            raise ValueError(f"{self.arch} model needs {expected} weights, got {self.weights.shape}")

    @classmethod
    def init(cls, arch: str, feature_dim: int, num_classes: int, seed: int = 0,
             hidden: int = 32, scale: float = 0.01) -> "LocalModel":
        n = param_count(arch, feature_dim, num_classes, hidden)
        w = child_rng(seed, 0x1417).normal(0.0, scale, size=n)
        return cls(w, arch, feature_dim, num_classes, hidden)

    def with_weights(self, weights) -> "LocalModel":
        return replace(self, weights=np.array(weights, dtype=np.float64))

    def _unpack(self, w):
        d, c, h = self.feature_dim, self.num_classes, self.hidden
        if self.arch == "linear":
            return w[: d * c].reshape(d, c), w[d * c:]
        i = 0
        w1 = w[i:i + d * h].reshape(d, h); i += d * h
        b1 = w[i:i + h]; i += h
        w2 = w[i:i + h * c].reshape(h, c); i += h * c
        return w1, b1, w2, w[i:]

    def logits(self, x: np.ndarray) -> np.ndarray:
        p = self._unpack(self.weights)
        if self.arch == "linear":
            return x @ p[0] + p[1]
        w1, b1, w2, b2 = p
        return np.maximum(x @ w1 + b1, 0.0) @ w2 + b2

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def loss_grad(self, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        """Mean cross-entropy and its gradient w.r.t. the flat weights."""
        n = len(y)
        p = self._unpack(self.weights)
        if self.arch == "linear":
            z = x @ p[0] + p[1]
        else:
            w1, b1, w2, b2 = p
            pre = x @ w1 + b1
            hid = np.maximum(pre, 0.0)
            z = hid @ w2 + b2
        z = z - z.max(axis=1, keepdims=True)
        ez = np.exp(z)
        prob = ez / ez.sum(axis=1, keepdims=True)
        loss = float(-np.mean(np.log(prob[np.arange(n), y] + 1e-300)))
        dz = prob
        dz[np.arange(n), y] -= 1.0
        dz /= n
        if self.arch == "linear":
            return loss, np.concatenate([(x.T @ dz).ravel(), dz.sum(axis=0)])
        dh = (dz @ w2.T) * (pre > 0)
        return loss, np.concatenate([(x.T @ dh).ravel(), dh.sum(axis=0),
                                     (hid.T @ dz).ravel(), dz.sum(axis=0)])


@dataclass
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (self.counts < 0).any():
            raise ValueError("negative confusion counts")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def train_local(model: LocalModel, data: Dataset, steps: int, lr: float, seed: int,
                batch_size: int = 32, alpha: float = 1.0) -> LocalModel:
    """Mini-batch SGD on cross-entropy.

    With ``alpha < 1`` the objective becomes
    ``alpha * CE + (1 - alpha) / 2 * ||w - w_start||^2`` (the proximity term a
    stealthy backdoor attacker uses to stay close to the global model).
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    rng = child_rng(seed, 0x7EA1)
    start = model.weights.copy()
    cur = model.with_weights(start)
    bs = min(batch_size, len(data))
    for _ in range(steps):
        idx = rng.choice(len(data), size=bs, replace=False)
        _, g = cur.loss_grad(data.x[idx], data.y[idx])
        if alpha < 1.0:
            g = alpha * g + (1.0 - alpha) * (cur.weights - start)
        cur.weights = cur.weights - lr * g
    return cur


def flatten_diff(after: LocalModel, before) -> np.ndarray:
    after_w = after.weights if isinstance(after, LocalModel) else np.asarray(after, dtype=np.float64)
    before_w = before.weights if isinstance(before, LocalModel) else np.asarray(before, dtype=np.float64)
    if after_w.shape != before_w.shape:
        raise ValueError(f"dimension mismatch {after_w.shape} vs {before_w.shape}")
    return (after_w - before_w).ravel()


def cosine_score(u_g, u_i) -> float:
    """Cosine similarity; a zero vector on either side scores 0."""
    a = np.asarray(u_g, dtype=np.float64).ravel()
    b = np.asarray(u_i, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def evaluate(model: LocalModel, data: Dataset) -> tuple[float, ConfusionMatrix]:
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    pred = model.predict(data.x)
    c = model.num_classes
    cm = np.zeros((c, c), dtype=np.int64)
    np.add.at(cm, (data.y, pred), 1)
    return float(np.trace(cm) / len(data)), ConfusionMatrix(cm)
