"""Adversarial DP behaviours: sign randomizing, free riding, label flipping, backdoor, Sybil."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import Dataset, child_rng

BACKDOOR_ALPHA = 0.95
TRIGGER_WIDTH = 3


class AttackKind(str, enum.Enum):
    SIGN_RANDOMIZING = "SignRandomizing"
    FREE_RIDER = "FreeRider"
    LABEL_FLIP = "LabelFlip"
    BACKDOOR = "Backdoor"
    SYBIL = "Sybil"


@dataclass
class AdversarySpec:
    kind: AttackKind
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.kind = AttackKind(self.kind)
        p = self.params
        if self.kind in (AttackKind.LABEL_FLIP, AttackKind.SYBIL):
            p.setdefault("class_a", 0)
            p.setdefault("class_b", 1)
            if p["class_a"] == p["class_b"]:
                raise ValueError("flip classes must differ")
        if self.kind is AttackKind.BACKDOOR:
            p.setdefault("target", 0)
            p.setdefault("trigger_width", TRIGGER_WIDTH)
            p.setdefault("trigger_value", 3.0)
            p.setdefault("poison_fraction", 0.5)
            p.setdefault("alpha", BACKDOOR_ALPHA)
            if not 0.0 < p["alpha"] <= 1.0:
                raise ValueError("alpha must be in (0, 1]")
        if self.kind is AttackKind.SYBIL:
            p.setdefault("count", 1)
            if p["count"] < 1:
                raise ValueError("sybil count must be >= 1")

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params), "seed": self.seed}


def sign_randomizing(honest_update, seed: int) -> np.ndarray:
    """Keep each coordinate's magnitude, draw its sign from a fair coin."""
    u = np.asarray(honest_update, dtype=np.float64)
    signs = child_rng(seed, 0x5164).integers(0, 2, size=u.shape) * 2 - 1
    return np.abs(u) * signs


def free_rider(global_t1, global_t2) -> np.ndarray:
    """Delta of the two previous globals; zero when the older one is unavailable."""
    g1 = np.asarray(global_t1, dtype=np.float64)
    if global_t2 is None:
        return np.zeros_like(g1)
    return g1 - np.asarray(global_t2, dtype=np.float64)


def label_flip(data: Dataset, class_a: int, class_b: int, num_classes: int | None = None) -> Dataset:
    if class_a == class_b or min(class_a, class_b) < 0:
        raise ValueError("flip classes must be distinct, non-negative labels")
    if num_classes is not None and max(class_a, class_b) >= num_classes:
        raise ValueError("flip class outside the label set")
    y = data.y.copy()
    y[data.y == class_a] = class_b
    y[data.y == class_b] = class_a
    return Dataset(data.x.copy(), y)


def apply_trigger(x: np.ndarray, width: int = TRIGGER_WIDTH, value: float = 3.0) -> np.ndarray:
    x = np.array(x, dtype=np.float64, copy=True)
    x[:, :width] = value
    return x


def backdoor_poison(data: Dataset, target: int, poison_fraction: float, alpha: float = BACKDOOR_ALPHA,
                    width: int = TRIGGER_WIDTH, value: float = 3.0, seed: int = 0) -> tuple[Dataset, float]:
    """Stamp the trigger on ``round(poison_fraction * len)`` samples and relabel them.

    Returns the poisoned set and the objective weight ``alpha`` that local
    training uses to stay close to the global model.
    """
    if len(data) == 0:
        raise ValueError("cannot poison an empty dataset")
    if not 0.0 < poison_fraction <= 1.0:
        raise ValueError("poison_fraction must be in (0, 1]")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if target < 0:
        raise ValueError("invalid target class")
    k = max(1, int(round(poison_fraction * len(data))))
    idx = np.sort(child_rng(seed, 0xBD00).choice(len(data), size=k, replace=False))
    x, y = data.x.copy(), data.y.copy()
    x[idx] = apply_trigger(x[idx], width, value)
    y[idx] = target
    return Dataset(x, y), alpha


def sybil_clone(base_update, count: int) -> list[np.ndarray]:
    if count < 1:
        raise ValueError("count must be >= 1")
    base = np.asarray(base_update, dtype=np.float64)
    return [base.copy() for _ in range(count)]
