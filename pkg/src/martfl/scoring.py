"""Commit-before-evaluate scoring.

DPs commit to their quantized updates with a salted Merkle root.  The DA then
learns only a cosine score through a sealed channel: the baseline travels as a
sealed vector which the DP can multiply by its own normalized update and sum,
and only the DA's session key opens the resulting scalar.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass

import numpy as np

from .merkle import MerkleTree
from .quant import QuantParams, quantize

BACKEND = "plaintext-equivalent"
SALT_BYTES = 16


@dataclass(frozen=True)
class UpdateCommitment:
    root: bytes
    dp_id: int
    epoch: int
    opening_salt: bytes

    def to_json(self) -> dict:
        return {"root": self.root.hex(), "dp_id": self.dp_id, "epoch": self.epoch,
                "opening_salt": self.opening_salt.hex()}

    @classmethod
    def from_json(cls, d: dict) -> "UpdateCommitment":
        return cls(bytes.fromhex(d["root"]), int(d["dp_id"]), int(d["epoch"]), bytes.fromhex(d["opening_salt"]))


def _check_salt(salt: bytes):
    if not isinstance(salt, (bytes, bytearray)) or len(salt) != SALT_BYTES:
        raise ValueError(f"salt must be {SALT_BYTES} bytes")


def commitment_tree(u, salt: bytes, quant: QuantParams) -> MerkleTree:
    _check_salt(salt)
    u = np.asarray(u, dtype=np.float64).ravel()
    if not np.all(np.isfinite(u)):
        raise ValueError("update has non-finite entries")
    return MerkleTree.from_values(quantize(u, quant).q.ravel(), bytes(salt))


def commit_update(u, salt: bytes, quant: QuantParams, dp_id: int = 0, epoch: int = 0) -> UpdateCommitment:
    return UpdateCommitment(commitment_tree(u, salt, quant).root, dp_id, epoch, bytes(salt))


def commit_quantized(q, salt: bytes, dp_id: int = 0, epoch: int = 0) -> tuple[UpdateCommitment, MerkleTree]:
    """Commit directly to quanta (what the proof later opens)."""
    _check_salt(salt)
    tree = MerkleTree.from_values(q, bytes(salt))
    return UpdateCommitment(tree.root, dp_id, epoch, bytes(salt)), tree


def verify_opening(c: UpdateCommitment, u, salt: bytes, quant: QuantParams) -> bool:
    try:
        return commitment_tree(u, salt, quant).root == c.root
    except ValueError:
        return False


class SessionKey:
    """Opaque per-session key; only the object identity matters."""

    __slots__ = ("tag",)

    def __init__(self):
        self.tag = secrets.token_hex(8)


class _Sealed:
    __slots__ = ("_value", "_key")

    def __init__(self, value, key: SessionKey):
        self._value = value
        self._key = key

    def open(self, key: SessionKey):
        if key is not self._key:
            raise PermissionError("payload sealed under a different session key")
        return self._value


class SealedVector(_Sealed):
    """Supports only the algebra the DP is allowed: element-wise multiply by a plain vector."""

    def mul_plain(self, plain) -> "SealedVector":
        plain = np.asarray(plain, dtype=np.float64).ravel()
        if plain.shape != self._value.shape:
            raise ValueError("dimension mismatch")
        return SealedVector(self._value * plain, self._key)

    def sum(self) -> "SealedScalar":
        return SealedScalar(float(np.sum(self._value)), self._key)

    def __len__(self):
        return len(self._value)


class SealedScalar(_Sealed):
    pass


@dataclass(frozen=True)
class ScoreChannelMessage:
    direction: str  # "baseline_out" | "response_in"
    payload: _Sealed
    backend: str = BACKEND


class ScoringSession:
    """DA side of one scoring round."""

    def __init__(self, backend: str = BACKEND):
        if backend != BACKEND:
            raise ValueError(f"unsupported backend {backend!r}")
        self.backend = backend
        self._key = SessionKey()

    def send_baseline(self, u_g) -> ScoreChannelMessage:
        u_g = np.asarray(u_g, dtype=np.float64).ravel()
        norm = np.linalg.norm(u_g)
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError("baseline update must be a finite non-zero vector")
        return ScoreChannelMessage("baseline_out", SealedVector(u_g / norm, self._key), self.backend)

    def read_score(self, msg: ScoreChannelMessage) -> float:
        if msg.direction != "response_in" or msg.backend != self.backend:
            raise ValueError("unexpected message")
        return float(np.clip(msg.payload.open(self._key), -1.0, 1.0))


def dp_respond(msg: ScoreChannelMessage, u_i) -> ScoreChannelMessage:
    """DP side: normalize its own update, multiply into the sealed baseline, sum."""
    if msg.direction != "baseline_out":
        raise ValueError("expected a baseline message")
    u_i = np.asarray(u_i, dtype=np.float64).ravel()
    norm = np.linalg.norm(u_i)
    unit = u_i / norm if norm > 0 else np.zeros_like(u_i)
    return ScoreChannelMessage("response_in", msg.payload.mul_plain(unit).sum(), msg.backend)


def score_exchange(u_g, u_i, backend: str = BACKEND) -> float:
    session = ScoringSession(backend)
    return session.read_score(dp_respond(session.send_baseline(u_g), u_i))
