"""Verifiable sampling and the prove/verify lifecycle.

The shipped backend is commit-and-open: the proof reveals each DP's quanta
and Merkle paths at the sampled columns, and the verifier re-executes the
integer identities there.  It is sound but not zero-knowledge.  A backend
with a succinct opaque proof would plug in behind the same ``prove`` and
``verify`` signatures.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .circuit import PublicInputs, assign_witness, build_constraints, check_witness
from .merkle import MerkleTree, sha256

BACKEND = "commit-and-open"


def vdf_checkpoints(difficulty: int) -> list[int]:
    """Iteration counts recorded in the proof: powers of two below ``difficulty``, then ``difficulty``."""
    pts, k = [], 1
    while k < difficulty:
        pts.append(k)
        k <<= 1
    pts.append(difficulty)
    return pts


def vdf_eval(seed: bytes, difficulty: int) -> tuple[bytes, list[bytes]]:
    """``x_0 = H(seed)``, ``x_{k+1} = H(x_k)``; output ``x_difficulty``."""
    if difficulty < 0:
        raise ValueError("difficulty must be >= 0")
    x = sha256(seed)
    marks = set(vdf_checkpoints(difficulty))
    proof = []
    if 0 in marks:
        proof.append(x)
    for k in range(1, difficulty + 1):
        x = sha256(x)
        if k in marks:
            proof.append(x)
    return x, proof


def vdf_verify(seed: bytes, difficulty: int, output: bytes, proof: list[bytes]) -> bool:
    try:
        if difficulty < 0:
            return False
        pts = vdf_checkpoints(difficulty)
        if len(proof) != len(pts) or proof[-1] != output:
            return False
        x, at = sha256(seed), 0
        for target, claimed in zip(pts, proof):
            for _ in range(target - at):
                x = sha256(x)
            if x != claimed:
                return False
            at = target
        return True
    except (TypeError, ValueError):
        return False


def derive_seed(nonces: dict) -> bytes:
    """SHA-256 over length-prefixed nonces in ascending dp_id order."""
    if not nonces:
        raise ValueError("at least one nonce is required")
    h = hashlib.sha256()
    for dp in sorted(nonces):
        nonce = bytes(nonces[dp])
        h.update(len(nonce).to_bytes(8, "big"))
        h.update(nonce)
    return h.digest()


def sample_indices(vdf_output: bytes, m: int, c: int) -> list[int]:
    """``min(c, m)`` distinct indices from a counter-mode SHA-256 stream.

    Each block ``H(output || counter)`` yields four big-endian 64-bit words;
    words at or above ``floor(2^64 / m) * m`` are rejected so the rest are
    uniform modulo ``m``.  Repeats are skipped.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if c < 0:
        raise ValueError("c must be >= 0")
    if c >= m:
        return list(range(m))
    limit = np.uint64(((1 << 64) // m) * m) if m & (m - 1) else None
    chosen: set[int] = set()
    counter = 0
    while len(chosen) < c:
        need = c - len(chosen)
        blocks = max(4, need // 3 + 2)
        stream = b"".join(sha256(vdf_output + (counter + b).to_bytes(8, "big")) for b in range(blocks))
        counter += blocks
        words = np.frombuffer(stream, dtype=">u8")
        if limit is not None:
            words = words[words < limit]
        for idx in (words % np.uint64(m)).tolist():
            if idx not in chosen:
                chosen.add(idx)
                if len(chosen) == c:
                    break
    return sorted(chosen)


@dataclass
class SamplingTranscript:
    nonces: dict  # dp_id -> bytes
    seed: bytes
    vdf_output: bytes
    vdf_proof: list
    difficulty: int
    m: int
    c: int
    indices: list

    @classmethod
    def run(cls, nonces: dict, m: int, c: int, difficulty: int) -> "SamplingTranscript":
        seed = derive_seed(nonces)
        out, proof = vdf_eval(seed, difficulty)
        return cls(dict(nonces), seed, out, proof, difficulty, m, c, sample_indices(out, m, c))

    def valid(self) -> bool:
        try:
            return (derive_seed(self.nonces) == self.seed
                    and vdf_verify(self.seed, self.difficulty, self.vdf_output, self.vdf_proof)
                    and list(self.indices) == sample_indices(self.vdf_output, self.m, self.c))
        except (TypeError, ValueError):
            return False

    def to_json(self) -> dict:
        return {"nonces": {str(k): self.nonces[k].hex() for k in sorted(self.nonces)},
                "seed": self.seed.hex(), "vdf_output": self.vdf_output.hex(),
                "vdf_proof": [p.hex() for p in self.vdf_proof], "difficulty": str(self.difficulty),
                "m": str(self.m), "c": str(self.c), "indices": [int(i) for i in self.indices]}

    @classmethod
    def from_json(cls, d: dict) -> "SamplingTranscript":
        return cls({int(k): bytes.fromhex(v) for k, v in d["nonces"].items()}, bytes.fromhex(d["seed"]),
                   bytes.fromhex(d["vdf_output"]), [bytes.fromhex(p) for p in d["vdf_proof"]],
                   int(d["difficulty"]), int(d["m"]), int(d["c"]), [int(i) for i in d["indices"]])


@dataclass(frozen=True)
class ProvingKeys:
    pk: bytes = b""
    vk: bytes = b""
    backend: str = BACKEND


def setup(backend: str = BACKEND) -> ProvingKeys:
    if backend != BACKEND:
        raise ValueError(f"backend {backend!r} is not available")
    return ProvingKeys(backend=backend)


@dataclass
class ProverWitness:
    """Full quantized updates (rows aligned with ``dp_ids``), salts and commitment trees."""

    Uq: np.ndarray
    salts: list
    trees: list


@dataclass
class Opening:
    values: list  # quanta at the sampled indices
    paths: list  # per sampled index, sibling digests bottom-up
    salt: bytes


@dataclass
class AggregationProof:
    public: PublicInputs
    openings: dict  # dp_id -> Opening
    transcript: SamplingTranscript
    epoch: int
    backend: str = BACKEND
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "backend": self.backend, "epoch": str(self.epoch),
            "public": self.public.to_json(), "transcript": self.transcript.to_json(),
            "openings": {str(dp): {"values": [str(int(v)) for v in o.values],
                                   "paths": [[p.hex() for p in path] for path in o.paths],
                                   "salt": o.salt.hex()}
                         for dp, o in sorted(self.openings.items())},
        }

    @classmethod
    def from_json(cls, d: dict) -> "AggregationProof":
        openings = {int(dp): Opening([int(v) for v in o["values"]],
                                     [[bytes.fromhex(p) for p in path] for path in o["paths"]],
                                     bytes.fromhex(o["salt"]))
                    for dp, o in d["openings"].items()}
        return cls(PublicInputs.from_json(d["public"]), openings, SamplingTranscript.from_json(d["transcript"]),
                   int(d["epoch"]), d["backend"])

    def canonical(self) -> bytes:
        return canonical_json(self.to_json())

    def digest(self) -> str:
        return hashlib.sha256(self.canonical()).hexdigest()


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def digest_json(obj) -> str:
    return hashlib.sha256(canonical_json(obj)).hexdigest()


def prove(Xc: PublicInputs, witness: ProverWitness, keys: ProvingKeys,
          transcript: SamplingTranscript, epoch: int = 0) -> AggregationProof:
    if keys.backend != BACKEND:
        raise ValueError(f"backend {keys.backend!r} is not available")
    if not transcript.valid():
        raise ValueError("sampling transcript does not verify")
    if list(Xc.indices) != list(transcript.indices):
        raise ValueError("public inputs were not built for the transcript's indices")
    n = len(Xc.dp_ids)
    if len(witness.trees) != n or len(witness.salts) != n or witness.Uq.shape[0] != n:
        raise ValueError("missing commitment or witness row for a DP")
    openings = {}
    for i, dp in enumerate(Xc.dp_ids):
        tree: MerkleTree = witness.trees[i]
        openings[dp] = Opening([int(witness.Uq[i, j]) for j in Xc.indices],
                               [tree.path(j) for j in Xc.indices], bytes(witness.salts[i]))
    return AggregationProof(Xc, openings, transcript, epoch, keys.backend)


class _Root:
    __slots__ = ("root",)

    def __init__(self, root: bytes):
        self.root = root


def verify(vk: ProvingKeys, proof: AggregationProof, committed_roots: dict, committed_K: dict,
           published=None) -> bool:
    """Re-check the transcript, every opening and both identities at every sampled column.

    ``published`` optionally holds the full quantized previous and new global
    models ``(W_prev, W_new)``; when given, the public columns must match them.
    """
    try:
        return _verify(vk, proof, committed_roots, committed_K, published)
    except Exception:  # adversarial input must never escape as an exception
        return False


def _verify(vk, proof, committed_roots, committed_K, published) -> bool:
    if proof.backend != vk.backend or vk.backend != BACKEND:
        return False
    Xc, tr = proof.public, proof.transcript
    dps = sorted(committed_roots)
    if list(Xc.dp_ids) != dps or sorted(committed_K) != dps or sorted(proof.openings) != dps:
        return False
    # weights in the proof must equal the committed ones exactly
    if [int(k) for k in Xc.Kq] != [int(committed_K[dp]) for dp in dps]:
        return False
    # sampling seed comes from the committed roots and nothing else
    if set(tr.nonces) != set(dps) or any(bytes(tr.nonces[dp]) != committed_roots[dp] for dp in dps):
        return False
    if tr.m != Xc.m or not tr.valid() or list(Xc.indices) != list(tr.indices):
        return False
    c = len(Xc.indices)
    if published is not None:
        w_prev, w_new = (np.asarray(w).ravel() for w in published)
        if len(w_prev) != Xc.m or len(w_new) != Xc.m:
            return False
        if [int(w_prev[j]) for j in Xc.indices] != [int(v) for v in Xc.W_prev_cols]:
            return False
        if [int(w_new[j]) for j in Xc.indices] != [int(v) for v in Xc.W_new_cols]:
            return False
    for dp in dps:
        o = proof.openings[dp]
        if len(o.values) != c or len(o.paths) != c or len(o.salt) != 16:
            return False
    cs = build_constraints(Xc, [_Root(committed_roots[dp]) for dp in dps], Xc.eta, Xc.indices)
    w = assign_witness(cs, Xc, [proof.openings[dp].values for dp in dps],
                       [proof.openings[dp].salt for dp in dps], [proof.openings[dp].paths for dp in dps])
    height = max(Xc.m - 1, 0).bit_length()
    if any(len(p) != height for dp in dps for p in proof.openings[dp].paths):
        return False
    return check_witness(cs, w)
