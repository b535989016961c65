"""SHA-256 Merkle trees over per-parameter leaves.

Odd levels duplicate their last node.  Paths list sibling digests bottom-up;
left/right order follows the bits of the leaf index.
"""
from __future__ import annotations

import hashlib

import numpy as np

DIGEST = 32


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def leaf_digest(index: int, value: int, salt: bytes) -> bytes:
    return sha256(int(index).to_bytes(8, "big") + int(value).to_bytes(8, "big", signed=True) + salt)


def node_digest(left: bytes, right: bytes) -> bytes:
    return sha256(left + right)


class MerkleTree:
    def __init__(self, leaves: list[bytes]):
        if not leaves:
            raise ValueError("a Merkle tree needs at least one leaf")
        self.levels = [list(leaves)]
        while len(self.levels[-1]) > 1:
            cur = self.levels[-1]
            if len(cur) % 2:
                cur = cur + [cur[-1]]
            self.levels.append([node_digest(cur[i], cur[i + 1]) for i in range(0, len(cur), 2)])

    @classmethod
    def from_values(cls, values, salt: bytes) -> "MerkleTree":
        vals = np.asarray(values, dtype=np.int64).ravel()
        return cls([leaf_digest(i, int(v), salt) for i, v in enumerate(vals)])

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def size(self) -> int:
        return len(self.levels[0])

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def path(self, index: int) -> list[bytes]:
        if not 0 <= index < self.size:
            raise IndexError(f"leaf {index} outside [0, {self.size})")
        out = []
        for level in self.levels[:-1]:
            sib = index ^ 1
            out.append(level[sib] if sib < len(level) else level[index])
            index >>= 1
        return out


def root_from_path(leaf: bytes, index: int, path: list[bytes]) -> bytes:
    h = leaf
    for sib in path:
        h = node_digest(sib, h) if index & 1 else node_digest(h, sib)
        index >>= 1
    return h


def verify_path(root: bytes, leaf: bytes, index: int, path: list[bytes], size: int) -> bool:
    if index < 0 or index >= size:
        return False
    expected = 0
    while (1 << expected) < size:
        expected += 1
    if len(path) != expected or any(len(p) != DIGEST for p in path):
        return False
    return root_from_path(leaf, index, path) == root
