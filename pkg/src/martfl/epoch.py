"""One provable epoch assembled from float inputs, without training or a ledger.

Used by the completeness and soundness experiments: quantize the weights and
updates, commit, aggregate, update, publish, sample, prove.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import proof as prf
from .circuit import PublicInputs
from .ledger import default_k_params
from .model import child_rng
from .quant import (MIN_ETA, QuantTensor, dequantize, params_for, quantize, quantized_aggregate,
                    quantized_update)
from .scoring import commit_quantized


@dataclass
class EpochArtifacts:
    proof: prf.AggregationProof
    roots: dict  # dp_id -> committed Merkle root
    committed_K: dict  # dp_id -> quantized weight
    Uq: QuantTensor
    Wq_prev: QuantTensor
    Wq_new: QuantTensor
    Uq_agg: QuantTensor
    tampered: list  # columns whose published value was shifted

    @property
    def published(self) -> tuple:
        return self.Wq_prev.q, self.Wq_new.q

    def verify(self, keys: prf.ProvingKeys | None = None, **overrides) -> bool:
        args = {"proof": self.proof, "committed_roots": self.roots, "committed_K": self.committed_K,
                "published": self.published}
        args.update(overrides)
        return prf.verify(keys or prf.setup(), **args)


def _shift(t: QuantTensor, j: int):
    q = int(t.q[0, j])
    t.q[0, j] = q + 1 if q < t.params.b_q else q - 1


def build_epoch(W_prev, K, U, c: int, *, eta: int = MIN_ETA, bits: int = 8, eps_frac: float = 0.05,
                seed: int = 0, epoch: int = 0, difficulty: int = 16, dp_ids=None,
                tamper_cols=(), k_params=None) -> EpochArtifacts:
    """Run one honest epoch; ``tamper_cols`` are shifted by one quantum before sampling."""
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    n, m = U.shape
    K = np.asarray(K, dtype=np.float64).reshape(1, n)
    ids = list(dp_ids) if dp_ids is not None else list(range(n))
    if len(ids) != n:
        raise ValueError("one dp_id per update row is required")
    k_params = k_params or default_k_params()
    Kq = quantize(K, k_params)
    Uq = quantize(U, params_for(U, eps_frac, bits))
    salts = [child_rng(seed, 0x5A17, epoch, i).bytes(16) for i in range(n)]
    pairs = [commit_quantized(Uq.q[i], salts[i], ids[i], epoch) for i in range(n)]
    roots = {ids[i]: pairs[i][0].root for i in range(n)}

    W_prev = np.asarray(W_prev, dtype=np.float64).reshape(1, m)
    Wq_prev = quantize(W_prev, params_for(W_prev, eps_frac, bits))
    agg_est = dequantize(Kq) @ dequantize(Uq)
    Uq_agg, _ = quantized_aggregate(Kq, Uq, params_for(agg_est, eps_frac, bits), eta)
    new_est = dequantize(Wq_prev) + dequantize(Uq_agg)
    Wq_new, _ = quantized_update(Wq_prev, Uq_agg, params_for(new_est, eps_frac, bits), eta)
    tampered = sorted(set(int(j) for j in tamper_cols))
    for j in tampered:
        _shift(Wq_new, j)

    # the new model is public before the nonces are turned into indices
    transcript = prf.SamplingTranscript.run(roots, m, c, difficulty)
    idx = transcript.indices
    Kq_list = [int(v) for v in Kq.q[0]]
    Xc = PublicInputs(ids, m, list(idx), Kq_list,
                      [int(Wq_prev.q[0, j]) for j in idx], [int(Wq_new.q[0, j]) for j in idx],
                      k_params, Uq.params, Uq_agg.params, Wq_prev.params, Wq_new.params, eta)
    witness = prf.ProverWitness(Uq.q, salts, [p[1] for p in pairs])
    proof = prf.prove(Xc, witness, prf.setup(), transcript, epoch=epoch)
    return EpochArtifacts(proof, roots, dict(zip(ids, Kq_list)), Uq, Wq_prev, Wq_new, Uq_agg, tampered)
