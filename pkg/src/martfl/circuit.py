"""Integer constraint system for the sampled-column aggregation/update check.

Each gadget is a small typed constraint over named integer slots:

* ``bind``   public slot equals a known constant
* ``mul``    a * b == c
* ``lin``    sum(coef * slot) + const == 0
* ``range``  lo <= slot <= hi
* ``cmp``    flag == [left < right]
* ``merkle`` H(index || value || salt) hashes along the sibling slots to a root slot

Merkle gadgets count as one constraint each; ``hash_count`` reports the
underlying hash invocations.  Per sampled column the system holds
``3 n + 19`` constraints, plus ``2 n`` bindings for the weights and roots.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .merkle import DIGEST, leaf_digest, root_from_path
from .quant import QuantParams, aggregate_terms, scale_multiplier

SALT_BITS = 128
DIGEST_BITS = 8 * DIGEST


@dataclass
class PublicInputs:
    """Public side of one epoch's check (the sampled public columns plus parameters)."""

    dp_ids: list
    m: int
    indices: list
    Kq: list
    W_prev_cols: list
    W_new_cols: list
    k_params: QuantParams
    u_params: QuantParams
    agg_params: QuantParams
    w_prev_params: QuantParams
    w_new_params: QuantParams
    eta: int

    def multipliers(self) -> tuple[int, int, int]:
        mul = scale_multiplier([self.k_params.s, self.u_params.s], self.agg_params.s, self.eta)
        A = scale_multiplier([self.w_prev_params.s], self.w_new_params.s, self.eta)
        B = scale_multiplier([self.agg_params.s], self.w_new_params.s, self.eta)
        return mul, A, B

    def to_json(self) -> dict:
        return {
            "dp_ids": [int(i) for i in self.dp_ids], "m": int(self.m),
            "indices": [int(i) for i in self.indices],
            "Kq": [str(int(v)) for v in self.Kq],
            "W_prev_cols": [str(int(v)) for v in self.W_prev_cols],
            "W_new_cols": [str(int(v)) for v in self.W_new_cols],
            "k_params": self.k_params.to_json(), "u_params": self.u_params.to_json(),
            "agg_params": self.agg_params.to_json(), "w_prev_params": self.w_prev_params.to_json(),
            "w_new_params": self.w_new_params.to_json(), "eta": str(self.eta),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PublicInputs":
        qp = QuantParams.from_json
        return cls([int(i) for i in d["dp_ids"]], int(d["m"]), [int(i) for i in d["indices"]],
                   [int(v) for v in d["Kq"]], [int(v) for v in d["W_prev_cols"]],
                   [int(v) for v in d["W_new_cols"]], qp(d["k_params"]), qp(d["u_params"]),
                   qp(d["agg_params"]), qp(d["w_prev_params"]), qp(d["w_new_params"]), int(d["eta"]))


@dataclass
class ConstraintSystem:
    slots: list = field(default_factory=list)
    public: dict = field(default_factory=dict)  # slot -> bound value
    constraints: list = field(default_factory=list)
    hash_count: int = 0

    def _slot(self, name: str) -> str:
        self.slots.append(name)
        return name

    def count(self, kind: str | None = None) -> int:
        if kind is None:
            return len(self.constraints)
        return sum(1 for c in self.constraints if c[0] == kind)


@dataclass
class Witness:
    values: dict  # slot -> int


def build_constraints(Xc: PublicInputs, commitments, eta: int, indices) -> ConstraintSystem:
    """Constraint system for the columns in ``indices``.

    ``commitments`` align with ``Xc.dp_ids`` and supply the roots bound as
    public inputs.
    """
    indices = [int(j) for j in indices]
    n = len(Xc.dp_ids)
    if any(not 0 <= j < Xc.m for j in indices):
        raise ValueError("sampled index out of range")
    if len(set(indices)) != len(indices) or indices != sorted(indices):
        raise ValueError("indices must be sorted and unique")
    if len(commitments) != n or len(Xc.Kq) != n:
        raise ValueError("commitment and weight lists must align with dp_ids")
    if len(Xc.W_prev_cols) != len(indices) or len(Xc.W_new_cols) != len(indices):
        raise ValueError("public columns do not match the sampled indices")
    if eta != Xc.eta:
        raise ValueError("eta differs from the public inputs")

    cs = ConstraintSystem()
    scale = 1 << eta
    mul, A, B = Xc.multipliers()
    kz, uz = Xc.k_params.zero_point, Xc.u_params.zero_point
    az, wz, wz2 = Xc.agg_params.zero_point, Xc.w_prev_params.zero_point, Xc.w_new_params.zero_point
    height = max(Xc.m - 1, 0).bit_length()

    K = []
    for i, (dp, c) in enumerate(zip(Xc.dp_ids, commitments)):
        k = cs._slot(f"K[{dp}]")
        cs.public[k] = int(Xc.Kq[i])
        cs.constraints.append(("bind", k, int(Xc.Kq[i])))
        K.append(k)
    roots, salts = [], []
    for dp, c in zip(Xc.dp_ids, commitments):
        r = cs._slot(f"root[{dp}]")
        value = int.from_bytes(c.root, "big")
        cs.public[r] = value
        cs.constraints.append(("bind", r, value))
        roots.append(r)
    if indices:
        salts = [cs._slot(f"salt[{dp}]") for dp in Xc.dp_ids]

    for col, j in enumerate(indices):
        U = [cs._slot(f"U[{dp}][{j}]") for dp in Xc.dp_ids]
        P = [cs._slot(f"P[{dp}][{j}]") for dp in Xc.dp_ids]
        for i, dp in enumerate(Xc.dp_ids):
            sibs = [cs._slot(f"sib[{dp}][{j}][{h}]") for h in range(height)]
            cs.constraints.append(("mul", K[i], U[i], P[i]))
            cs.constraints.append(("range", U[i], Xc.u_params.a_q, Xc.u_params.b_q))
            cs.constraints.append(("merkle", U[i], salts[i], tuple(sibs), j, roots[i]))
            cs.hash_count += height + 1

        # aggregation: 2^eta (q' - z') = mul * (left - right) + R, left = M1 + M4, right = M2 + M3
        la, ra, sa, ta, da, qa, Ra = (cs._slot(f"{nm}[{j}]") for nm in
                                      ("agg_left", "agg_right", "agg_sign", "agg_t", "agg_mag", "agg_q", "agg_R"))
        cs.constraints.append(("lin", [(1, la)] + [(-1, p) for p in P], -n * kz * uz))
        cs.constraints.append(("lin", [(1, ra)] + [(-uz, k) for k in K] + [(-kz, u) for u in U], 0))
        cs.constraints.append(("cmp", sa, la, ra))
        cs.constraints.append(("mul", sa, da, ta))
        cs.constraints.append(("lin", [(1, la), (-1, ra), (-1, da), (2, ta)], 0))
        cs.constraints.append(("range", da, 0, None))
        cs.constraints.append(("range", qa, Xc.agg_params.a_q, Xc.agg_params.b_q))
        cs.constraints.append(("range", Ra, 0, scale - 1))
        cs.constraints.append(("lin", [(scale, qa), (-mul, da), (2 * mul, ta), (-1, Ra)], -scale * az))

        # update: 2^eta (w' - z_w') = (A w + B q') - (A z_w + B z') + R
        wp, wn = cs._slot(f"Wprev[{j}]"), cs._slot(f"Wnew[{j}]")
        cs.public[wp] = int(Xc.W_prev_cols[col])
        cs.public[wn] = int(Xc.W_new_cols[col])
        cs.constraints.append(("bind", wp, int(Xc.W_prev_cols[col])))
        cs.constraints.append(("bind", wn, int(Xc.W_new_cols[col])))
        lu, ru, su, tu, du, Ru = (cs._slot(f"{nm}[{j}]") for nm in
                                  ("upd_left", "upd_right", "upd_sign", "upd_t", "upd_mag", "upd_R"))
        cs.constraints.append(("lin", [(1, lu), (-A, wp), (-B, qa)], 0))
        cs.constraints.append(("lin", [(1, ru)], -(A * wz + B * az)))
        cs.constraints.append(("cmp", su, lu, ru))
        cs.constraints.append(("mul", su, du, tu))
        cs.constraints.append(("lin", [(1, lu), (-1, ru), (-1, du), (2, tu)], 0))
        cs.constraints.append(("range", du, 0, None))
        cs.constraints.append(("range", Ru, 0, scale - 1))
        cs.constraints.append(("lin", [(scale, wn), (-1, du), (2, tu), (-1, Ru)], -scale * wz2))
    return cs


def assign_witness(cs: ConstraintSystem, Xc: PublicInputs, U_cols, salts, paths) -> Witness:
    """Prover-side assignment from the opened quanta.

    ``U_cols[i][col]`` is DP i's quantum at ``Xc.indices[col]``; ``paths[i][col]``
    its Merkle siblings.  Aggregated quanta are recomputed honestly; the update
    remainder then exposes any wrong public ``W_new`` column.
    """
    v = dict(cs.public)
    n = len(Xc.dp_ids)
    scale = 1 << Xc.eta
    mul, A, B = Xc.multipliers()
    kz, uz = Xc.k_params.zero_point, Xc.u_params.zero_point
    az, wz, wz2 = Xc.agg_params.zero_point, Xc.w_prev_params.zero_point, Xc.w_new_params.zero_point
    if Xc.indices:
        for dp, s in zip(Xc.dp_ids, salts):
            v[f"salt[{dp}]"] = int.from_bytes(s, "big")
    for col, j in enumerate(Xc.indices):
        ucol = [int(U_cols[i][col]) for i in range(n)]
        for i, dp in enumerate(Xc.dp_ids):
            v[f"U[{dp}][{j}]"] = ucol[i]
            v[f"P[{dp}][{j}]"] = int(Xc.Kq[i]) * ucol[i]
            for h, sib in enumerate(paths[i][col]):
                v[f"sib[{dp}][{j}][{h}]"] = int.from_bytes(sib, "big")
        M1, M2, M3, M4 = (int(t[0]) for t in aggregate_terms(Xc.Kq, [[u] for u in ucol], kz, uz))
        left, right = M1 + M4, M2 + M3
        D = left - right
        p = mul * D
        q = az + (-((-p) // scale))
        q = min(max(q, Xc.agg_params.a_q), Xc.agg_params.b_q)
        sign = int(left < right)
        v.update({f"agg_left[{j}]": left, f"agg_right[{j}]": right, f"agg_sign[{j}]": sign,
                  f"agg_mag[{j}]": abs(D), f"agg_t[{j}]": sign * abs(D), f"agg_q[{j}]": q,
                  f"agg_R[{j}]": scale * (q - az) - p})
        wp, wn = int(Xc.W_prev_cols[col]), int(Xc.W_new_cols[col])
        lu, ru = A * wp + B * q, A * wz + B * az
        Du = lu - ru
        su = int(lu < ru)
        v.update({f"upd_left[{j}]": lu, f"upd_right[{j}]": ru, f"upd_sign[{j}]": su,
                  f"upd_mag[{j}]": abs(Du), f"upd_t[{j}]": su * abs(Du),
                  f"upd_R[{j}]": scale * (wn - wz2) - Du})
    return Witness(v)


def _merkle_ok(w: dict, value_slot, salt_slot, sib_slots, index, root_slot) -> bool:
    salt, value, root = w[salt_slot], w[value_slot], w[root_slot]
    if not 0 <= salt < (1 << SALT_BITS) or not 0 <= root < (1 << DIGEST_BITS):
        return False
    if not -(1 << 63) <= value < (1 << 63):
        return False
    sibs = []
    for s in sib_slots:
        x = w[s]
        if not 0 <= x < (1 << DIGEST_BITS):
            return False
        sibs.append(x.to_bytes(DIGEST, "big"))
    leaf = leaf_digest(index, value, salt.to_bytes(SALT_BITS // 8, "big"))
    return root_from_path(leaf, index, sibs) == root.to_bytes(DIGEST, "big")


def _satisfied(c, w: dict) -> bool:
    kind = c[0]
    if kind == "bind":
        return w[c[1]] == c[2]
    if kind == "mul":
        return w[c[1]] * w[c[2]] == w[c[3]]
    if kind == "lin":
        return sum(coef * w[s] for coef, s in c[1]) + c[2] == 0
    if kind == "range":
        x, lo, hi = w[c[1]], c[2], c[3]
        return (lo is None or x >= lo) and (hi is None or x <= hi)
    if kind == "cmp":
        return w[c[1]] == int(w[c[2]] < w[c[3]])
    if kind == "merkle":
        return _merkle_ok(w, *c[1:])
    raise ValueError(f"unknown constraint kind {kind!r}")


def check_witness(cs: ConstraintSystem, w: Witness) -> bool:
    """True iff every constraint holds; a witness with the wrong slot set is rejected."""
    values = w.values
    if set(values) != set(cs.slots) or any(type(values[s]) is not int for s in cs.slots):
        raise ValueError("witness layout does not match the constraint system")
    return all(_satisfied(c, values) for c in cs.constraints)
