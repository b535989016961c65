import copy
from types import SimpleNamespace

import numpy as np
import pytest

from martfl.circuit import PublicInputs, Witness, assign_witness, build_constraints, check_witness
from martfl.epoch import build_epoch


def _epoch(n=3, m=40, c=6, seed=0, **kw):
    rng = np.random.default_rng(seed)
    K = rng.dirichlet(np.ones(n))
    return build_epoch(rng.uniform(-1, 1, m), K, rng.uniform(-1, 1, (n, m)) * 0.1, c, seed=seed, **kw)


def _system(art, indices=None):
    Xc = art.proof.public
    if indices is not None:
        Xc = copy.deepcopy(Xc)
        pos = {j: k for k, j in enumerate(art.proof.public.indices)}
        Xc.indices = list(indices)
        Xc.W_prev_cols = [art.proof.public.W_prev_cols[pos[j]] for j in indices]
        Xc.W_new_cols = [art.proof.public.W_new_cols[pos[j]] for j in indices]
    commits = [SimpleNamespace(root=art.roots[dp]) for dp in Xc.dp_ids]
    cs = build_constraints(Xc, commits, Xc.eta, Xc.indices)
    pos = {j: k for k, j in enumerate(art.proof.public.indices)}
    ops = [art.proof.openings[dp] for dp in Xc.dp_ids]
    U_cols = [[o.values[pos[j]] for j in Xc.indices] for o in ops]
    paths = [[o.paths[pos[j]] for j in Xc.indices] for o in ops]
    w = assign_witness(cs, Xc, U_cols, [o.salt for o in ops], paths)
    return Xc, cs, w


def test_empty_sample_has_only_bindings():
    art = _epoch()
    Xc, cs, w = _system(art, indices=[])
    n = len(Xc.dp_ids)
    assert cs.count() == cs.count("bind") == 2 * n
    assert check_witness(cs, w)


def test_honest_witness_satisfies():
    _, cs, w = _system(_epoch())
    assert check_witness(cs, w)


@pytest.mark.parametrize("n,c", [(1, 1), (3, 6), (5, 9)])
def test_constraint_count_formula(n, c):
    art = _epoch(n=n, c=c)
    _, cs, _ = _system(art)
    assert cs.count() == 2 * n + c * (3 * n + 19)
    assert cs.count("merkle") == n * c


def test_count_independent_of_m_and_linear_in_c():
    small = _system(_epoch(m=64, c=8))[1]
    large = _system(_epoch(m=128, c=8))[1]
    assert small.count() == large.count()
    half = _system(_epoch(m=128, c=4))[1]
    assert small.count() - 2 * 3 == 2 * (half.count() - 2 * 3)
    # only the Merkle hash count depends on m, through the tree height
    assert large.hash_count > small.hash_count


def test_tampered_update_entry_fails_at_that_column():
    art = _epoch()
    Xc, cs, w = _system(art)
    j = Xc.indices[2]
    dp = Xc.dp_ids[1]
    bad = Witness(dict(w.values))
    bad.values[f"U[{dp}][{j}]"] += 1
    assert not check_witness(cs, bad)
    # re-executing the whole assignment with the altered leaf cannot repair the Merkle check
    ops = [art.proof.openings[d] for d in Xc.dp_ids]
    cols = [list(o.values) for o in ops]
    cols[1][2] += 1
    w2 = assign_witness(cs, Xc, cols, [o.salt for o in ops], [o.paths for o in ops])
    assert not check_witness(cs, w2)


def test_wrong_public_column_fails():
    art = _epoch()
    target = art.proof.public.indices[0]
    bad = _epoch(tamper_cols=[target])
    assert bad.proof.public.indices == art.proof.public.indices
    _, cs, w = _system(bad)
    assert not check_witness(cs, w)


def test_single_bit_flips_are_caught():
    _, cs, w = _system(_epoch(n=2, m=32, c=3))
    rng = np.random.default_rng(0)
    slots = sorted(w.values)
    caught = 0
    for _ in range(1000):
        s = slots[int(rng.integers(len(slots)))]
        bad = dict(w.values)
        bad[s] ^= 1 << int(rng.integers(0, 64))
        caught += not check_witness(cs, Witness(bad))
    assert caught == 1000


def test_layout_mismatch_and_bad_indices():
    art = _epoch()
    Xc, cs, w = _system(art)
    short = dict(w.values)
    short.pop(next(iter(short)))
    with pytest.raises(ValueError):
        check_witness(cs, Witness(short))
    commits = [SimpleNamespace(root=art.roots[dp]) for dp in Xc.dp_ids]
    with pytest.raises(ValueError):
        build_constraints(Xc, commits, Xc.eta, [Xc.m])
    with pytest.raises(ValueError):
        build_constraints(Xc, commits, Xc.eta + 1, Xc.indices)
    with pytest.raises(ValueError):
        build_constraints(Xc, commits[:-1], Xc.eta, Xc.indices)


def test_public_inputs_json_roundtrip():
    Xc = _epoch().proof.public
    assert PublicInputs.from_json(Xc.to_json()) == Xc
