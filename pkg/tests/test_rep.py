from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.coupling import CouplingTree, LabelledTree, enumerate_labels
from artifact.exactnum import HalfInt, LabelError
from artifact.rep import (
    DenseOperator,
    GroupElement,
    coupled_basis_cg,
    coupled_basis_projector,
    dmatrix,
    dmatrix_array,
    dmatrix_tensor,
    make_rng,
    mixed_symmetrizer,
    pair_invariant,
    permutation_operator,
    projector_pair,
    projector_tree,
    spin_matrices,
    su2_sample,
    symmetrizer,
    tensor_apply,
)
from oracles import cg_oracle

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _angle(u: np.ndarray) -> float:
    return math.acos(max(-1.0, min(1.0, np.trace(u).real / 2)))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(min_value=0, max_value=8))
def test_dmatrix_is_unitary_homomorphism(seed, j2):
    u, v = su2_sample(seed, 2)
    du, dv, duv = dmatrix_array(j2, u[None])[0], dmatrix_array(j2, v[None])[0], dmatrix_array(j2, (u @ v)[None])[0]
    assert np.allclose(du @ dv, duv, atol=1e-11)
    assert np.allclose(du @ du.conj().T, np.eye(j2 + 1), atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(min_value=0, max_value=8))
def test_character_formula(seed, j2):
    u = su2_sample(seed)
    theta = _angle(u)
    trace = np.trace(dmatrix(HalfInt(j2), u).entries)
    expected = math.sin((j2 + 1) * theta) / math.sin(theta) if abs(math.sin(theta)) > 1e-6 else j2 + 1
    assert trace == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("j2", [0, 1, 2, 3, 4])
def test_dmatrix_matches_symmetric_tensor_construction(j2):
    us = su2_sample(3, 5)
    for u in us:
        assert np.allclose(dmatrix_array(j2, u[None])[0], dmatrix_tensor(HalfInt(j2), u), atol=1e-12)


def test_spin_half_is_defining_representation():
    u = su2_sample(11)
    assert np.allclose(dmatrix(HalfInt(1), u).entries, u)


def test_group_element():
    g = GroupElement.from_euler(0.3, 1.1, -0.4)
    assert np.allclose(g.inverse().entries @ g.entries, np.eye(2))
    assert GroupElement.from_quaternion(1, 0, 0, 0).trace() == 2
    with pytest.raises(LabelError):
        GroupElement(np.array([[1, 1], [0, 1]]))


def test_sampler_is_deterministic_and_haar():
    a = su2_sample(make_rng(5), (1000, 2))
    b = su2_sample(make_rng(5), (1000, 2))
    assert np.array_equal(a, b)
    us = su2_sample(17, 100_000)
    tr = np.trace(us, axis1=-2, axis2=-1)
    # E[Tr u] = 0 and E[|Tr u|^2] = 1 under Haar measure
    assert abs(tr.mean()) < 5 * math.sqrt(1 / 100_000)
    assert abs((np.abs(tr) ** 2).mean() - 1) < 0.02
    assert np.allclose(np.linalg.det(us), 1)


def test_spin_matrices_commutation():
    for j2 in range(6):
        jz, jp, jm = spin_matrices(j2)
        assert np.allclose(jp @ jm - jm @ jp, 2 * jz)


def test_permutation_operators():
    dims = (2, 3, 2)
    k = permutation_operator((1, 2, 0), dims)
    vecs = [np.random.default_rng(i).standard_normal(d) for i, d in enumerate(dims)]
    moved = k.entries @ np.kron(np.kron(vecs[0], vecs[1]), vecs[2])
    assert np.allclose(moved, np.kron(np.kron(vecs[2], vecs[0]), vecs[1]))
    t = permutation_operator((1, 0, 2), (2, 2, 2)).entries
    assert np.allclose(t @ t, np.eye(8))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_symmetrizer(n):
    s = symmetrizer(n).entries
    assert np.allclose(s @ s, s) and np.allclose(s, s.conj().T)
    assert symmetrizer(n).rank() == n + 1
    u = su2_sample(n)
    big = u
    for _ in range(n - 1):
        big = np.kron(big, u)
    assert np.allclose(s @ big, big @ s)
    assert np.trace(s @ big) == pytest.approx(np.trace(dmatrix_array(n, u[None])[0]))
    for perm in itertools.permutations(range(n)):
        assert np.allclose(permutation_operator(perm, (2,) * n).entries @ s, s)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_mixed_symmetrizer(n):
    m = mixed_symmetrizer(n).entries
    assert np.allclose(m @ m, m)
    assert mixed_symmetrizer(n).rank() == n - 1
    lifted = np.kron(symmetrizer(n - 1).entries, np.eye(2))
    assert np.allclose(m + symmetrizer(n).entries, lifted)


@pytest.mark.parametrize("j2,k2", [(1, 1), (2, 1), (2, 2), (3, 2), (4, 3)])
def test_pair_projectors(j2, k2):
    total = np.zeros(((j2 + 1) * (k2 + 1),) * 2, dtype=complex)
    inv = pair_invariant(HalfInt(j2), HalfInt(k2)).entries
    for l2 in range(abs(j2 - k2), j2 + k2 + 1, 2):
        p = projector_pair(HalfInt(j2), HalfInt(k2), HalfInt(l2)).entries
        assert np.allclose(p @ p, p, atol=1e-10) and np.allclose(p, p.conj().T, atol=1e-10)
        assert np.trace(p).real == pytest.approx(l2 + 1)
        alpha = (l2 * (l2 + 2) - j2 * (j2 + 2) - k2 * (k2 + 2)) / 8
        assert np.allclose(inv @ p, alpha * p, atol=1e-10)
        # spectral projector equals the sum of |l m><l m| from the coupled-state oracle
        ref = np.zeros_like(p)
        for m2 in range(-l2, l2 + 1, 2):
            vec = np.zeros(p.shape[0])
            for a, ma2 in enumerate(range(j2, -j2 - 1, -2)):
                for b, mb2 in enumerate(range(k2, -k2 - 1, -2)):
                    vec[a * (k2 + 1) + b] = cg_oracle(j2, ma2, k2, mb2, l2, m2)
            ref += np.outer(vec, vec)
        assert np.allclose(p, ref, atol=1e-10)
        total += p
    assert np.allclose(total, np.eye(total.shape[0]))


def test_pair_projector_rejects_bad_total():
    with pytest.raises(LabelError):
        projector_pair(HalfInt(1), HalfInt(1), HalfInt(4))


@pytest.mark.parametrize("tree_text,leaf2", [
    ("(((1 2) 3) 4)", (1, 1, 1, 1)),
    ("((1 2) (3 4))", (1, 2, 1, 1)),
    ("((1 3) (2 4))", (2, 1, 1, 2)),
    ("((1 2) 3)", (2, 2, 2)),
])
def test_tree_projectors_and_bases(tree_text, leaf2):
    tree = CouplingTree.parse(tree_text)
    leaves = [HalfInt(x) for x in leaf2]
    dim = int(np.prod([x + 1 for x in leaf2]))
    total = np.zeros((dim, dim), dtype=complex)
    for j2 in range(0, sum(leaf2) + 1):
        if (j2 - sum(leaf2)) % 2:
            continue
        for k in enumerate_labels(tree, leaves, HalfInt(j2)):
            lt = LabelledTree(tree, leaves, k, HalfInt(j2))
            p = projector_tree(lt).entries
            assert np.allclose(p @ p, p, atol=1e-10)
            assert np.trace(p).real == pytest.approx(j2 + 1)
            cg = coupled_basis_cg(lt)
            proj = coupled_basis_projector(lt)
            assert np.allclose(cg.conj().T @ cg, np.eye(j2 + 1), atol=1e-12)
            assert np.allclose(proj, cg, atol=1e-10)
            assert np.allclose(cg @ cg.conj().T, p, atol=1e-10)
            total += p
    assert np.allclose(total, np.eye(dim), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_tensor_apply_matches_kron(seed):
    rng = make_rng(seed)
    us = su2_sample(rng, (3, 3))
    j2s = (1, 2, 1)
    mats = [dmatrix_array(j2, us[:, i]) for i, j2 in enumerate(j2s)]
    vecs = rng.standard_normal((2 * 3 * 2, 4))
    out = tensor_apply(mats, vecs)
    for s in range(3):
        big = np.kron(np.kron(mats[0][s], mats[1][s]), mats[2][s])
        assert np.allclose(out[s], big @ vecs)


def test_dense_operator():
    op = DenseOperator(np.eye(6), (2, 3))
    assert op.dim == 6 and op.trace() == 6 and op.rank() == 6
    assert op.to_json()["factor_dims"] == [2, 3]
    with pytest.raises(ValueError):
        DenseOperator(np.eye(6), (2, 2))
