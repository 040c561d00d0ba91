"""Dense matrix realizations of SU(2): group elements, D-matrices, switch operators and projectors.

All representation spaces use the ladder basis ordered m = +j, ..., -j.  Group
elements are plain complex arrays of shape (..., 2, 2); functions taking them
broadcast over the leading axes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .coupling import LabelledTree, Shape, coupled_vector2
from .exactnum import HalfInt, HalfIntLike, LabelError
from .wigner import triangle2

__all__ = [
    "DenseOperator",
    "GroupElement",
    "coupled_basis_cg",
    "coupled_basis_projector",
    "dmatrix",
    "dmatrix_array",
    "dmatrix_tensor",
    "make_rng",
    "mixed_symmetrizer",
    "pair_invariant",
    "permutation_operator",
    "projector_pair",
    "projector_tree",
    "spin_matrices",
    "su2_sample",
    "symmetrizer",
    "tensor_apply",
]

UNITARY_TOL = 1e-12


def make_rng(seed: int | None = 0) -> np.random.Generator:
    """Counter-based generator; the seed fully determines the stream."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class GroupElement:
    """A 2x2 special unitary matrix."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.entries, dtype=complex)
        if u.shape != (2, 2):
            raise LabelError(f"group element must be 2x2, got {u.shape}")
        if np.abs(u @ u.conj().T - np.eye(2)).max() > UNITARY_TOL * 10 or abs(np.linalg.det(u) - 1) > UNITARY_TOL * 10:
            raise LabelError("matrix is not in SU(2)")
        object.__setattr__(self, "entries", u)

    @classmethod
    def from_quaternion(cls, a: float, b: float, c: float, d: float) -> "GroupElement":
        return cls(_quaternion_matrix(np.array([a, b, c, d], dtype=float) / math.sqrt(a * a + b * b + c * c + d * d)))

    @classmethod
    def from_euler(cls, alpha: float, beta: float, gamma: float) -> "GroupElement":
        """exp(-i alpha Jz) exp(-i beta Jy) exp(-i gamma Jz) on the spin-1/2 module."""
        cb, sb = math.cos(beta / 2), math.sin(beta / 2)
        ep, em = np.exp(-0.5j * (alpha + gamma)), np.exp(-0.5j * (alpha - gamma))
        return cls(np.array([[ep * cb, -em * sb], [em.conjugate() * sb, ep.conjugate() * cb]]))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.entries.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))


def _quaternion_matrix(q: np.ndarray) -> np.ndarray:
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = a + 1j * b
    out[..., 0, 1] = c + 1j * d
    out[..., 1, 0] = -c + 1j * d
    out[..., 1, 1] = a - 1j * b
    return out


def su2_sample(rng: np.random.Generator | int | None = None, size: int | tuple[int, ...] | None = None) -> np.ndarray:
    """Haar-random SU(2) elements: a normalized Gaussian quaternion is uniform on S^3."""
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    shape = () if size is None else (size,) if isinstance(size, int) else tuple(size)
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return _quaternion_matrix(q)


@dataclass(frozen=True)
class DenseOperator:
    """Dense complex operator on a tensor product with recorded factor dimensions."""

    entries: np.ndarray
    factor_dims: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator must be square, got {a.shape}")
        dims = tuple(self.factor_dims) or (a.shape[0],)
        if math.prod(dims) != a.shape[0]:
            raise ValueError(f"factor dims {dims} do not multiply to {a.shape[0]}")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __matmul__(self, other: "DenseOperator | np.ndarray") -> "DenseOperator | np.ndarray":
        if isinstance(other, DenseOperator):
            return DenseOperator(self.entries @ other.entries, self.factor_dims)
        return self.entries @ other

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def rank(self, tol: float = 1e-10) -> int:
        return int(np.linalg.matrix_rank(self.entries, tol=tol))

    def to_json(self) -> dict:
        """Row-major entries with interleaved real and imaginary parts."""
        a = np.asarray(self.entries, dtype=complex)
        flat = np.empty(2 * a.size)
        flat[0::2] = a.real.ravel()
        flat[1::2] = a.imag.ravel()
        return {"dim": self.dim, "factor_dims": list(self.factor_dims), "data": flat.tolist()}


# ---------------------------------------------------------------------------
# irreducible representation matrices


@lru_cache(maxsize=64)
def _sym_terms(n: int) -> tuple[tuple[int, int, float, int, int, int, int], ...]:
    """Terms (row, col, coeff, e00, e10, e01, e11) of D^{n/2} as a polynomial in the entries of u."""
    terms = []
    for r in range(n + 1):
        p2 = n - r
        for c in range(n + 1):
            p = n - c
            q = n - p
            norm = math.sqrt(math.comb(n, p) / math.comb(n, p2))
            for k in range(max(0, p2 - q), min(p, p2) + 1):
                coeff = norm * math.comb(p, k) * math.comb(q, p2 - k)
                terms.append((r, c, coeff, k, p - k, p2 - k, q - p2 + k))
    return tuple(terms)


def dmatrix_array(j2: int, u: np.ndarray) -> np.ndarray:
    """D^{j2/2}(u) for a batch of shape (..., 2, 2): the action on symmetric tensors x^p y^q."""
    u = np.asarray(u, dtype=complex)
    n = j2
    out = np.zeros(u.shape[:-2] + (n + 1, n + 1), dtype=complex)
    if n == 0:
        out[..., 0, 0] = 1.0
        return out
    entries = (u[..., 0, 0], u[..., 1, 0], u[..., 0, 1], u[..., 1, 1])
    powers = []
    for x in entries:
        pw = [np.ones_like(x)]
        for _ in range(n):
            pw.append(pw[-1] * x)
        powers.append(pw)
    for r, c, coeff, e0, e1, e2, e3 in _sym_terms(n):
        out[..., r, c] += coeff * powers[0][e0] * powers[1][e1] * powers[2][e2] * powers[3][e3]
    return out


def dmatrix(j: HalfIntLike, u: np.ndarray | GroupElement) -> DenseOperator:
    """The (2j+1)-dimensional representation matrix of a single group element."""
    return DenseOperator(dmatrix_array(HalfInt.of(j).twice, np.asarray(u)))


@lru_cache(maxsize=16)
def _sym_isometry(n: int) -> np.ndarray:
    """Columns: normalized symmetric tensors |n/2, m>, m = n/2 .. -n/2, inside (C^2)^{(x) n}."""
    out = np.zeros((2 ** n, n + 1))
    for idx in itertools.product((0, 1), repeat=n):
        q = sum(idx)  # number of down spins
        flat = int("".join(map(str, idx)), 2) if n else 0
        out[flat, q] = 1.0 / math.sqrt(math.comb(n, q))
    return out


def dmatrix_tensor(j: HalfIntLike, u: np.ndarray) -> np.ndarray:
    """Reference construction: restrict u^{(x) 2j} to the symmetric subspace (small j only)."""
    n = HalfInt.of(j).twice
    u = np.asarray(u, dtype=complex)
    full = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        full = np.kron(full, u)
    iso = _sym_isometry(n)
    return iso.T @ full @ iso


# ---------------------------------------------------------------------------
# switch operators and Young projectors


def permutation_operator(perm: Sequence[int], dims: Sequence[int]) -> DenseOperator:
    """K_sigma: moves tensor factor i to position perm[i] (0-based)."""
    perm = list(perm)
    dims = list(dims)
    n = len(dims)
    if sorted(perm) != list(range(n)):
        raise ValueError("not a permutation")
    total = math.prod(dims)
    eye = np.eye(total).reshape(dims + [total])
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i
    moved = np.transpose(eye, inv + [n])
    return DenseOperator(moved.reshape(total, total), tuple(dims[i] for i in inv))


def transposition(i: int, k: int, n: int, d: int = 2) -> DenseOperator:
    """K_(i k) on (C^d)^{(x) n}, 1-based factor indices."""
    perm = list(range(n))
    perm[i - 1], perm[k - 1] = perm[k - 1], perm[i - 1]
    return permutation_operator(perm, [d] * n)


@lru_cache(maxsize=16)
def _symmetrizer_array(n: int) -> np.ndarray:
    if n == 1:
        return np.eye(2)
    prev = np.kron(_symmetrizer_array(n - 1), np.eye(2))
    acc = np.eye(2 ** n)
    for i in range(1, n):
        acc = acc + transposition(n, i, n).entries
    return acc @ prev / n


def symmetrizer(n: int) -> DenseOperator:
    """Total symmetrizer S^n on (C^2)^{(x) n}, built by the recursion over the last factor."""
    if n < 1:
        raise ValueError("n >= 1 required")
    return DenseOperator(_symmetrizer_array(n), (2,) * n)


def mixed_symmetrizer(n: int) -> DenseOperator:
    """M^n = (1/n)((n-1) I - sum_i K_(n i)) (S^{n-1} (x) 1)."""
    if n < 2:
        raise ValueError("n >= 2 required")
    prev = np.kron(_symmetrizer_array(n - 1), np.eye(2))
    acc = (n - 1) * np.eye(2 ** n)
    for i in range(1, n):
        acc = acc - transposition(n, i, n).entries
    return DenseOperator(acc @ prev / n, (2,) * n)


# ---------------------------------------------------------------------------
# angular momentum operators and projectors


@lru_cache(maxsize=64)
def spin_matrices(j2: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Jz, J+, J-) for spin j2/2 in the basis m = j .. -j."""
    d = j2 + 1
    ms = [Fraction(j2 - 2 * r, 2) for r in range(d)]
    jz = np.diag([float(m) for m in ms]).astype(complex)
    jp = np.zeros((d, d), dtype=complex)
    jj = Fraction(j2, 2)
    for r in range(1, d):
        m = ms[r]
        jp[r - 1, r] = math.sqrt(jj * (jj + 1) - m * (m + 1))
    return jz, jp, jp.T.copy()


def _embed(op: np.ndarray, pos: int, dims: Sequence[int]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == pos else np.eye(d))
    return out


def _total_spin(positions: Sequence[int], dims: Sequence[int], j2s: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    total = math.prod(dims)
    jz = np.zeros((total, total), dtype=complex)
    jp = np.zeros_like(jz)
    for pos in positions:
        z, p, _ = spin_matrices(j2s[pos])
        jz += _embed(z, pos, dims)
        jp += _embed(p, pos, dims)
    return jz, jp, jp.conj().T


def _dot(a: tuple[np.ndarray, np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray, np.ndarray]) -> np.ndarray:
    return a[0] @ b[0] + 0.5 * (a[1] @ b[2] + a[2] @ b[1])


def pair_invariant(j: HalfIntLike, k: HalfIntLike) -> DenseOperator:
    """J^j . J^k = Jz(x)Jz + (J+(x)J- + J-(x)J+)/2 on H_j (x) H_k."""
    j2, k2 = HalfInt.of(j).twice, HalfInt.of(k).twice
    dims = (j2 + 1, k2 + 1)
    a = _total_spin([0], dims, (j2, k2))
    b = _total_spin([1], dims, (j2, k2))
    return DenseOperator(_dot(a, b).real.astype(complex), dims)


def _alpha2(a2: int, b2: int, l2: int) -> Fraction:
    """Eigenvalue of J_a . J_b on total spin l (twice-value arguments)."""
    def cas(x: int) -> Fraction:
        return Fraction(x * (x + 2), 4)

    return (cas(l2) - cas(a2) - cas(b2)) / 2


@lru_cache(maxsize=1024)
def _spectral_coeffs(a2: int, b2: int, l2: int) -> tuple[Fraction, ...]:
    """Power-series coefficients of prod_{l' != l} (x - alpha_l') / (alpha_l - alpha_l')."""
    target = _alpha2(a2, b2, l2)
    poly = [Fraction(1)]
    for other in range(abs(a2 - b2), a2 + b2 + 1, 2):
        if other == l2:
            continue
        alpha = _alpha2(a2, b2, other)
        denom = target - alpha
        shifted = [Fraction(0)] + poly
        poly = [(shifted[i] - alpha * (poly[i] if i < len(poly) else 0)) / denom for i in range(len(shifted))]
    return tuple(poly)


def _poly_eval(coeffs: Sequence[Fraction], x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in reversed(coeffs):
        out = out @ x + float(c) * np.eye(x.shape[0])
    return out


def projector_pair(j: HalfIntLike, k: HalfIntLike, l: HalfIntLike) -> DenseOperator:
    """Projector onto total spin l in H_j (x) H_k via the characteristic polynomial of J.J."""
    j2, k2, l2 = (HalfInt.of(x).twice for x in (j, k, l))
    if not triangle2(j2, k2, l2):
        raise LabelError(f"{HalfInt(l2)} is not in <{HalfInt(j2)}, {HalfInt(k2)}>")
    x = pair_invariant(HalfInt(j2), HalfInt(k2)).entries
    return DenseOperator(_poly_eval(_spectral_coeffs(j2, k2, l2), x), (j2 + 1, k2 + 1))


def _subtree_leaves(node: Shape) -> list[int]:
    if isinstance(node, int):
        return [node]
    return _subtree_leaves(node[0]) + _subtree_leaves(node[1])


def _postorder(node: Shape) -> list[tuple]:
    if isinstance(node, int):
        return []
    return _postorder(node[0]) + _postorder(node[1]) + [node]


def projector_tree(labelled: LabelledTree) -> DenseOperator:
    """Composition of node projectors poly(J_A . J_B) along the tree, children first."""
    j2s = [s.twice for s in labelled.leaf_spins]
    dims = [x + 1 for x in j2s]
    total = math.prod(dims)
    spins = labelled.node_spins2()
    out = np.eye(total, dtype=complex)
    if labelled.tree.n == 1:
        return DenseOperator(out, tuple(dims))
    for node in _postorder(labelled.tree.shape):
        left = [i - 1 for i in _subtree_leaves(node[0])]
        right = [i - 1 for i in _subtree_leaves(node[1])]
        ja = _total_spin(left, dims, j2s)
        jb = _total_spin(right, dims, j2s)
        coeffs = _spectral_coeffs(spins[node[0]], spins[node[1]], spins[node])
        out = _poly_eval(coeffs, _dot(ja, jb)) @ out
    return DenseOperator(out, tuple(dims))


# ---------------------------------------------------------------------------
# coupled bases


def _planar_to_leaf_order(planar: np.ndarray, leaf_order: Sequence[int], dims_by_leaf: Sequence[int]) -> np.ndarray:
    """Reorder tensor axes of column vectors from planar leaf order to numeric leaf order."""
    n = len(leaf_order)
    cols = planar.shape[1]
    shaped = planar.reshape([dims_by_leaf[leaf - 1] for leaf in leaf_order] + [cols])
    axes = [list(leaf_order).index(leaf) for leaf in range(1, n + 1)] + [n]
    return np.transpose(shaped, axes).reshape(-1, cols)


def coupled_basis_cg(labelled: LabelledTree) -> np.ndarray:
    """Columns |T(ul j ul k) j m>, m = j .. -j, from exact coupled-state coefficients."""
    j2s = [s.twice for s in labelled.leaf_spins]
    dims = [x + 1 for x in j2s]
    total2 = labelled.total.twice
    out = np.zeros((math.prod(dims), total2 + 1))
    for col in range(total2 + 1):
        m2 = total2 - 2 * col
        for key, value in coupled_vector2(labelled, m2).items():
            idx = 0
            for x, j2 in zip(key, j2s):
                idx = idx * (j2 + 1) + (j2 - x) // 2
            out[idx, col] = float(value)
    return out


def _lower_multiplet(hw: np.ndarray, jm: np.ndarray, j2: int) -> np.ndarray:
    """Columns |j m> from the highest-weight vector by repeated lowering and normalization."""
    cols = [hw]
    for _ in range(j2):
        v = jm @ cols[-1]
        cols.append(v / np.linalg.norm(v))
    return np.stack(cols, axis=1)


def _node_multiplet(node: Shape, spins: dict, j2s: Sequence[int]) -> np.ndarray:
    """Coupled multiplet of a subtree in planar leaf order, built only from pair projectors."""
    c = spins[node]
    if isinstance(node, int):
        return np.eye(c + 1, dtype=complex)
    a, b = spins[node[0]], spins[node[1]]
    va = _node_multiplet(node[0], spins, j2s)
    vb = _node_multiplet(node[1], spins, j2s)
    # seed |a a> (x) |b, c - a>, reached from |b b> by (a + b - c)/2 lowerings
    _, _, jmb = spin_matrices(b)
    seed_b = np.zeros(b + 1, dtype=complex)
    seed_b[0] = 1.0
    for _ in range((a + b - c) // 2):
        seed_b = jmb @ seed_b
    seed_a = np.zeros(a + 1, dtype=complex)
    seed_a[0] = 1.0
    proj = projector_pair(HalfInt(a), HalfInt(b), HalfInt(c)).entries
    hw = proj @ np.kron(seed_a, seed_b)
    hw = hw / np.linalg.norm(hw)
    _, _, jma = spin_matrices(a)
    jm_pair = np.kron(jma, np.eye(b + 1)) + np.kron(np.eye(a + 1), jmb)
    small = _lower_multiplet(hw, jm_pair, c)
    return np.kron(va, vb) @ small


def coupled_basis_projector(labelled: LabelledTree) -> np.ndarray:
    """Columns |T(ul j ul k) j m>, m = j .. -j, via highest weights cut out by pair projectors."""
    j2s = [s.twice for s in labelled.leaf_spins]
    spins = labelled.node_spins2()
    planar = _node_multiplet(labelled.tree.shape, spins, j2s)
    return _planar_to_leaf_order(planar, labelled.tree.leaf_order, [x + 1 for x in j2s])


def tensor_apply(mats: Sequence[np.ndarray], vecs: np.ndarray) -> np.ndarray:
    """(D_1 (x) ... (x) D_N) V for batched D_i of shape (S, d_i, d_i) and V of shape (prod d, c).

    Returns shape (S, prod d, c).
    """
    dims = [m.shape[-1] for m in mats]
    batch = mats[0].shape[:-2]
    cols = vecs.shape[-1]
    t = np.broadcast_to(vecs.reshape(dims + [cols]), batch + tuple(dims) + (cols,)).astype(complex)
    nb = len(batch)
    for i, m in enumerate(mats):
        # contract axis nb+i of t with the column index of m
        t = np.moveaxis(t, nb + i, -1)
        t = np.einsum("...ab,...xb->...xa", m, t.reshape(batch + (-1, dims[i]))).reshape(t.shape)
        t = np.moveaxis(t, -1, nb + i)
    return t.reshape(batch + (math.prod(dims), cols))
