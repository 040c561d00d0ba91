"""Product and recoupling structure of quasicharacters.

Products are expanded in the caterpillar scheme.  With full label sequences
l^1 = j_1, l^2 .. l^{N-1} = internal labels, l^N = total spin, the coefficient
of chi_{ul c, K, K'} in chi_{ul a, ka, ka'} * chi_{ul b, kb, kb'} is U(K) U(K')
in the trace convention, where U is the product over i = 2..N of the bracket
9j symbols (la^{i-1} lb^{i-1} K^{i-1}; a_i b_i c_i; la^i lb^i K^i).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .coupling import CouplingTree, QuasicharId, _matching_order, _relabel, coupled_vector2, enumerate_labels2, tree_join
from .exactnum import HalfInt, LabelError, SqrtRational, SqrtSum
from .quasichar import quasichar_eval
from .wigner import bracket9j2, ninej2, triangle2

__all__ = [
    "ProductExpansion",
    "RecouplingMatrix",
    "change_tree",
    "product",
    "product_N2",
    "product_caterpillar",
    "product_independent",
    "recoupling_matrix",
    "structure_constant",
]



def _simplify(value: SqrtRational | SqrtSum) -> SqrtRational | SqrtSum:
    if isinstance(value, SqrtSum):
        return value.simplify()
    return value


def _coeff_float(value: SqrtRational | SqrtSum) -> float:
    return float(value)


@dataclass
class ProductExpansion:
    """Linear combination sum coeff * chi_term, in a fixed normalization convention."""

    terms: list[tuple[QuasicharId, SqrtRational | SqrtSum]]
    convention: str = "trace"
    meta: dict = field(default_factory=dict, compare=False)

    def __iter__(self) -> Iterator[tuple[QuasicharId, SqrtRational | SqrtSum]]:
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def coefficient(self, qid: QuasicharId) -> SqrtRational | SqrtSum:
        for term, c in self.terms:
            if term == qid:
                return c
        return SqrtRational(0)

    def nonzero(self) -> "ProductExpansion":
        return ProductExpansion([(t, c) for t, c in self.terms if c], self.convention, dict(self.meta))

    def evaluate(self, us: np.ndarray, method: str = "cg") -> np.ndarray:
        out = None
        for qid, c in self.terms:
            if not c:
                continue
            val = _coeff_float(c) * quasichar_eval(qid, us, self.convention, method)
            out = val if out is None else out + val
        if out is None:
            return np.zeros(np.asarray(us).shape[:-3], dtype=complex)
        return out

    def sorted(self) -> "ProductExpansion":
        return ProductExpansion(sorted(self.terms, key=lambda tc: tc[0].sort_key()), self.convention, dict(self.meta))

    def to_json(self) -> dict:
        return {
            "convention": self.convention,
            "terms": [
                {"id": qid.to_json(), "exact": str(c), "approx": float(c)}
                for qid, c in self.terms
            ],
        }


# ---------------------------------------------------------------------------
# caterpillar products


def _full_sequence(qid: QuasicharId, internal: Sequence[HalfInt]) -> list[int]:
    """Twice-values l^1 .. l^N on the caterpillar."""
    if qid.n == 1:
        return [qid.total.twice]
    return [qid.leaf_spins[0].twice] + [x.twice for x in internal] + [qid.total.twice]


def _u_coefficient(la: Sequence[int], lb: Sequence[int], lc: Sequence[int],
                   a: Sequence[int], b: Sequence[int], c: Sequence[int]) -> SqrtRational:
    out = SqrtRational(1)
    for i in range(1, len(a)):
        f = bracket9j2(la[i - 1], lb[i - 1], lc[i - 1], a[i], b[i], c[i], la[i], lb[i], lc[i])
        if not f:
            return SqrtRational(0)
        out = out * f
    return out


def _orthonormal_factor(qa: QuasicharId, qb: QuasicharId, qc: QuasicharId) -> SqrtRational:
    return SqrtRational.sqrt(Fraction(qa.dim_leaves * qb.dim_leaves * qc.total.dim,
                                      qa.total.dim * qb.total.dim * qc.dim_leaves))


def _check_convention(convention: str) -> None:
    if convention not in ("trace", "orthonormal"):
        raise ValueError(f"products are expanded in the trace or orthonormal convention, not {convention!r}")


def _caterpillar_product(qa: QuasicharId, qb: QuasicharId, convention: str, keep_zeros: bool) -> ProductExpansion:
    n = qa.n
    tree = qa.tree
    a = [s.twice for s in qa.leaf_spins]
    b = [s.twice for s in qb.leaf_spins]
    la, la2 = _full_sequence(qa, qa.k), _full_sequence(qa, qa.k2)
    lb, lb2 = _full_sequence(qb, qb.k), _full_sequence(qb, qb.k2)
    choices = [range(abs(x - y), x + y + 1, 2) for x, y in zip(a, b)]
    terms = []
    for c in itertools.product(*choices):
        c = tuple(c)
        for tot in range(abs(la[-1] - lb[-1]), la[-1] + lb[-1] + 1, 2):
            seqs = enumerate_labels2(tree, c, tot)
            if not seqs:
                continue
            ket_u = {}
            bra_u = {}
            for seq in seqs:
                lc = ([c[0]] + list(seq) + [tot]) if n > 1 else [tot]
                ket_u[seq] = _u_coefficient(la, lb, lc, a, b, c)
                bra_u[seq] = _u_coefficient(la2, lb2, lc, a, b, c)
            for k, k2 in itertools.product(seqs, repeat=2):
                coeff = ket_u[k] * bra_u[k2]
                if not coeff and not keep_zeros:
                    continue
                qc = QuasicharId(tree, [HalfInt(x) for x in c], [HalfInt(x) for x in k],
                                 [HalfInt(x) for x in k2], HalfInt(tot))
                if convention == "orthonormal" and coeff:
                    coeff = coeff * _orthonormal_factor(qa, qb, qc)
                terms.append((qc, coeff))
    return ProductExpansion(terms, convention).sorted()


def _to_caterpillar(qid: QuasicharId) -> list[tuple[QuasicharId, SqrtRational | SqrtSum]]:
    if qid.tree.is_caterpillar:
        return [(qid, SqrtRational(1))]
    return list(change_tree(qid, CouplingTree.caterpillar(qid.n)).terms)


def product(id1: QuasicharId, id2: QuasicharId, convention: str = "trace", keep_zeros: bool = False) -> ProductExpansion:
    """Pointwise product chi_1 * chi_2 expanded on the caterpillar tree (any input trees)."""
    _check_convention(convention)
    if id1.n != id2.n:
        raise LabelError("pointwise products need equal leaf counts; use product_independent for disjoint slots")
    if id1.tree.is_caterpillar and id2.tree.is_caterpillar:
        return _caterpillar_product(id1, id2, convention, keep_zeros)
    # expand both factors on the caterpillar in the trace convention, then multiply out
    acc: dict[QuasicharId, SqrtSum] = {}
    for qa, ca in _to_caterpillar(id1):
        for qb, cb in _to_caterpillar(id2):
            for qc, cc in _caterpillar_product(qa, qb, "trace", keep_zeros):
                acc.setdefault(qc, SqrtSum())
                acc[qc] += SqrtSum([ca]) * cb * cc
    terms = []
    for qc, value in acc.items():
        coeff = _simplify(value)
        if convention == "orthonormal" and coeff:
            f = _orthonormal_factor(id1, id2, qc)
            coeff = _simplify(SqrtSum([coeff]) * f)
        if coeff or keep_zeros:
            terms.append((qc, coeff))
    return ProductExpansion(terms, convention).sorted()


def product_caterpillar(id1: QuasicharId, id2: QuasicharId, convention: str = "trace",
                        keep_zeros: bool = False) -> ProductExpansion:
    """Product of two quasicharacters via 9j factorization of the U coefficients."""
    return product(id1, id2, convention, keep_zeros)


def product_N2(id1: QuasicharId, id2: QuasicharId, convention: str = "trace",  # noqa: N802
               keep_zeros: bool = True) -> ProductExpansion:
    """N = 2 product: coefficients [c1][c2][a][b] times the squared 9j symbol."""
    for q in (id1, id2):
        if q.n != 2:
            raise LabelError("product_N2 needs two-leaf quasicharacters")
    _check_convention(convention)
    a1, a2 = (s.twice for s in id1.leaf_spins)
    b1, b2 = (s.twice for s in id2.leaf_spins)
    a, b = id1.total.twice, id2.total.twice
    terms = []
    tree = CouplingTree.cherry()
    for c1 in range(abs(a1 - b1), a1 + b1 + 1, 2):
        for c2 in range(abs(a2 - b2), a2 + b2 + 1, 2):
            for c in range(abs(a - b), a + b + 1, 2):
                if not triangle2(c1, c2, c):
                    continue
                nj = ninej2(a1, a2, a, b1, b2, b, c1, c2, c)
                coeff = nj * nj * ((c1 + 1) * (c2 + 1) * (a + 1) * (b + 1)) if nj else SqrtRational(0)
                if not coeff and not keep_zeros:
                    continue
                qc = QuasicharId(tree, [HalfInt(c1), HalfInt(c2)], [], None, HalfInt(c))
                if convention == "orthonormal" and coeff:
                    coeff = coeff * _orthonormal_factor(id1, id2, qc)
                terms.append((qc, coeff))
    return ProductExpansion(terms, convention).sorted()


def structure_constant(i1: QuasicharId, i2: QuasicharId, i3: QuasicharId, convention: str = "trace") -> SqrtRational:
    """Coefficient of chi_{I3} in chi_{I1} chi_{I2} (caterpillar labels)."""
    _check_convention(convention)
    for q in (i1, i2, i3):
        if not q.tree.is_caterpillar:
            raise LabelError("structure constants are defined on the caterpillar tree")
    if not (i1.n == i2.n == i3.n):
        return SqrtRational(0)
    a = [s.twice for s in i1.leaf_spins]
    b = [s.twice for s in i2.leaf_spins]
    c = [s.twice for s in i3.leaf_spins]
    if not all(triangle2(x, y, z) for x, y, z in zip(a, b, c)):
        return SqrtRational(0)
    if not triangle2(i1.total.twice, i2.total.twice, i3.total.twice):
        return SqrtRational(0)
    ket = _u_coefficient(_full_sequence(i1, i1.k), _full_sequence(i2, i2.k), _full_sequence(i3, i3.k), a, b, c)
    if not ket:
        return ket
    bra = _u_coefficient(_full_sequence(i1, i1.k2), _full_sequence(i2, i2.k2), _full_sequence(i3, i3.k2), a, b, c)
    coeff = ket * bra
    if convention == "orthonormal" and coeff:
        coeff = coeff * _orthonormal_factor(i1, i2, i3)
    return coeff


# ---------------------------------------------------------------------------
# independent arguments


def product_independent(id1: QuasicharId, id2: QuasicharId, convention: str = "trace") -> ProductExpansion:
    """chi_1(u_1..u_N1) chi_2(u_{N1+1}..) as a sum over the joined tree, one term per J in <j1, j2>."""
    _check_convention(convention)
    joined = tree_join(id1.tree, id2.tree)
    n1 = id1.n
    shift = {i: i + n1 for i in range(1, id2.n + 1)}
    spins_ket: dict = {}
    spins_bra: dict = {}
    for qid, sh, in ((id1, None), (id2, shift)):
        for lab, target in ((qid.ket, spins_ket), (qid.bra, spins_bra)):
            for node, s in lab.node_spins2().items():
                target[node if sh is None else _relabel(node, sh)] = s
    order = [node for node in _matching_order(joined.shape) if node != joined.shape]
    a, b = id1.total.twice, id2.total.twice
    leaves = list(id1.leaf_spins) + list(id2.leaf_spins)
    terms = []
    for tot in range(abs(a - b), a + b + 1, 2):
        k = [HalfInt(spins_ket[node]) for node in order]
        k2 = [HalfInt(spins_bra[node]) for node in order]
        qc = QuasicharId(joined, leaves, k, k2, HalfInt(tot))
        coeff = SqrtRational(1)
        if convention == "orthonormal":
            coeff = SqrtRational.sqrt(Fraction(tot + 1, (a + 1) * (b + 1)))
        terms.append((qc, coeff))
    return ProductExpansion(terms, convention)


# ---------------------------------------------------------------------------
# recoupling


@dataclass(frozen=True)
class RecouplingMatrix:
    """Overlaps <T_to(ul j K) j m | T_from(ul j k) j m>; rows K on T_to, columns k on T_from."""

    tree_from: CouplingTree
    tree_to: CouplingTree
    leaf_spins: tuple[HalfInt, ...]
    total: HalfInt
    rows: tuple[tuple[HalfInt, ...], ...]
    cols: tuple[tuple[HalfInt, ...], ...]
    entries: tuple[tuple[SqrtRational, ...], ...]

    def __getitem__(self, key: tuple[Sequence[HalfInt], Sequence[HalfInt]]) -> SqrtRational:
        r, c = key
        return self.entries[self.rows.index(tuple(r))][self.cols.index(tuple(c))]

    def to_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries]).reshape(len(self.rows), len(self.cols))

    def gram(self) -> list[list[SqrtRational | SqrtSum]]:
        """R R^T in exact arithmetic."""
        out = []
        for r1 in self.entries:
            row = []
            for r2 in self.entries:
                acc = SqrtSum()
                for x, y in zip(r1, r2):
                    acc += x * y
                row.append(acc.simplify())
            out.append(row)
        return out

    def is_orthogonal(self) -> bool:
        g = self.gram()
        n = len(self.rows)
        if n != len(self.cols):
            return False
        return all(g[i][k] == (1 if i == k else 0) for i in range(n) for k in range(n))

    def to_json(self) -> dict:
        return {
            "tree_from": str(self.tree_from),
            "tree_to": str(self.tree_to),
            "leaves": [s.to_json() for s in self.leaf_spins],
            "total": self.total.to_json(),
            "rows": [[s.to_json() for s in r] for r in self.rows],
            "cols": [[s.to_json() for s in c] for c in self.cols],
            "entries": [[{"exact": str(x), "approx": float(x)} for x in row] for row in self.entries],
        }


@lru_cache(maxsize=4096)
def _recoupling(tree_from: CouplingTree, tree_to: CouplingTree, leaf2: tuple[int, ...], j2: int, m2: int) -> tuple:
    from .coupling import LabelledTree

    rows = enumerate_labels2(tree_to, leaf2, j2)
    cols = enumerate_labels2(tree_from, leaf2, j2)
    leaves = [HalfInt(x) for x in leaf2]
    vec_to = [coupled_vector2(LabelledTree(tree_to, leaves, [HalfInt(x) for x in r], HalfInt(j2)), m2) for r in rows]
    vec_from = [coupled_vector2(LabelledTree(tree_from, leaves, [HalfInt(x) for x in c], HalfInt(j2)), m2) for c in cols]
    entries = []
    for vt in vec_to:
        row = []
        for vf in vec_from:
            acc = SqrtSum()
            small, big = (vt, vf) if len(vt) <= len(vf) else (vf, vt)
            for key, x in small.items():
                y = big.get(key)
                if y is not None:
                    acc += x * y
            row.append(acc.to_sqrt_rational())
        entries.append(tuple(row))
    return rows, cols, tuple(entries)


def recoupling_matrix(tree_from: CouplingTree, tree_to: CouplingTree, ul_j: Sequence, j, m=None) -> RecouplingMatrix:
    """Exact recoupling matrix from coupled-state overlaps at magnetic label m (default m = j)."""
    leaves = tuple(HalfInt.of(x) for x in ul_j)
    total = HalfInt.of(j)
    if tree_from.n != len(leaves) or tree_to.n != len(leaves):
        raise LabelError("trees and leaf spins disagree on N")
    m2 = total.twice if m is None else HalfInt.of(m).twice if not isinstance(m, HalfInt) else m.twice
    rows, cols, entries = _recoupling(tree_from, tree_to, tuple(s.twice for s in leaves), total.twice, m2)
    return RecouplingMatrix(
        tree_from, tree_to, leaves, total,
        tuple(tuple(HalfInt(x) for x in r) for r in rows),
        tuple(tuple(HalfInt(x) for x in c) for c in cols),
        entries,
    )


def change_tree(qid: QuasicharId, tree_to: CouplingTree) -> ProductExpansion:
    """Re-express a quasicharacter on another tree: sum_{K,K'} R[K,k] R[K',k'] chi^{T'}_{K,K'}."""
    if tree_to.n != qid.n:
        raise LabelError("target tree has a different leaf count")
    mat = recoupling_matrix(qid.tree, tree_to, qid.leaf_spins, qid.total)
    col = mat.cols.index(qid.k)
    col2 = mat.cols.index(qid.k2)
    terms = []
    for ri, big_k in enumerate(mat.rows):
        x = mat.entries[ri][col]
        if not x:
            continue
        for rj, big_k2 in enumerate(mat.rows):
            y = mat.entries[rj][col2]
            if not y:
                continue
            terms.append((QuasicharId(tree_to, qid.leaf_spins, big_k, big_k2, qid.total), x * y))
    return ProductExpansion(terms, "trace").sorted()
