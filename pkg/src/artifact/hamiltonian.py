"""Lattice gauge Hamiltonian in the quasicharacter basis.

After tree gauge fixing the configuration variables are the off-tree links
1..N.  Physical states are expanded in orthonormal caterpillar quasicharacters
BF_J over those links; the electric term is diagonal with eigenvalue
sum_i 4 j_i (j_i + 1) and the magnetic term multiplies by the real Wilson sum
W = sum_p (Tr a(p) + conj Tr a(p)) = sum_I W^I (BF_I + conj BF_I).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .algebra import product_caterpillar
from .coupling import CouplingTree, LabelledTree, QuasicharId, coupled_vector2, enumerate_labels2, total_spins2
from .exactnum import HalfInt, HalfIntLike, LabelError, SqrtRational, SqrtSum

__all__ = [
    "CapacityError",
    "HamiltonianParams",
    "LatticeSpec",
    "UnsupportedLatticeError",
    "Word",
    "assemble",
    "basis_index",
    "casimir_eigenvalue",
    "cube_lattice",
    "grid_lattice",
    "lattice_by_name",
    "lattice_from_json",
    "single_plaquette",
    "spectrum",
    "wilson_expansion",
    "wilson_overlap_oracle",
    "word_expansion",
]

MAX_DENSE_DIM = 2000


class UnsupportedLatticeError(ValueError):
    """A plaquette class the expansion does not cover (three off-tree links)."""


class CapacityError(MemoryError):
    """The truncated basis exceeds the dense-solver budget."""


# a plaquette word: cyclic sequence of (off-tree link label 1..N, +1 or -1)
Word = tuple[tuple[int, int], ...]


# ---------------------------------------------------------------------------
# lattices


@dataclass(frozen=True)
class LatticeSpec:
    """Sites, oriented links, plaquettes (closed 4-link cycles) and a gauge tree.

    ``plaquettes`` list each boundary as four (link index, orientation) pairs
    in traversal order; orientation +1 follows the link direction.
    ``labels`` maps off-tree link indices to 1..N; by default off-tree links
    are numbered in increasing link-index order.
    """

    sites: tuple
    links: tuple[tuple[int, int], ...]
    plaquettes: tuple[tuple[tuple[int, int], ...], ...]
    tree: frozenset[int]
    labels: tuple[tuple[int, int], ...] = ()
    name: str = "custom"

    def __post_init__(self) -> None:
        n_sites = len(self.sites)
        for a, b in self.links:
            if not (0 <= a < n_sites and 0 <= b < n_sites) or a == b:
                raise LabelError(f"bad link ({a}, {b})")
        self._check_tree()
        for p in self.plaquettes:
            self._check_cycle(p)
        off = sorted(set(range(len(self.links))) - set(self.tree))
        if self.labels:
            mapping = dict(self.labels)
            if sorted(mapping) != off or sorted(mapping.values()) != list(range(1, len(off) + 1)):
                raise LabelError("labels must number the off-tree links 1..N")
        else:
            object.__setattr__(self, "labels", tuple((link, i + 1) for i, link in enumerate(off)))

    def _check_tree(self) -> None:
        parent = list(range(len(self.sites)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for idx in self.tree:
            if not 0 <= idx < len(self.links):
                raise LabelError(f"tree link {idx} out of range")
            a, b = (find(x) for x in self.links[idx])
            if a == b:
                raise LabelError("gauge tree contains a cycle")
            parent[a] = b
        if len(self.tree) != len(self.sites) - 1:
            raise LabelError("gauge tree does not span the lattice")

    def _check_cycle(self, plaq: Sequence[tuple[int, int]]) -> None:
        ends = []
        for idx, orient in plaq:
            a, b = self.links[idx]
            ends.append((a, b) if orient > 0 else (b, a))
        for (a0, b0), (a1, b1) in zip(ends, ends[1:] + ends[:1]):
            if b0 != a1:
                raise LabelError(f"plaquette {plaq} is not a closed oriented cycle")

    @property
    def n_off_tree(self) -> int:
        return len(self.links) - len(self.tree)

    def words(self) -> list[Word]:
        """Off-tree words of all plaquettes (tree links are set to the identity)."""
        label = dict(self.labels)
        out = []
        for plaq in self.plaquettes:
            word = tuple((label[idx], 1 if orient > 0 else -1) for idx, orient in plaq if idx not in self.tree)
            if len(word) == 3:
                raise UnsupportedLatticeError("plaquette with three off-tree links")
            if not word:
                raise UnsupportedLatticeError("plaquette entirely inside the gauge tree")
            out.append(word)
        return out

    def plaquette_classes(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for plaq in self.plaquettes:
            k = sum(1 for idx, _ in plaq if idx not in self.tree)
            counts[k] = counts.get(k, 0) + 1
        return dict(sorted(counts.items()))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "sites": [list(s) if isinstance(s, tuple) else s for s in self.sites],
            "links": [list(x) for x in self.links],
            "plaquettes": [[[i, o] for i, o in p] for p in self.plaquettes],
            "tree": sorted(self.tree),
            "labels": {str(k): v for k, v in self.labels},
        }


def _square_cycle(link_of: dict, corners: Sequence) -> tuple[tuple[int, int], ...]:
    out = []
    for a, b in zip(corners, list(corners[1:]) + [corners[0]]):
        if (a, b) in link_of:
            out.append((link_of[(a, b)], 1))
        else:
            out.append((link_of[(b, a)], -1))
    return tuple(out)


def _build(sites: list, link_pairs: list[tuple], plaquette_corners: list[list], tree_pairs: Iterable[tuple],
           name: str, label_order: Sequence[tuple] | None = None) -> LatticeSpec:
    index = {s: i for i, s in enumerate(sites)}
    links = tuple((index[a], index[b]) for a, b in link_pairs)
    link_of = {(index[a], index[b]): i for i, (a, b) in enumerate(link_pairs)}
    plaqs = tuple(_square_cycle(link_of, [index[c] for c in corners]) for corners in plaquette_corners)
    tree = set()
    for a, b in tree_pairs:
        key = (index[a], index[b])
        tree.add(link_of[key] if key in link_of else link_of[(key[1], key[0])])
    labels: tuple = ()
    if label_order is not None:
        ids = []
        for a, b in label_order:
            key = (index[a], index[b])
            ids.append(link_of[key] if key in link_of else link_of[(key[1], key[0])])
        labels = tuple((idx, i + 1) for i, idx in enumerate(ids))
    return LatticeSpec(tuple(sites), links, plaqs, frozenset(tree), labels, name)


def single_plaquette(off_tree: int = 3, reverse: Sequence[int] = ()) -> LatticeSpec:
    """One square plaquette; ``off_tree`` picks the link left out of the tree, ``reverse`` flips link directions."""
    sites = [(0, 0), (1, 0), (1, 1), (0, 1)]
    pairs = [((0, 0), (1, 0)), ((1, 0), (1, 1)), ((1, 1), (0, 1)), ((0, 1), (0, 0))]
    pairs = [(b, a) if i in set(reverse) else (a, b) for i, (a, b) in enumerate(pairs)]
    if not 0 <= off_tree < 4:
        raise LabelError("off_tree must be 0..3")
    tree = [p for i, p in enumerate(pairs) if i != off_tree]
    return _build(sites, pairs, [sites], tree, "single-plaquette")


def grid_lattice(lx: int = 2, ly: int = 2, transpose_tree: bool = False,
                 reverse: Sequence[int] = (), label_order: Sequence[int] | None = None) -> LatticeSpec:
    """Open lx-by-ly grid of plaquettes with the standard tree (x-axis at y = 0 plus every vertical line).

    ``transpose_tree`` swaps the roles of the axes; ``reverse`` flips the listed
    links; ``label_order`` permutes the numbering of off-tree links.
    """
    sites = [(x, y) for y in range(ly + 1) for x in range(lx + 1)]
    pairs = []
    for y in range(ly + 1):
        for x in range(lx):
            pairs.append(((x, y), (x + 1, y)))
    for x in range(lx + 1):
        for y in range(ly):
            pairs.append(((x, y), (x, y + 1)))
    flip = set(reverse)
    pairs = [(b, a) if i in flip else (a, b) for i, (a, b) in enumerate(pairs)]
    plaqs = [[(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)] for y in range(ly) for x in range(lx)]

    def horizontal(p):
        return p[0][1] == p[1][1]

    tree = []
    for a, b in pairs:
        if transpose_tree:
            if horizontal((a, b)) or a[0] == 0 and b[0] == 0:
                tree.append((a, b))
        elif not horizontal((a, b)) or a[1] == 0 and b[1] == 0:
            tree.append((a, b))
    lat = _build(sites, pairs, plaqs, tree, f"grid-{lx}x{ly}")
    if label_order is not None:
        off = [link for link, _ in lat.labels]
        if sorted(label_order) != list(range(1, len(off) + 1)):
            raise LabelError("label_order must be a permutation of 1..N")
        lat = LatticeSpec(lat.sites, lat.links, lat.plaquettes, lat.tree,
                          tuple((link, lab) for link, lab in zip(off, label_order)), lat.name)
    return lat


def cube_lattice() -> LatticeSpec:
    """Unit cube with the standard tree; the top face has four off-tree links r, s, t, u.

    Top-face links are oriented along one boundary orientation and numbered
    1..4 increasing in that direction, so its plaquette word is Tr(a1 a2 a3 a4).
    """
    corners = [(x, y, z) for z in (0, 1) for y in (0, 1) for x in (0, 1)]
    top = [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
    pairs = [(top[i], top[(i + 1) % 4]) for i in range(4)]
    pairs += [((0, 0, 0), (1, 0, 0)), ((0, 1, 0), (1, 1, 0)),
              ((0, 0, 0), (0, 1, 0)), ((1, 0, 0), (1, 1, 0))]
    pairs += [((x, y, 0), (x, y, 1)) for y in (0, 1) for x in (0, 1)]
    faces = [
        [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)],
        top,
        [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
        [(0, 1, 0), (1, 1, 0), (1, 1, 1), (0, 1, 1)],
        [(0, 0, 0), (0, 1, 0), (0, 1, 1), (0, 0, 1)],
        [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    ]
    tree = [((0, 0, 0), (1, 0, 0)), ((0, 0, 0), (0, 1, 0)), ((1, 0, 0), (1, 1, 0))]
    tree += [((x, y, 0), (x, y, 1)) for y in (0, 1) for x in (0, 1)]
    order = pairs[:4] + [((0, 1, 0), (1, 1, 0))]
    return _build(corners, pairs, faces, tree, "cube", order)


def lattice_from_json(data: dict | str) -> LatticeSpec:
    """Lattice from {"sites", "links", "plaquettes" (site cycles), "tree" (link indices), optional "labels"}."""
    if isinstance(data, str):
        data = json.loads(data)
    gen = data.get("generator")
    if gen:
        return lattice_by_name(gen, **data.get("options", {}))
    sites = [tuple(s) if isinstance(s, list) else s for s in data["sites"]]
    n = len(sites)
    links = tuple((int(a), int(b)) for a, b in data["links"])
    link_of = {pair: i for i, pair in enumerate(links)}
    plaqs = []
    for cyc in data["plaquettes"]:
        if len(cyc) != 4:
            raise LabelError("plaquettes are 4-site cycles")
        for s in cyc:
            if not 0 <= int(s) < n:
                raise LabelError(f"site {s} out of range")
        plaqs.append(_square_cycle(link_of, [int(s) for s in cyc]))
    labels = tuple((int(k), int(v)) for k, v in data.get("labels", {}).items())
    return LatticeSpec(tuple(sites), links, tuple(plaqs), frozenset(int(i) for i in data["tree"]), labels,
                       data.get("name", "custom"))


def lattice_by_name(name: str, **options) -> LatticeSpec:
    name = name.replace("_", "-").lower()
    if name in ("single-plaquette", "plaquette"):
        return single_plaquette(**options)
    if name in ("grid", "grid-2x2", "2x2"):
        return grid_lattice(**options)
    if name == "cube":
        return cube_lattice()
    raise LabelError(f"unknown lattice generator {name!r}")


# ---------------------------------------------------------------------------
# Wilson loop expansion


def casimir_eigenvalue(ul_j: Sequence[HalfIntLike]) -> Fraction:
    """sum_i 4 j_i (j_i + 1)."""
    total = Fraction(0)
    for x in ul_j:
        j = HalfInt.of(x).as_fraction()
        total += 4 * j * (j + 1)
    return total


def _loop_terms(word: Word) -> list[tuple[tuple[int, ...], tuple[int, ...], int]]:
    """All index loops of Tr(prod a_i^{+-1}) as (rows, cols, sign) over the word letters.

    rows/cols are twice-value magnetic labels per letter in word order, such that
    the loop equals sum sign * prod_i D^{1/2}_{rows_i, cols_i}(a_i).
    """
    n = len(word)
    out = []
    for alpha in itertools.product((1, -1), repeat=n):
        rows, cols, sign = [], [], 1
        for p, (_, orient) in enumerate(word):
            a, b = alpha[p], alpha[(p + 1) % n]
            if orient > 0:
                rows.append(a)
                cols.append(b)
            else:
                # (a^{-1})_{ab} = (-1)^{b - a} a_{-b, -a}
                rows.append(-b)
                cols.append(-a)
                if a != b:
                    sign = -sign
        out.append((tuple(rows), tuple(cols), sign))
    return out


def _sub_ids(letters: Sequence[int]) -> list[QuasicharId]:
    """All orthonormal-basis labels on the caterpillar over the given letters, each with spin 1/2."""
    tree = CouplingTree.caterpillar(len(letters))
    leaf2 = (1,) * len(letters)
    out = []
    for j2 in total_spins2(leaf2):
        seqs = enumerate_labels2(tree, leaf2, j2)
        for k, k2 in itertools.product(seqs, repeat=2):
            out.append(QuasicharId(tree, [HalfInt(1)] * len(letters), [HalfInt(x) for x in k],
                                   [HalfInt(x) for x in k2], HalfInt(j2)))
    return out


def _check_word(word: Word) -> tuple[int, ...]:
    letters = [x for x, _ in word]
    if len(set(letters)) != len(letters):
        raise UnsupportedLatticeError("a plaquette uses an off-tree link twice")
    if any(o not in (1, -1) for _, o in word):
        raise LabelError("orientations must be +1 or -1")
    return tuple(sorted(letters))


def wilson_overlap_oracle(word: Word, qid: QuasicharId) -> SqrtRational:
    """<BF_I | Tr(word)> by the explicit finite Clebsch-Gordan loop sum.

    ``qid`` lives on the caterpillar over the sorted letters of the word with all
    leaf spins 1/2; BF_I = sqrt(d_{ul j}/d_j) sum_m <ul l' m| D |ul l m>, so each
    loop contributes sign * C_l(cols) * C_{l'}(rows) / 2^n.
    """
    word = tuple(word)
    letters = _check_word(word)
    n = len(word)
    if qid.n != n or any(s.twice != 1 for s in qid.leaf_spins):
        raise LabelError("oracle labels must put spin 1/2 on every letter of the word")
    pos = {letter: i for i, letter in enumerate(letters)}
    acc = SqrtSum()
    cache_l: dict = {}
    cache_r: dict = {}
    for rows, cols, sign in _loop_terms(word):
        leaf_rows = [0] * n
        leaf_cols = [0] * n
        for p, (letter, _) in enumerate(word):
            leaf_rows[pos[letter]] = rows[p]
            leaf_cols[pos[letter]] = cols[p]
        m_r, m_c = sum(leaf_rows), sum(leaf_cols)
        if m_r != m_c or abs(m_r) > qid.total.twice:
            continue
        if m_c not in cache_l:
            cache_l[m_c] = coupled_vector2(qid.ket, m_c)
            cache_r[m_c] = coupled_vector2(qid.bra, m_c)
        c_l = cache_l[m_c].get(tuple(leaf_cols))
        c_r = cache_r[m_c].get(tuple(leaf_rows))
        if c_l is None or c_r is None:
            continue
        term = c_l * c_r
        acc += -term if sign < 0 else term
    norm = SqrtRational.sqrt(Fraction(2 ** n, qid.total.dim)) / (2 ** n)
    return (acc * norm).to_sqrt_rational()


def _signed_permutation(word: Word, letters: Sequence[int]) -> dict[tuple[int, ...], list[tuple[tuple[int, ...], int]]]:
    """Operator K with Tr(word)(a) = Tr(K (x) a_i): maps a row tuple to (column tuple, sign) pairs."""
    pos = {letter: i for i, letter in enumerate(letters)}
    n = len(word)
    op: dict = {}
    for rows, cols, sign in _loop_terms(word):
        r = [0] * n
        c = [0] * n
        for p, (letter, _) in enumerate(word):
            r[pos[letter]] = rows[p]
            c[pos[letter]] = cols[p]
        op.setdefault(tuple(r), []).append((tuple(c), sign))
    return op


@lru_cache(maxsize=256)
def word_expansion(word: Word) -> tuple[tuple[QuasicharId, SqrtRational], ...]:
    """Exact expansion Tr(word) = sum_I w^I BF_I on the caterpillar over the word's letters.

    Computed as sqrt(d_{ul j}/d_j) 2^{-n} sum_m <ul l m| K |ul l' m> with K the
    signed permutation operator of the loop acting on exact coupled states.
    """
    word = tuple(word)
    letters = _check_word(word)
    n = len(word)
    op = _signed_permutation(word, letters)
    out = []
    for qid in _sub_ids(letters):
        acc = SqrtSum()
        for m2 in range(-qid.total.twice, qid.total.twice + 1, 2):
            ket = coupled_vector2(qid.ket, m2)
            bra = coupled_vector2(qid.bra, m2)
            for row, x in bra.items():
                for col, sign in op.get(row, ()):
                    y = ket.get(col)
                    if y is not None:
                        acc += (x * y) if sign > 0 else -(x * y)
        value = (acc * (SqrtRational.sqrt(Fraction(2 ** n, qid.total.dim)) / (2 ** n))).to_sqrt_rational()
        if value:
            out.append((qid, value))
    return tuple(out)


def embed_id(sub: QuasicharId, letters: Sequence[int], n: int) -> QuasicharId:
    """Place a caterpillar label on the sorted letters into the N-link caterpillar with spin 0 elsewhere."""
    letters = list(letters)
    leaf = [HalfInt(0)] * n
    for x, s in zip(letters, sub.leaf_spins):
        leaf[x - 1] = s

    def chain(internal: Sequence[HalfInt]) -> list[HalfInt]:
        sub_seq = [sub.leaf_spins[0]] + list(internal) + [sub.total] if sub.n > 1 else [sub.total]
        out = []
        count = 0
        for i in range(1, n + 1):
            if count < len(letters) and letters[count] == i:
                count += 1
            out.append(sub_seq[count - 1] if count else HalfInt(0))
        return out[1:-1] if n > 1 else []

    return QuasicharId(CouplingTree.caterpillar(n), leaf, chain(sub.k), chain(sub.k2), sub.total)


def wilson_expansion(lattice: LatticeSpec) -> list[tuple[QuasicharId, SqrtRational]]:
    """Coefficients W^I with W = sum_I W^I (BF_I + conj BF_I), labels on the N-link caterpillar."""
    n = lattice.n_off_tree
    acc: dict[QuasicharId, SqrtSum] = {}
    for word in lattice.words():
        letters = sorted(x for x, _ in word)
        for sub, coeff in word_expansion(word):
            full = embed_id(sub, letters, n)
            acc.setdefault(full, SqrtSum())
            acc[full] += coeff
    out = []
    for qid, value in acc.items():
        v = value.simplify()
        if v:
            out.append((qid, v))
    return sorted(out, key=lambda t: t[0].sort_key())


# ---------------------------------------------------------------------------
# assembly and spectrum


@dataclass(frozen=True)
class HamiltonianParams:
    g: float = 1.0
    delta: float = 1.0
    jmax: HalfInt = HalfInt(1)
    casimir_cap: Fraction | None = None
    kinetic: str = "hamiltonian"

    def __post_init__(self) -> None:
        object.__setattr__(self, "jmax", HalfInt.of(self.jmax))
        if self.g <= 0 or self.delta <= 0:
            raise ValueError("g and delta must be positive")
        if self.jmax.twice < 1:
            raise ValueError("jmax must be at least 1/2")
        if self.kinetic not in ("hamiltonian", "ep-h"):
            raise ValueError("kinetic normalization is 'hamiltonian' (g^2/(2 delta)) or 'ep-h' (2 g^2 delta)")

    @property
    def kinetic_factor(self) -> float:
        if self.kinetic == "hamiltonian":
            return self.g ** 2 / (2 * self.delta)
        return 2 * self.g ** 2 * self.delta

    @property
    def magnetic_factor(self) -> float:
        return 1.0 / (self.g ** 2 * self.delta)


def _basis_count(n: int, jmax2: int) -> int:
    tree = CouplingTree.caterpillar(n)
    total = 0
    for leaf2 in itertools.product(range(jmax2 + 1), repeat=n):
        for j2 in total_spins2(leaf2):
            total += len(enumerate_labels2(tree, leaf2, j2)) ** 2
    return total


def basis_index(n: int, jmax: HalfIntLike, casimir_cap: Fraction | None = None,
                limit: int = MAX_DENSE_DIM) -> list[QuasicharId]:
    """All caterpillar labels with every link spin <= jmax, ordered by Casimir value then labels."""
    jmax2 = HalfInt.of(jmax).twice
    if n < 1:
        raise LabelError("need at least one off-tree link")
    if casimir_cap is None and _basis_count(n, jmax2) > limit:
        raise CapacityError(f"basis of {_basis_count(n, jmax2)} states exceeds the dense limit {limit}")
    tree = CouplingTree.caterpillar(n)
    out = []
    for leaf2 in itertools.product(range(jmax2 + 1), repeat=n):
        leaves = [HalfInt(x) for x in leaf2]
        if casimir_cap is not None and casimir_eigenvalue(leaves) > casimir_cap:
            continue
        for j2 in total_spins2(leaf2):
            seqs = enumerate_labels2(tree, leaf2, j2)
            for k, k2 in itertools.product(seqs, repeat=2):
                out.append(QuasicharId(tree, leaves, [HalfInt(x) for x in k], [HalfInt(x) for x in k2], HalfInt(j2)))
                if len(out) > limit:
                    raise CapacityError(f"basis exceeds the dense limit {limit}")
    return sorted(out, key=lambda q: (casimir_eigenvalue(q.leaf_spins), q.sort_key()))


@dataclass
class Assembly:
    """Assembled Hamiltonian with its exact ingredients."""

    basis: list[QuasicharId]
    casimir: list[Fraction]
    coupling: dict[tuple[int, int], SqrtRational | SqrtSum]
    params: HamiltonianParams
    wilson: list[tuple[QuasicharId, SqrtRational]]
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coupling_matrix(self) -> np.ndarray:
        """A_{KJ} = sum_I W^I C^K_{IJ} (orthonormal structure constants)."""
        a = np.zeros((self.dim, self.dim))
        for (k, j), v in self.coupling.items():
            a[k, j] = float(v)
        return a

    def is_exactly_symmetric(self) -> bool:
        """A_{KJ} == A_{JK} in exact arithmetic."""
        for (k, j), v in self.coupling.items():
            other = self.coupling.get((j, k), SqrtRational(0))
            if not (SqrtSum([v]) - other).is_zero():
                return False
        return True

    def matrix(self, wilson_scale: float = 1.0) -> np.ndarray:
        """H_{KJ} = kin eps_J delta_KJ - (1/(g^2 delta)) sum_I W^I (C^K_{IJ} + C^J_{IK})."""
        a = self.coupling_matrix()
        h = np.diag([self.params.kinetic_factor * float(e) for e in self.casimir])
        return h - wilson_scale * self.params.magnetic_factor * (a + a.T)


def assemble(lattice: LatticeSpec, params: HamiltonianParams) -> Assembly:
    """Exact structure-constant assembly of the truncated Hamiltonian."""
    n = lattice.n_off_tree
    basis = basis_index(n, params.jmax, params.casimir_cap)
    where = {q: i for i, q in enumerate(basis)}
    wilson = wilson_expansion(lattice)
    coupling: dict[tuple[int, int], SqrtSum] = {}
    for col, qj in enumerate(basis):
        for qi, w in wilson:
            for qk, c in product_caterpillar(qi, qj, "orthonormal"):
                row = where.get(qk)
                if row is None:
                    continue
                coupling.setdefault((row, col), SqrtSum())
                coupling[(row, col)] += SqrtSum([w]) * c
    exact = {key: v.simplify() for key, v in coupling.items() if not v.is_zero()}
    casimir = [casimir_eigenvalue(q.leaf_spins) for q in basis]
    return Assembly(basis, casimir, exact, params, wilson, {
        "lattice": lattice.name,
        "off_tree_links": n,
        "plaquette_classes": {str(k): v for k, v in lattice.plaquette_classes().items()},
        "basis_size": len(basis),
        "jmax": str(params.jmax),
        "casimir_cap": None if params.casimir_cap is None else str(params.casimir_cap),
        "kinetic_normalization": params.kinetic,
    })


def spectrum(matrix: np.ndarray, k: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """k lowest eigenvalues, eigenvectors and residuals ||M v - lambda v|| of a real symmetric matrix."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if m.shape[0] > MAX_DENSE_DIM:
        raise CapacityError(f"dimension {m.shape[0]} exceeds the dense limit {MAX_DENSE_DIM}")
    if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    k = len(vals) if k is None else min(k, len(vals))
    vals, vecs = vals[:k], vecs[:, :k]
    residuals = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
    return vals, vecs, residuals
