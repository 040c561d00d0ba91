"""Binary coupling trees, admissible internal labels and coupled-state coefficients.

A tree is a nested tuple over leaf indices 1..N, e.g. ``((1, 2), 3)``; its
text form is ``"((1 2) 3)"``.  Internal non-root nodes are ordered by the
perfect-matching construction: leaves carry labels 1..N and, repeatedly, the
ready node (both children labelled) whose smallest child label is minimal gets
the next label.  The internal labels ``k`` of a ``LabelledTree`` follow that
order; for the caterpillar they are the intermediate spins l_2 .. l_{N-1}.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence, Union

from .exactnum import HalfInt, HalfIntLike, LabelError, ParseError, SqrtRational
from .wigner import cg2, triangle2

__all__ = [
    "CouplingTree",
    "LabelledTree",
    "QuasicharId",
    "all_quasichar_ids",
    "coupled_state_coefficients",
    "enumerate_labels",
    "multiplicity",
    "total_spins2",
    "tree_join",
    "tree_thread",
]

Shape = Union[int, tuple]


def _leaves(shape: Shape) -> list[int]:
    if isinstance(shape, int):
        return [shape]
    return _leaves(shape[0]) + _leaves(shape[1])


def _to_text(shape: Shape) -> str:
    if isinstance(shape, int):
        return str(shape)
    return f"({_to_text(shape[0])} {_to_text(shape[1])})"


def _relabel(shape: Shape, mapping: dict[int, int]) -> Shape:
    if isinstance(shape, int):
        return mapping[shape]
    return (_relabel(shape[0], mapping), _relabel(shape[1], mapping))


_TOKEN = re.compile(r"\s*(\(|\)|\d+)")


def _parse_shape(text: str) -> Shape:
    tokens: list[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"bad tree string {text!r}")
        tokens.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def parse(i: int) -> tuple[Shape, int]:
        if i >= len(tokens):
            raise ParseError(f"truncated tree string {text!r}")
        tok = tokens[i]
        if tok.isdigit():
            return int(tok), i + 1
        if tok != "(":
            raise ParseError(f"unexpected {tok!r} in {text!r}")
        left, i = parse(i + 1)
        right, i = parse(i)
        if i >= len(tokens) or tokens[i] != ")":
            raise ParseError(f"tree nodes must have exactly two children: {text!r}")
        return (left, right), i + 1

    shape, end = parse(0)
    if end != len(tokens):
        raise ParseError(f"trailing tokens in {text!r}")
    return shape


@dataclass(frozen=True)
class CouplingTree:
    """A planted binary tree with leaves numbered 1..N."""

    shape: Shape

    def __post_init__(self) -> None:
        leaves = _leaves(self.shape)
        if sorted(leaves) != list(range(1, len(leaves) + 1)):
            raise ParseError(f"leaves must be 1..N exactly once: {_to_text(self.shape)}")

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "CouplingTree":
        t = text.strip().lower()
        if t in ("caterpillar", "standard"):
            if n is None:
                raise ParseError("caterpillar needs a leaf count")
            return cls.caterpillar(n)
        tree = cls(_parse_shape(text))
        if n is not None and tree.n != n:
            raise ParseError(f"tree has {tree.n} leaves, expected {n}")
        return tree

    @classmethod
    def caterpillar(cls, n: int) -> "CouplingTree":
        if n < 1:
            raise ValueError("a tree needs at least one leaf")
        shape: Shape = 1
        for i in range(2, n + 1):
            shape = (shape, i)
        return cls(shape)

    @classmethod
    def cherry(cls) -> "CouplingTree":
        return cls((1, 2))

    @cached_property
    def n(self) -> int:
        return len(_leaves(self.shape))

    @property
    def N(self) -> int:  # noqa: N802 - matches the mathematical notation
        return self.n

    @cached_property
    def leaf_order(self) -> tuple[int, ...]:
        """Leaves in planar (left-to-right) order."""
        return tuple(_leaves(self.shape))

    @cached_property
    def is_caterpillar(self) -> bool:
        return self.shape == CouplingTree.caterpillar(self.n).shape

    @cached_property
    def internal_nodes(self) -> tuple[Shape, ...]:
        """Non-root internal nodes in perfect-matching order."""
        order = _matching_order(self.shape)
        return tuple(node for node in order if node != self.shape)

    def __str__(self) -> str:
        return _to_text(self.shape)

    def to_json(self) -> str:
        return str(self)


def _matching_order(shape: Shape) -> list[Shape]:
    """All internal nodes (root last) in perfect-matching label order."""
    label: dict[Shape, int] = {}
    for leaf in _leaves(shape):
        label[leaf] = leaf
    internal: list[Shape] = []

    def collect(s: Shape) -> None:
        if isinstance(s, tuple):
            collect(s[0])
            collect(s[1])
            internal.append(s)

    collect(shape)
    ordered: list[Shape] = []
    nxt = len(_leaves(shape)) + 1
    pending = list(internal)
    while pending:
        ready = [s for s in pending if s[0] in label and s[1] in label]
        best = min(ready, key=lambda s: min(label[s[0]], label[s[1]]))
        label[best] = nxt
        nxt += 1
        ordered.append(best)
        pending.remove(best)
    return ordered


def tree_join(t1: CouplingTree, t2: CouplingTree) -> CouplingTree:
    """Glue the root edges of t1 and t2; leaves of t2 are shifted by N1."""
    shift = {i: i + t1.n for i in range(1, t2.n + 1)}
    return CouplingTree((t1.shape, _relabel(t2.shape, shift)))


def tree_thread(t: CouplingTree) -> CouplingTree:
    """Replace every leaf i by the cherry (2i-1, 2i): leaf order j1, j1', j2, j2', ..."""

    def rec(s: Shape) -> Shape:
        if isinstance(s, int):
            return (2 * s - 1, 2 * s)
        return (rec(s[0]), rec(s[1]))

    return CouplingTree(rec(t.shape))


def _spins(xs: Iterable[HalfIntLike]) -> tuple[HalfInt, ...]:
    return tuple(HalfInt.of(x) for x in xs)


@dataclass(frozen=True)
class LabelledTree:
    """Tree with leaf spins, internal labels (perfect-matching order) and total spin."""

    tree: CouplingTree
    leaf_spins: tuple[HalfInt, ...]
    internal: tuple[HalfInt, ...]
    total: HalfInt

    def __init__(self, tree: CouplingTree, leaf_spins: Sequence[HalfIntLike],
                 internal: Sequence[HalfIntLike], total: HalfIntLike):
        object.__setattr__(self, "tree", tree)
        object.__setattr__(self, "leaf_spins", _spins(leaf_spins))
        object.__setattr__(self, "internal", _spins(internal))
        object.__setattr__(self, "total", HalfInt.of(total))
        self._validate()

    def _validate(self) -> None:
        n = self.tree.n
        if len(self.leaf_spins) != n:
            raise LabelError(f"{len(self.leaf_spins)} leaf spins for a {n}-leaf tree")
        if len(self.internal) != max(n - 2, 0):
            raise LabelError(f"{len(self.internal)} internal labels, expected {max(n - 2, 0)}")
        if any(s.twice < 0 for s in self.leaf_spins + self.internal + (self.total,)):
            raise LabelError("negative spin label")
        if n == 1 and self.total != self.leaf_spins[0]:
            raise LabelError("a one-leaf tree carries its leaf spin as total")
        spins = self.node_spins2()
        for node, c in spins.items():
            if isinstance(node, tuple):
                a, b = spins[node[0]], spins[node[1]]
                if not triangle2(a, b, c):
                    raise LabelError(f"triangle violated at node {_to_text(node)}")

    def node_spins2(self) -> dict[Shape, int]:
        """Twice-value spin carried by every node (leaves, internal nodes, root)."""
        spins: dict[Shape, int] = {}
        for i, s in enumerate(self.leaf_spins, start=1):
            spins[i] = s.twice
        for node, s in zip(self.tree.internal_nodes, self.internal):
            spins[node] = s.twice
        spins[self.tree.shape] = self.total.twice
        return spins

    @property
    def dim(self) -> int:
        out = 1
        for s in self.leaf_spins:
            out *= s.dim
        return out


def _reachable2(shape: Shape, leaf2: Sequence[int], memo: dict) -> frozenset[int]:
    if shape in memo:
        return memo[shape]
    if isinstance(shape, int):
        out = frozenset([leaf2[shape - 1]])
    else:
        ra = _reachable2(shape[0], leaf2, memo)
        rb = _reachable2(shape[1], leaf2, memo)
        out = frozenset(c for a in ra for b in rb for c in range(abs(a - b), a + b + 1, 2))
    memo[shape] = out
    return out


@lru_cache(maxsize=4096)
def enumerate_labels2(tree: CouplingTree, leaf2: tuple[int, ...], j2: int) -> tuple[tuple[int, ...], ...]:
    memo: dict = {}
    if j2 not in _reachable2(tree.shape, leaf2, memo):
        return ()
    results: list[dict[Shape, int]] = []

    def assign(nodes: list[tuple[Shape, int]], acc: dict[Shape, int]) -> None:
        # nodes: (node, required spin) pairs still to expand
        if not nodes:
            results.append(dict(acc))
            return
        (node, c), rest = nodes[0], nodes[1:]
        if isinstance(node, int):
            assign(rest, acc)
            return
        left, right = node
        for a in sorted(_reachable2(left, leaf2, memo)):
            for b in sorted(_reachable2(right, leaf2, memo)):
                if triangle2(a, b, c):
                    acc[left] = a
                    acc[right] = b
                    assign(rest + [(left, a), (right, b)], acc)
        acc.pop(left, None)
        acc.pop(right, None)

    assign([(tree.shape, j2)], {})
    seqs = {tuple(r[node] for node in tree.internal_nodes) for r in results}
    return tuple(sorted(seqs))


def enumerate_labels(tree: CouplingTree, ul_j: Sequence[HalfIntLike], j: HalfIntLike) -> list[tuple[HalfInt, ...]]:
    """All admissible internal-label sequences, lexicographic in twice-values."""
    leaf2 = tuple(s.twice for s in _spins(ul_j))
    if len(leaf2) != tree.n:
        raise LabelError(f"{len(leaf2)} leaf spins for a {tree.n}-leaf tree")
    return [tuple(HalfInt(x) for x in seq) for seq in enumerate_labels2(tree, leaf2, HalfInt.of(j).twice)]


def multiplicity(ul_j: Sequence[HalfIntLike], j: HalfIntLike, tree: CouplingTree | None = None) -> int:
    """Multiplicity of total spin j in the tensor product of the leaf spins."""
    ul_j = _spins(ul_j)
    tree = tree or CouplingTree.caterpillar(len(ul_j))
    return len(enumerate_labels(tree, ul_j, j))


def total_spins2(leaf2: Sequence[int]) -> list[int]:
    """Twice-values of all total spins occurring in the product of the leaf spins."""
    tree = CouplingTree.caterpillar(len(leaf2))
    return sorted(_reachable2(tree.shape, list(leaf2), {}))


# ---------------------------------------------------------------------------
# coupled states


def _node_vector(node: Shape, spins: dict[Shape, int], m: int, memo: dict) -> dict[tuple[int, ...], SqrtRational]:
    """Coefficients of |node; spin, m> over the magnetic labels of its leaves (planar order)."""
    key = (node, m)
    if key in memo:
        return memo[key]
    c = spins[node]
    if isinstance(node, int):
        out = {(m,): SqrtRational(1)} if abs(m) <= c else {}
        memo[key] = out
        return out
    a, b = spins[node[0]], spins[node[1]]
    out: dict[tuple[int, ...], SqrtRational] = {}
    for ma in range(-a, a + 1, 2):
        mb = m - ma
        if abs(mb) > b:
            continue
        coeff = cg2(a, ma, b, mb, c, m)
        if not coeff:
            continue
        left = _node_vector(node[0], spins, ma, memo)
        right = _node_vector(node[1], spins, mb, memo)
        for kl, vl in left.items():
            for kr, vr in right.items():
                out[kl + kr] = coeff * vl * vr
    memo[key] = out
    return out


def coupled_vector2(labelled: LabelledTree, m2: int) -> dict[tuple[int, ...], SqrtRational]:
    """Sparse coupled state at magnetic label m2/2, keyed by twice-value leaf labels."""
    total = labelled.total.twice
    if abs(m2) > total or (total - m2) % 2:
        raise LabelError(f"m={m2}/2 not allowed for j={labelled.total}")
    spins = labelled.node_spins2()
    planar = _node_vector(labelled.tree.shape, spins, m2, {})
    order = labelled.tree.leaf_order
    pos = {leaf: i for i, leaf in enumerate(order)}
    n = labelled.tree.n
    out = {}
    for key, value in planar.items():
        out[tuple(key[pos[leaf]] for leaf in range(1, n + 1))] = value
    return out


def coupled_state_coefficients(labelled: LabelledTree, m: HalfIntLike) -> dict[tuple[HalfInt, ...], SqrtRational]:
    """<ul j, ul m | T(ul j ul k) j m> for all ul m with nonzero coefficient."""
    vec = coupled_vector2(labelled, HalfInt.of(m).twice)
    return {tuple(HalfInt(x) for x in key): value for key, value in vec.items()}


# ---------------------------------------------------------------------------
# quasicharacter labels


@dataclass(frozen=True)
class QuasicharId:
    """Labels of one quasicharacter: tree, leaf spins, internal lists k and k', total j."""

    tree: CouplingTree
    leaf_spins: tuple[HalfInt, ...]
    k: tuple[HalfInt, ...]
    k2: tuple[HalfInt, ...]
    total: HalfInt

    def __init__(self, tree: CouplingTree, leaf_spins: Sequence[HalfIntLike], k: Sequence[HalfIntLike],
                 k2: Sequence[HalfIntLike] | None, total: HalfIntLike):
        object.__setattr__(self, "tree", tree)
        object.__setattr__(self, "leaf_spins", _spins(leaf_spins))
        object.__setattr__(self, "k", _spins(k))
        object.__setattr__(self, "k2", _spins(k if k2 is None else k2))
        object.__setattr__(self, "total", HalfInt.of(total))
        # validates both internal lists
        self.ket
        self.bra

    @classmethod
    def caterpillar(cls, leaf_spins: Sequence[HalfIntLike], total: HalfIntLike,
                    k: Sequence[HalfIntLike] = (), k2: Sequence[HalfIntLike] | None = None) -> "QuasicharId":
        leaf_spins = _spins(leaf_spins)
        return cls(CouplingTree.caterpillar(len(leaf_spins)), leaf_spins, k, k2, total)

    @property
    def n(self) -> int:
        return self.tree.n

    @cached_property
    def ket(self) -> LabelledTree:
        return LabelledTree(self.tree, self.leaf_spins, self.k, self.total)

    @cached_property
    def bra(self) -> LabelledTree:
        return LabelledTree(self.tree, self.leaf_spins, self.k2, self.total)

    @property
    def is_diagonal(self) -> bool:
        return self.k == self.k2

    @property
    def dim_leaves(self) -> int:
        return self.ket.dim

    def sort_key(self) -> tuple:
        return (
            tuple(s.twice for s in self.leaf_spins),
            tuple(s.twice for s in self.k),
            tuple(s.twice for s in self.k2),
            self.total.twice,
            str(self.tree),
        )

    def __str__(self) -> str:
        def fmt(xs: Sequence[HalfInt]) -> str:
            return ",".join(str(x) for x in xs)

        return f"chi[{self.tree}]^{self.total}_({fmt(self.leaf_spins)});({fmt(self.k)});({fmt(self.k2)})"

    def to_json(self) -> dict:
        return {
            "tree": str(self.tree),
            "leaves": [s.to_json() for s in self.leaf_spins],
            "k": [s.to_json() for s in self.k],
            "k_prime": [s.to_json() for s in self.k2],
            "total": self.total.to_json(),
        }


def all_quasichar_ids(tree: CouplingTree, leaf_spins: Sequence[HalfIntLike]) -> list[QuasicharId]:
    """Every (k, k', j) label set for fixed tree and leaf spins."""
    leaf_spins = _spins(leaf_spins)
    leaf2 = tuple(s.twice for s in leaf_spins)
    out = []
    for j2 in total_spins2(leaf2):
        seqs = enumerate_labels2(tree, leaf2, j2)
        for k, k2 in itertools.product(seqs, repeat=2):
            out.append(QuasicharId(tree, leaf_spins, [HalfInt(x) for x in k], [HalfInt(x) for x in k2], HalfInt(j2)))
    return out
