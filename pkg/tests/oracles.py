"""Brute-force reference computations, independent of the library's symbol formulas.

Everything here works on twice-values (Dynkin labels) and plain floats, and is
built from ladder operators and dense linear algebra only.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

__all__ = [
    "casimir_multiplicities",
    "cg_oracle",
    "ninej_oracle",
    "sixj_oracle",
    "spin_ops",
    "symmetric_power_character",
    "trace_word",
]


def spin_ops(j2: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Jz, J+, J-) in the basis m = j, j-1, ..., -j."""
    j = j2 / 2
    ms = [j - k for k in range(j2 + 1)]
    jz = np.diag(ms)
    jp = np.zeros((j2 + 1, j2 + 1))
    for k in range(1, j2 + 1):
        m = ms[k]
        jp[k - 1, k] = math.sqrt(j * (j + 1) - m * (m + 1))
    return jz, jp, jp.T.copy()


@lru_cache(maxsize=None)
def _coupled_states(a2: int, b2: int) -> dict[tuple[int, int], np.ndarray]:
    """|J M> in the product basis of spins a, b by Gram-Schmidt from the top plus lowering.

    Phase: <a a; b (J - a)|J J> > 0 (Condon-Shortley).
    """
    za, pa, ma = spin_ops(a2)
    zb, pb, mb = spin_ops(b2)
    ia, ib = np.eye(a2 + 1), np.eye(b2 + 1)
    jz = np.kron(za, ib) + np.kron(ia, zb)
    jm = np.kron(ma, ib) + np.kron(ia, mb)
    states: dict[tuple[int, int], np.ndarray] = {}
    for j2 in range(a2 + b2, abs(a2 - b2) - 1, -2):
        # M = J sector of the product space
        sector = [i for i in range(jz.shape[0]) if abs(jz[i, i] - j2 / 2) < 1e-12]
        vec = None
        for i in sector:
            trial = np.zeros(jz.shape[0])
            trial[i] = 1.0
            for (k2, m2), s in states.items():
                if m2 == j2:
                    trial -= (s @ trial) * s
            if np.linalg.norm(trial) > 1e-8:
                vec = trial / np.linalg.norm(trial)
                break
        assert vec is not None
        # Condon-Shortley: component with m_a = a positive
        top = [i for i in sector if i // (b2 + 1) == 0]
        if top and vec[top[0]] < 0:
            vec = -vec
        states[(j2, j2)] = vec
        cur = vec
        for m2 in range(j2 - 2, -j2 - 1, -2):
            cur = jm @ cur
            cur = cur / np.linalg.norm(cur)
            states[(j2, m2)] = cur
    return states


def cg_oracle(a2: int, ma2: int, b2: int, mb2: int, c2: int, mc2: int) -> float:
    """<a ma; b mb | c mc> from the explicit coupled states."""
    if abs(ma2) > a2 or abs(mb2) > b2 or ma2 + mb2 != mc2 or (c2, mc2) not in _coupled_states(a2, b2):
        return 0.0
    ia = (a2 - ma2) // 2
    ib = (b2 - mb2) // 2
    return float(_coupled_states(a2, b2)[(c2, mc2)][ia * (b2 + 1) + ib])


def _tri(a: int, b: int, c: int) -> bool:
    return abs(a - b) <= c <= a + b and (a + b + c) % 2 == 0


def _ms(j2: int) -> range:
    return range(-j2, j2 + 1, 2)


def sixj_oracle(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    """{a b c; d e f} from the overlap of ((a b)c, d; e) with (a, (b d)f; e): four CG factors."""
    if not (_tri(a, b, c) and _tri(c, d, e) and _tri(a, e, f) and _tri(b, d, f)):
        return 0.0
    big_m = e
    total = 0.0
    for ma in _ms(a):
        for mb in _ms(b):
            md = big_m - ma - mb
            if abs(md) > d:
                continue
            left = cg_oracle(a, ma, b, mb, c, ma + mb) * cg_oracle(c, ma + mb, d, md, e, big_m)
            right = cg_oracle(b, mb, d, md, f, mb + md) * cg_oracle(a, ma, f, mb + md, e, big_m)
            total += left * right
    phase = -1 if ((a + b + d + e) // 2) % 2 else 1
    return phase * total / math.sqrt((c + 1) * (f + 1))


def ninej_oracle(a: int, b: int, c: int, d: int, e: int, f: int, g: int, h: int, i: int) -> float:
    """{a b c; d e f; g h i} from the overlap of ((a b)c (d e)f) i with ((a d)g (b e)h) i: six CG factors."""
    rows = ((a, b, c), (d, e, f), (g, h, i))
    cols = ((a, d, g), (b, e, h), (c, f, i))
    if not all(_tri(*t) for t in rows + cols):
        return 0.0
    big_m = i
    total = 0.0
    for ma, mb, md in itertools.product(_ms(a), _ms(b), _ms(d)):
        me = big_m - ma - mb - md
        if abs(me) > e:
            continue
        left = (cg_oracle(a, ma, b, mb, c, ma + mb) * cg_oracle(d, md, e, me, f, md + me)
                * cg_oracle(c, ma + mb, f, md + me, i, big_m))
        if left == 0.0:
            continue
        right = (cg_oracle(a, ma, d, md, g, ma + md) * cg_oracle(b, mb, e, me, h, mb + me)
                 * cg_oracle(g, ma + md, h, mb + me, i, big_m))
        total += left * right
    return total / math.sqrt((c + 1) * (f + 1) * (g + 1) * (h + 1))


def casimir_multiplicities(leaf2: tuple[int, ...]) -> dict[int, int]:
    """Multiplicity of each total spin (twice-value) from the spectrum of the total Casimir."""
    dims = [x + 1 for x in leaf2]
    total = int(np.prod(dims))
    comps = [np.zeros((total, total)) for _ in range(3)]
    for pos, j2 in enumerate(leaf2):
        jz, jp, jm = spin_ops(j2)
        jx = (jp + jm) / 2
        jy = (jp - jm) / 2j
        for k, op in enumerate((jx, jy, jz)):
            mats = [np.eye(d) for d in dims]
            mats[pos] = op
            full = mats[0]
            for mm in mats[1:]:
                full = np.kron(full, mm)
            comps[k] = comps[k] + full
    cas = sum(c @ c for c in comps)
    vals = np.linalg.eigvalsh((cas + cas.conj().T) / 2).real
    out: dict[int, int] = {}
    for v in vals:
        j2 = int(round(math.sqrt(1 + 4 * v) - 1))
        out[j2] = out.get(j2, 0) + 1
    return {j2: cnt // (j2 + 1) for j2, cnt in sorted(out.items())}


def trace_word(us: np.ndarray, word: tuple[int, ...]) -> np.ndarray:
    """Tr(u_{w1} u_{w2} ...) for a batch us of shape (S, N, 2, 2), letters 1-based."""
    prod = us[:, word[0] - 1]
    for letter in word[1:]:
        prod = prod @ us[:, letter - 1]
    return np.trace(prod, axis1=-2, axis2=-1)


def symmetric_power_character(us: np.ndarray) -> np.ndarray:
    """Tr(S^N (u_1 x ... x u_N)) = (1/N!) sum over permutations of products of cycle traces."""
    n = us.shape[1]
    total = np.zeros(us.shape[0], dtype=complex)
    for perm in itertools.permutations(range(n)):
        seen = [False] * n
        term = np.ones(us.shape[0], dtype=complex)
        for start in range(n):
            if seen[start]:
                continue
            cycle = []
            k = start
            while not seen[k]:
                seen[k] = True
                cycle.append(k + 1)
                k = perm[k]
            term = term * trace_word(us, tuple(cycle))
        total += term
    return total / math.factorial(n)
