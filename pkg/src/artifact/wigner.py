"""Exact Clebsch-Gordan coefficients and 6j/9j Racah symbols.

Condon-Shortley phases throughout.  Internally every label is a twice-value
integer; the public functions accept anything ``HalfInt.of`` understands.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

from .exactnum import HalfInt, HalfIntLike, LabelError, SqrtRational, SqrtSum

__all__ = [
    "bracket_9j",
    "cache_info",
    "clebsch_gordan",
    "triangle",
    "wigner_6j",
    "wigner_9j",
]

CACHE_SIZE = 1 << 18


def _t(x: HalfIntLike) -> int:
    return HalfInt.of(x).twice


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


def triangle2(a: int, b: int, c: int) -> bool:
    """Triangle condition on twice-values: c in <a, b> with integer perimeter."""
    return a >= 0 and b >= 0 and c >= 0 and abs(a - b) <= c <= a + b and (a + b + c) % 2 == 0


def triangle(a: HalfIntLike, b: HalfIntLike, c: HalfIntLike) -> bool:
    return triangle2(_t(a), _t(b), _t(c))


def _delta_sq(a: int, b: int, c: int) -> Fraction:
    """Square of the triangle coefficient Delta(abc), twice-value arguments."""
    return Fraction(
        _fact((a + b - c) // 2) * _fact((a - b + c) // 2) * _fact((-a + b + c) // 2),
        _fact((a + b + c) // 2 + 1),
    )


# ---------------------------------------------------------------------------
# Clebsch-Gordan


def _check_m(j: int, m: int) -> None:
    if (j - m) % 2:
        raise LabelError(f"parity mismatch between j={j}/2 and m={m}/2")


@lru_cache(maxsize=CACHE_SIZE)
def cg2(j1: int, m1: int, j2: int, m2: int, j: int, m: int) -> SqrtRational:
    """<j1 m1; j2 m2 | j m> with twice-value arguments (Racah formula)."""
    _check_m(j1, m1)
    _check_m(j2, m2)
    _check_m(j, m)
    if m1 + m2 != m or not triangle2(j1, j2, j):
        return SqrtRational(0)
    if abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return SqrtRational(0)
    # half-sums as integers
    a = (j1 + j2 - j) // 2
    b = (j1 - m1) // 2
    c = (j2 + m2) // 2
    d = (j - j2 + m1) // 2
    e = (j - j1 - m2) // 2
    kmin = max(0, -d, -e)
    kmax = min(a, b, c)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = _fact(k) * _fact(a - k) * _fact(b - k) * _fact(c - k) * _fact(d + k) * _fact(e + k)
        total += Fraction(-1 if k % 2 else 1, den)
    if total == 0:
        return SqrtRational(0)
    pref = (j + 1) * _delta_sq(j1, j2, j) * (
        _fact((j1 + m1) // 2) * _fact((j1 - m1) // 2)
        * _fact((j2 + m2) // 2) * _fact((j2 - m2) // 2)
        * _fact((j + m) // 2) * _fact((j - m) // 2)
    )
    return SqrtRational.sqrt(pref * total * total, 1 if total > 0 else -1)


def clebsch_gordan(
    j1: HalfIntLike, m1: HalfIntLike, j2: HalfIntLike, m2: HalfIntLike, j: HalfIntLike, m: HalfIntLike
) -> SqrtRational:
    """Condon-Shortley coefficient C^{j1 j2 j}_{m1 m2 m}; zero off the selection rules."""
    return cg2(_t(j1), _t(m1), _t(j2), _t(m2), _t(j), _t(m))


# ---------------------------------------------------------------------------
# 6j


def _canonical_6j(a: int, b: int, c: int, d: int, e: int, f: int) -> tuple[int, ...]:
    cols = [(a, d), (b, e), (c, f)]
    best = None
    for perm in itertools.permutations(cols):
        for flip in ((0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)):
            cs = [col[::-1] if fl else col for col, fl in zip(perm, flip)]
            key = (cs[0][0], cs[1][0], cs[2][0], cs[0][1], cs[1][1], cs[2][1])
            if best is None or key < best:
                best = key
    return best


@lru_cache(maxsize=CACHE_SIZE)
def _racah_6j(a: int, b: int, c: int, d: int, e: int, f: int) -> SqrtRational:
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(triangle2(*t) for t in triads):
        return SqrtRational(0)
    s1 = (a + b + c) // 2
    s2 = (a + e + f) // 2
    s3 = (d + b + f) // 2
    s4 = (d + e + c) // 2
    p1 = (a + b + d + e) // 2
    p2 = (a + c + d + f) // 2
    p3 = (b + c + e + f) // 2
    total = Fraction(0)
    for t in range(max(s1, s2, s3, s4), min(p1, p2, p3) + 1):
        den = (
            _fact(t - s1) * _fact(t - s2) * _fact(t - s3) * _fact(t - s4)
            * _fact(p1 - t) * _fact(p2 - t) * _fact(p3 - t)
        )
        total += Fraction((-1 if t % 2 else 1) * _fact(t + 1), den)
    if total == 0:
        return SqrtRational(0)
    pref = _delta_sq(a, b, c) * _delta_sq(a, e, f) * _delta_sq(d, b, f) * _delta_sq(d, e, c)
    return SqrtRational.sqrt(pref * total * total, 1 if total > 0 else -1)


def sixj2(a: int, b: int, c: int, d: int, e: int, f: int) -> SqrtRational:
    return _racah_6j(*_canonical_6j(a, b, c, d, e, f))


def wigner_6j(
    j1: HalfIntLike, j2: HalfIntLike, j3: HalfIntLike, j4: HalfIntLike, j5: HalfIntLike, j6: HalfIntLike
) -> SqrtRational:
    """The 6j symbol {j1 j2 j3; j4 j5 j6}."""
    return sixj2(_t(j1), _t(j2), _t(j3), _t(j4), _t(j5), _t(j6))


# ---------------------------------------------------------------------------
# 9j

_PERM_PARITY = {p: sum(1 for i in range(3) for k in range(i + 1, 3) if p[i] > p[k]) % 2
                for p in itertools.permutations(range(3))}


@lru_cache(maxsize=CACHE_SIZE)
def _canonical_9j(m: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    """Minimal representative under the 72 symmetries, with the sign factor."""
    rows = (m[0:3], m[3:6], m[6:9])
    total = sum(m)
    odd_sign = -1 if (total // 2) % 2 else 1  # (-1)^(sum of spins); total is even
    best = None
    best_sign = 1
    for rp, rpar in _PERM_PARITY.items():
        for cp, cpar in _PERM_PARITY.items():
            grid = [[rows[r][c] for c in cp] for r in rp]
            sign = odd_sign if (rpar + cpar) % 2 else 1
            for g in (grid, [list(col) for col in zip(*grid)]):
                key = tuple(itertools.chain.from_iterable(g))
                if best is None or key < best:
                    best, best_sign = key, sign
    return best, best_sign


@lru_cache(maxsize=CACHE_SIZE)
def _ninej_sum(a: int, b: int, c: int, d: int, e: int, f: int, g: int, h: int, i: int) -> SqrtRational:
    lo = max(abs(a - i), abs(d - h), abs(b - f))
    hi = min(a + i, d + h, b + f)
    acc = SqrtSum()
    for x in range(lo, hi + 1, 2):
        t1 = sixj2(a, b, c, f, i, x)
        if not t1:
            continue
        t2 = sixj2(d, e, f, b, x, h)
        if not t2:
            continue
        t3 = sixj2(g, h, i, x, a, d)
        if not t3:
            continue
        acc += t1 * t2 * t3 * ((-1 if x % 2 else 1) * (x + 1))
    return acc.to_sqrt_rational()


def ninej2(*m: int) -> SqrtRational:
    a, b, c, d, e, f, g, h, i = m
    checks = ((a, b, c), (d, e, f), (g, h, i), (a, d, g), (b, e, h), (c, f, i))
    if not all(triangle2(*t) for t in checks):
        return SqrtRational(0)
    key, sign = _canonical_9j(m)
    value = _ninej_sum(*key)
    return -value if sign < 0 else value


def wigner_9j(*labels: HalfIntLike) -> SqrtRational:
    """The 9j symbol {a b c; d e f; g h i} (row-major arguments)."""
    if len(labels) != 9:
        raise LabelError("wigner_9j takes nine spins")
    return ninej2(*(_t(x) for x in labels))


@lru_cache(maxsize=CACHE_SIZE)
def bracket9j2(*m: int) -> SqrtRational:
    value = ninej2(*m)
    if not value:
        return value
    return value * SqrtRational.sqrt((m[2] + 1) * (m[5] + 1) * (m[6] + 1) * (m[7] + 1))


def bracket_9j(*labels: HalfIntLike) -> SqrtRational:
    """sqrt(d3 d6 d7 d8) times the 9j symbol: the unitary recoupling coefficient."""
    if len(labels) != 9:
        raise LabelError("bracket_9j takes nine spins")
    return bracket9j2(*(_t(x) for x in labels))


def cache_info() -> dict:
    return {
        "cg": cg2.cache_info()._asdict(),
        "6j": _racah_6j.cache_info()._asdict(),
        "9j": _ninej_sum.cache_info()._asdict(),
        "bracket9j": bracket9j2.cache_info()._asdict(),
    }
