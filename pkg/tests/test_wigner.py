from __future__ import annotations

import itertools
import random
from fractions import Fraction as F

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.physics import wigner as sw

from artifact.exactnum import LabelError, SqrtRational
from artifact.wigner import (
    bracket_9j,
    cache_info,
    clebsch_gordan,
    triangle,
    wigner_6j,
    wigner_9j,
)
from oracles import cg_oracle, ninej_oracle, sixj_oracle

H = F(1, 2)


def _to_sympy(x: SqrtRational) -> sympy.Expr:
    return x.sign * sympy.sqrt(sympy.Rational(x.radicand.numerator, x.radicand.denominator))


def _half(x2: int) -> sympy.Rational:
    return sympy.Rational(x2, 2)


def test_cg_all_small_spins_match_oracle():
    checked = 0
    for a2, b2 in itertools.product(range(5), repeat=2):
        for c2 in range(abs(a2 - b2), a2 + b2 + 1, 2):
            for ma2 in range(-a2, a2 + 1, 2):
                for mb2 in range(-b2, b2 + 1, 2):
                    mc2 = ma2 + mb2
                    if abs(mc2) > c2:
                        continue
                    got = float(clebsch_gordan(F(a2, 2), F(ma2, 2), F(b2, 2), F(mb2, 2), F(c2, 2), F(mc2, 2)))
                    assert got == pytest.approx(cg_oracle(a2, ma2, b2, mb2, c2, mc2), abs=1e-12)
                    checked += 1
    assert checked > 500


def test_cg_selection_rules_give_zero():
    assert clebsch_gordan(H, H, H, H, 1, 0) == 0
    assert clebsch_gordan(1, 0, 1, 0, 1, 0) == 0
    assert clebsch_gordan(H, H, H, -H, 2, 0) == 0


def test_cg_known_values():
    assert clebsch_gordan(H, H, H, -H, 0, 0) == SqrtRational.sqrt(H)
    assert clebsch_gordan(H, -H, H, H, 0, 0) == -SqrtRational.sqrt(H)
    assert clebsch_gordan(1, 1, H, -H, H, H) == SqrtRational.sqrt(F(2, 3))


def test_cg_projection_rules():
    # |m| > j is outside the selection rules; a parity mismatch is a label error
    assert clebsch_gordan(H, F(3, 2), H, -H, 1, 1) == 0
    with pytest.raises(LabelError):
        clebsch_gordan(H, 0, H, 0, 0, 0)


def _random_sixj(rng: random.Random, bound: int = 8):
    while True:
        a, b, d = (rng.randint(0, bound) for _ in range(3))
        cs = [c for c in range(abs(a - b), a + b + 1, 2)]
        fs = [f for f in range(abs(b - d), b + d + 1, 2)]
        c, f = rng.choice(cs), rng.choice(fs)
        es = [e for e in range(abs(c - d), c + d + 1, 2) if abs(a - f) <= e <= a + f]
        if es:
            return a, b, c, d, rng.choice(es), f


def test_sixj_matches_oracle():
    rng = random.Random(61)
    for _ in range(150):
        labels = _random_sixj(rng)
        got = float(wigner_6j(*(F(x, 2) for x in labels)))
        assert got == pytest.approx(sixj_oracle(*labels), abs=1e-12), labels


def test_ninej_matches_oracle():
    rng = random.Random(91)
    done = 0
    while done < 80:
        a, b, d, e = (rng.randint(0, 4) for _ in range(4))
        c = rng.choice(range(abs(a - b), a + b + 1, 2))
        f = rng.choice(range(abs(d - e), d + e + 1, 2))
        g = rng.choice(range(abs(a - d), a + d + 1, 2))
        h = rng.choice(range(abs(b - e), b + e + 1, 2))
        lo = max(abs(c - f), abs(g - h))
        hi = min(c + f, g + h)
        opts = [i for i in range(lo, hi + 1) if (i - c - f) % 2 == 0 and (i - g - h) % 2 == 0]
        if not opts:
            continue
        labels = (a, b, c, d, e, f, g, h, rng.choice(opts))
        got = float(wigner_9j(*(F(x, 2) for x in labels)))
        assert got == pytest.approx(ninej_oracle(*labels), abs=1e-12), labels
        done += 1


@pytest.mark.parametrize("labels", [(1, 2, 3, 1, 2, 3), (3, 3, 2, 1, 1, 2), (4, 4, 4, 4, 4, 4), (5, 3, 4, 3, 5, 2)])
def test_sixj_matches_sympy(labels):
    ours = wigner_6j(*(F(x, 2) for x in labels))
    theirs = sw.wigner_6j(*(_half(x) for x in labels))
    assert sympy.simplify(_to_sympy(ours) - theirs) == 0


@pytest.mark.parametrize("labels", [
    (1, 0, 1, 2, 1, 3, 3, 1, 4),
    (0, 1, 1, 2, 1, 3, 2, 2, 2),
    (2, 2, 2, 2, 2, 2, 2, 2, 2),
    (1, 1, 2, 1, 1, 0, 2, 2, 2),
])
def test_ninej_matches_sympy(labels):
    ours = wigner_9j(*(F(x, 2) for x in labels))
    theirs = sw.wigner_9j(*(_half(x) for x in labels), prec=None)
    assert sympy.simplify(_to_sympy(ours) - theirs) == 0


spins2 = st.integers(min_value=0, max_value=6)


@settings(max_examples=150, deadline=None)
@given(spins2, spins2, spins2, spins2, spins2, spins2)
def test_sixj_tetrahedral_symmetry(a, b, c, d, e, f):
    base = wigner_6j(*(F(x, 2) for x in (a, b, c, d, e, f)))
    for cols in itertools.permutations(range(3)):
        top = [(a, b, c)[i] for i in cols]
        bottom = [(d, e, f)[i] for i in cols]
        assert wigner_6j(*(F(x, 2) for x in top + bottom)) == base
    assert wigner_6j(*(F(x, 2) for x in (d, e, c, a, b, f))) == base


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=4), min_size=9, max_size=9))
def test_ninej_transpose_and_row_swap(m):
    spins = [F(x, 2) for x in m]
    base = wigner_9j(*spins)
    transposed = [spins[i] for i in (0, 3, 6, 1, 4, 7, 2, 5, 8)]
    assert wigner_9j(*transposed) == base
    swapped = spins[3:6] + spins[0:3] + spins[6:9]
    phase = -1 if (sum(m) // 2) % 2 else 1
    assert wigner_9j(*swapped) == (base if phase > 0 else -base)


def test_sixj_orthogonality():
    a, b, d, e = F(1), F(3, 2), F(1), F(3, 2)
    cs = [F(x, 2) for x in range(1, 6, 2)]
    for f1, f2 in itertools.product([F(x, 2) for x in range(1, 6, 2)], repeat=2):
        total = sum(float((2 * c + 1) * (2 * f1 + 1)) * float(wigner_6j(a, b, c, d, e, f1))
                    * float(wigner_6j(a, b, c, d, e, f2)) for c in cs)
        assert total == pytest.approx(1.0 if f1 == f2 else 0.0, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(spins2, spins2, spins2, spins2, spins2, spins2)
def test_ninej_with_zero_reduces_to_sixj(a, b, c, d, e, f):
    # {a b e; c d e; f f 0} = (-1)^(b+c+e+f) {a b e; d c f} / sqrt((2e+1)(2f+1))
    value = wigner_9j(*(F(x, 2) for x in (a, b, e, c, d, e, f, f, 0)))
    sixj = wigner_6j(*(F(x, 2) for x in (a, b, e, d, c, f)))
    if not value and not sixj:
        return
    phase = -1 if ((b + c + e + f) // 2) % 2 else 1
    assert value == sixj * phase / SqrtRational.sqrt((e + 1) * (f + 1))


class TestNinejTables:
    """Exact 9j values for the product-expansion entries; labels carry a free spin j."""

    js = [H, F(1), F(3, 2), F(2), F(5, 2), F(3)]

    @pytest.mark.parametrize("j", js)
    def test_first_table(self, j):
        assert wigner_9j(H, 0, H, j, H, j + H, j + H, H, j + 1) == SqrtRational.from_rational(1 / (2 * (2 * j + 2)))
        assert wigner_9j(H, 0, H, j, H, j + H, j + H, H, j) == SqrtRational.from_rational(
            1 / (2 * (2 * j + 1) * (2 * j + 2)))
        # middle row (j, 1/2, j+1/2) in the last two columns
        assert wigner_9j(H, 0, H, j, H, j + H, j - H, H, j) == SqrtRational.from_rational(1 / (2 * (2 * j + 1)))
        if j >= 1:
            assert wigner_9j(H, 0, H, j, H, j + H, j - H, H, j - 1) == 0

    @pytest.mark.parametrize("j", js)
    def test_first_table_as_printed_labels(self, j):
        # with middle row (j, 1/2, j-1/2) the third entry is -1/(4j(2j+1))
        assert wigner_9j(H, 0, H, j, H, j - H, j - H, H, j) == SqrtRational.from_rational(-1 / (4 * j * (2 * j + 1)))

    @pytest.mark.parametrize("j", js)
    def test_second_table(self, j):
        assert wigner_9j(0, H, H, j, H, j + H, j, 1, j + 1) == SqrtRational.sqrt(1 / (12 * (j + 1) * (2 * j + 1)))
        assert wigner_9j(0, H, H, j, H, j + H, j, 1, j) == -SqrtRational.sqrt(j / (12 * (j + 1) * (2 * j + 1) ** 2))
        assert wigner_9j(0, H, H, j, H, j + H, j, 0, j) == SqrtRational.from_rational(1 / (2 * (2 * j + 1)))

    @pytest.mark.parametrize("j", js)
    def test_squared_brackets_are_product_coefficients(self, j):
        # unitary 9j brackets squared reproduce the lemma coefficients
        assert bracket_9j(0, H, H, j, H, j + H, j, 1, j).square() == j / (2 * j + 1)
        assert bracket_9j(0, H, H, j, H, j + H, j, 0, j).square() == (j + 1) / (2 * j + 1)


def test_triangle_and_cache_info():
    assert triangle(1, 1, 2) and not triangle(1, 1, 3) and not triangle(H, H, H)
    wigner_9j(1, 1, 1, 1, 1, 1, 1, 1, 1)
    info = cache_info()
    assert set(info) == {"cg", "6j", "9j", "bracket9j"}
    assert info["9j"]["currsize"] >= 1


def test_ninej_needs_nine_labels():
    with pytest.raises(LabelError):
        wigner_9j(1, 1, 1)
