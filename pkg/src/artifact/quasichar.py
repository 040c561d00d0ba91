"""Quasicharacter evaluation, Haar inner products and exact trace-polynomial fits.

Conventions for a quasicharacter with labels (T, ul j, ul k, ul k', j):

``trace``        sum_m <ul k', m| D(ul u) |ul k, m>, equal to d_j at the identity
                 for diagonal labels.
``orthonormal``  trace times sqrt(d_{ul j} / d_j); orthonormal in L^2 over Haar^N.
``table``        trace divided by sqrt(prod d_{j_i}).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .coupling import LabelledTree, QuasicharId
from .exactnum import LabelError, _split_square
from .rep import (
    coupled_basis_cg,
    coupled_basis_projector,
    dmatrix_array,
    make_rng,
    projector_tree,
    su2_sample,
    tensor_apply,
)

__all__ = [
    "CONVENTIONS",
    "FitError",
    "TraceMonomial",
    "TracePolynomial",
    "canonical_form",
    "convention_factor",
    "fit_function",
    "fit_trace_polynomial",
    "haar_inner_product",
    "monomial_basis",
    "quasichar_eval",
]

CONVENTIONS = ("trace", "orthonormal", "table")


class FitError(ArithmeticError):
    """A trace-polynomial fit failed its residual checks."""


# ---------------------------------------------------------------------------
# evaluation


def convention_factor(qid: QuasicharId, convention: str) -> float:
    if convention == "trace":
        return 1.0
    if convention == "orthonormal":
        return math.sqrt(qid.dim_leaves / qid.total.dim)
    if convention == "table":
        return 1.0 / math.sqrt(qid.dim_leaves)
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


@lru_cache(maxsize=2048)
def _basis(labelled: LabelledTree, method: str) -> np.ndarray:
    if method == "cg":
        return coupled_basis_cg(labelled)
    return coupled_basis_projector(labelled)


@lru_cache(maxsize=512)
def _projector(labelled: LabelledTree) -> np.ndarray:
    return projector_tree(labelled).entries


def _split_elements(qid: QuasicharId, us: np.ndarray | Sequence) -> list[np.ndarray]:
    if isinstance(us, np.ndarray):
        arr = us
        if arr.shape[-2:] != (2, 2) or arr.ndim < 3 or arr.shape[-3] != qid.n:
            raise LabelError(f"expected {qid.n} group elements, got array of shape {arr.shape}")
        return [arr[..., i, :, :] for i in range(qid.n)]
    elems = [np.asarray(u, dtype=complex) for u in us]
    if len(elems) != qid.n:
        raise LabelError(f"expected {qid.n} group elements, got {len(elems)}")
    return elems


def quasichar_eval(
    qid: QuasicharId,
    us: np.ndarray | Sequence,
    convention: str = "trace",
    method: str = "cg",
) -> np.ndarray | complex:
    """Evaluate the quasicharacter at one tuple or a batch of tuples.

    ``us`` is either a list of N arrays of shape (..., 2, 2) or one array of
    shape (..., N, 2, 2).  ``method`` selects the coupled basis: ``cg`` uses
    the exact coupled-state coefficients, ``projector`` the spin-chain
    projector calculus (Tr(P D) on the diagonal, an intertwiner built from
    projector-generated multiplets off the diagonal).
    """
    if method not in ("cg", "projector"):
        raise ValueError(f"unknown method {method!r}")
    factor = convention_factor(qid, convention)
    elems = _split_elements(qid, us)
    batch_shape = np.broadcast_shapes(*(u.shape[:-2] for u in elems))
    flat = [np.broadcast_to(u, batch_shape + (2, 2)).reshape(-1, 2, 2) for u in elems]
    mats = [dmatrix_array(s.twice, u) for s, u in zip(qid.leaf_spins, flat)]
    if method == "projector" and qid.is_diagonal:
        proj = _projector(qid.ket)
        values = np.einsum("saa->s", tensor_apply(mats, proj))
    else:
        ket = _basis(qid.ket, method)
        bra = ket if qid.is_diagonal else _basis(qid.bra, method)
        applied = tensor_apply(mats, ket)
        values = np.einsum("dc,sdc->s", bra.conj(), applied)
    values = values * factor
    out = values.reshape(batch_shape)
    return complex(out) if out.ndim == 0 else out


def haar_inner_product(
    id_a: QuasicharId,
    id_b: QuasicharId,
    samples: int = 10000,
    rng: np.random.Generator | int | None = 0,
    convention: str = "orthonormal",
    chunk: int = 20000,
) -> tuple[complex, float]:
    """Monte Carlo estimate of the integral of conj(chi_A) chi_B over Haar^N, with standard error."""
    if samples < 1:
        raise ValueError("samples must be positive")
    if id_a.n != id_b.n:
        raise LabelError("inner product needs equal leaf counts")
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    total = 0j
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        us = su2_sample(rng, (m, id_a.n))
        vals = np.conj(quasichar_eval(id_a, us, convention)) * quasichar_eval(id_b, us, convention)
        total += vals.sum()
        total_sq += float(np.sum(np.abs(vals) ** 2))
        done += m
    mean = total / samples
    var = max(total_sq / samples - abs(mean) ** 2, 0.0)
    stderr = math.sqrt(var / max(samples - 1, 1)) if samples > 1 else float("inf")
    return complex(mean), stderr


# ---------------------------------------------------------------------------
# trace monomials


def _min_rotation(word: Sequence[int]) -> tuple[int, ...]:
    word = tuple(word)
    if not word:
        raise ValueError("empty word")
    return min(word[i:] + word[:i] for i in range(len(word)))


def _letter_names(n: int) -> list[str]:
    if n <= 3:
        return ["u", "v", "w"][:n]
    if n == 4:
        return ["r", "s", "t", "u"]
    return [f"u{i}" for i in range(1, n + 1)]


@dataclass(frozen=True, order=True)
class TraceMonomial:
    """Product of traces of cyclic words in the letters 1..N; () is the constant 1."""

    words: tuple[tuple[int, ...], ...]

    def __init__(self, words: Iterable[Sequence[int]] = ()):
        canon = tuple(sorted((_min_rotation(w) for w in words), key=lambda w: (len(w), w)))
        for w in canon:
            if len(w) > 1 and any(w[i] == w[(i + 1) % len(w)] for i in range(len(w))):
                raise ValueError(f"word {w} is not cyclically reduced")
        object.__setattr__(self, "words", canon)

    @classmethod
    def parse(cls, text: str, n: int) -> "TraceMonomial":
        """Parse e.g. "Tr(uv)Tr(w)" or "1" with the default letter names for n letters."""
        names = _letter_names(n)
        text = text.replace(" ", "").replace("*", "")
        if text in ("", "1"):
            return cls(())
        words = []
        pos = 0
        while pos < len(text):
            if not text.startswith("Tr(", pos):
                raise ValueError(f"cannot parse monomial {text!r}")
            end = text.index(")", pos)
            body = text[pos + 3:end]
            pos = end + 1
            power = 1
            if pos < len(text) and text[pos] == "^":
                pos += 1
                start = pos
                while pos < len(text) and text[pos].isdigit():
                    pos += 1
                power = int(text[start:pos])
            word = []
            i = 0
            while i < len(body):
                for k, name in sorted(enumerate(names), key=lambda kv: -len(kv[1])):
                    if body.startswith(name, i):
                        word.append(k + 1)
                        i += len(name)
                        break
                else:
                    raise ValueError(f"unknown letter in {body!r}")
            words.extend([word] * power)
        return cls(words)

    def degrees(self, n: int) -> list[int]:
        deg = [0] * n
        for w in self.words:
            for letter in w:
                deg[letter - 1] += 1
        return deg

    def evaluate(self, elems: Sequence[np.ndarray], cache: dict | None = None) -> np.ndarray:
        """Value at batched elements elems[i] of shape (S, 2, 2)."""
        batch = elems[0].shape[:-2]
        out = np.ones(batch, dtype=complex)
        for w in self.words:
            if cache is not None and w in cache:
                tr = cache[w]
            else:
                prod = elems[w[0] - 1]
                for letter in w[1:]:
                    prod = prod @ elems[letter - 1]
                tr = np.trace(prod, axis1=-2, axis2=-1)
                if cache is not None:
                    cache[w] = tr
            out = out * tr
        return out

    def to_str(self, n: int) -> str:
        if not self.words:
            return "1"
        names = _letter_names(n)
        parts = []
        for w, group in itertools.groupby(self.words):
            count = len(list(group))
            body = "".join(names[x - 1] for x in w)
            parts.append(f"Tr({body})" + (f"^{count}" if count > 1 else ""))
        return "".join(parts)

    def __str__(self) -> str:
        n = max((x for w in self.words for x in w), default=1)
        return self.to_str(n)


def _words(n: int, mode: str, max_len: int) -> list[tuple[int, ...]]:
    out = []
    for length in range(1, min(max_len, n) + 1):
        for letters in itertools.combinations(range(1, n + 1), length):
            if mode == "generator" or length < 3:
                out.append(letters)
                continue
            first, rest = letters[0], letters[1:]
            for perm in itertools.permutations(rest):
                out.append((first,) + perm)
    return out


def monomial_basis(
    n: int,
    degree_caps: Sequence[int],
    parities: Sequence[int] | None = None,
    mode: str = "generator",
) -> list[TraceMonomial]:
    """Trace monomials with per-letter degree <= cap and of the given parity.

    ``generator`` mode uses words of length <= 3 with increasing letters (one
    orientation); ``table`` mode uses every distinct-letter cyclic word in both
    orientations.
    """
    caps = list(degree_caps)
    if len(caps) != n:
        raise ValueError("one degree cap per letter required")
    pars = [c % 2 for c in caps] if parities is None else [p % 2 for p in parities]
    if mode not in ("generator", "table"):
        raise ValueError(f"unknown basis mode {mode!r}")
    words = _words(n, mode, 3 if mode == "generator" else n)
    results: list[TraceMonomial] = []

    def rec(start: int, remaining: list[int], chosen: list[tuple[int, ...]]) -> None:
        if all((caps[i] - remaining[i]) % 2 == pars[i] for i in range(n)):
            results.append(TraceMonomial(chosen))
        for idx in range(start, len(words)):
            w = words[idx]
            if all(remaining[x - 1] > 0 for x in w):
                for x in w:
                    remaining[x - 1] -= 1
                chosen.append(w)
                rec(idx, remaining, chosen)
                chosen.pop()
                for x in w:
                    remaining[x - 1] += 1

    rec(0, list(caps), [])
    return sorted(set(results), key=lambda m: (sum(len(w) for w in m.words), len(m.words), m.words))


@dataclass
class TracePolynomial:
    """Exact combination of trace monomials: sqrt(radical) times a rational combination.

    Diagonal quasicharacters have rational coefficients (radical 1).  Off the
    diagonal the two coupled-state normalizations can leave one common
    square root, carried by the squarefree integer ``radical``.
    """

    n: int
    terms: dict[TraceMonomial, Fraction]
    radical: int = 1
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        self.terms = {m: Fraction(c) for m, c in self.terms.items() if c != 0}
        if self.radical < 1 or _split_square(self.radical)[0] != 1:
            raise ValueError(f"radical must be a squarefree positive integer, got {self.radical}")
        if not self.terms:
            self.radical = 1

    @classmethod
    def from_strings(cls, n: int, items: Mapping[str, "Fraction | int | str"], radical: int = 1) -> "TracePolynomial":
        terms: dict[TraceMonomial, Fraction] = {}
        for key, value in items.items():
            mono = TraceMonomial.parse(key, n)
            terms[mono] = terms.get(mono, Fraction(0)) + Fraction(value)
        return cls(n, terms, radical)

    def evaluate(self, us: np.ndarray | Sequence) -> np.ndarray:
        if isinstance(us, np.ndarray) and us.ndim >= 3 and us.shape[-3] == self.n:
            elems = [us[..., i, :, :] for i in range(self.n)]
        else:
            elems = [np.asarray(u, dtype=complex) for u in us]
        cache: dict = {}
        out = np.zeros(elems[0].shape[:-2], dtype=complex)
        for mono, c in self.terms.items():
            out = out + float(c) * mono.evaluate(elems, cache)
        return out * math.sqrt(self.radical) if self.radical != 1 else out

    def coefficient(self, mono: TraceMonomial | str) -> Fraction:
        """Rational part of the coefficient (the full coefficient is this times sqrt(radical))."""
        if isinstance(mono, str):
            mono = TraceMonomial.parse(mono, self.n)
        return self.terms.get(mono, Fraction(0))

    def sorted_terms(self) -> list[tuple[TraceMonomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: (sum(len(w) for w in kv[0].words), kv[0].words))

    def to_json(self) -> dict[str, str]:
        tail = "" if self.radical == 1 else f"*sqrt({self.radical})"
        return {m.to_str(self.n): f"{c}{tail}" for m, c in self.sorted_terms()}

    def to_str(self) -> str:
        """Human-readable form with a common denominator pulled out, as in printed tables."""
        if not self.terms:
            return "0"
        den = math.lcm(*(c.denominator for c in self.terms.values()))
        pieces = []
        for mono, c in self.sorted_terms():
            k = c * den
            mag = abs(k)
            body = mono.to_str(self.n)
            if body == "1":
                txt = str(mag)
            else:
                txt = body if mag == 1 else f"{mag}*{body}"
            pieces.append(("-" if k < 0 else "+", txt))
        out = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
        for sign, txt in pieces[1:]:
            out += f" {sign} {txt}"
        body = out if den == 1 else f"1/{den}*({out})"
        if self.radical == 1:
            return body
        return f"sqrt({self.radical})*{body}" if den != 1 or len(pieces) == 1 else f"sqrt({self.radical})*({body})"

    def __str__(self) -> str:
        return self.to_str()


# ---------------------------------------------------------------------------
# fitting


def _pivot_columns(a: np.ndarray, tol: float) -> list[int]:
    """Greedy independent columns in the given order."""
    chosen: list[int] = []
    q = np.zeros((a.shape[0], 0))
    for idx in range(a.shape[1]):
        col = a[:, idx]
        resid = col - q @ (q.T @ col) if q.shape[1] else col
        resid = resid - q @ (q.T @ resid) if q.shape[1] else resid
        norm = np.linalg.norm(resid)
        if norm > tol * max(np.linalg.norm(col), 1e-300):
            chosen.append(idx)
            q = np.column_stack([q, resid / norm])
    return chosen


def _reconstruct(x: float, max_denominator: int, tol: float = 1e-4) -> Fraction | None:
    """Smallest-denominator rational p/q with |x - p/q| * q^2 below tol, or None.

    Continued-fraction approximations of an irrational number only reach
    |x - p/q| ~ 1/q^2, so the q^2 weighting separates genuine rationals
    (error at round-off level) from close approximations of surds.
    """
    bound = 8
    while True:
        q = Fraction(x).limit_denominator(min(bound, max_denominator))
        if abs(x - float(q)) * q.denominator ** 2 <= tol and abs(x - float(q)) <= 1e-9 * max(1.0, abs(x)):
            return q
        if bound >= max_denominator:
            return None
        bound *= 8


def _reconstruct_all(coeffs: np.ndarray, max_denominator: int) -> tuple[int, list[Fraction]]:
    """(radical, rationals) with coeffs ~ sqrt(radical) * rationals."""
    coeffs = [float(c) for c in coeffs]
    direct = [_reconstruct(c, max_denominator) for c in coeffs]
    if all(q is not None for q in direct):
        return 1, direct  # type: ignore[return-value]
    big = max(coeffs, key=abs)
    square = _reconstruct(big * big, max_denominator ** 2)
    if square is None or square == 0:
        raise FitError("coefficients are neither rational nor a common surd multiple")
    radical = _split_square(square.numerator * square.denominator)[1]
    root = math.sqrt(radical)
    scaled = [_reconstruct(c / root, max_denominator) for c in coeffs]
    if any(q is None for q in scaled):
        raise FitError(f"coefficients do not lie in sqrt({radical}) * Q")
    return radical, scaled  # type: ignore[return-value]


def fit_function(
    fn: Callable[[np.ndarray], np.ndarray],
    n: int,
    basis: Sequence[TraceMonomial],
    rng: np.random.Generator | int | None = 0,
    resolve: str = "min-norm",
    oversample: int = 4,
    max_denominator: int = 10 ** 6,
    residual_tol: float = 1e-9,
    holdout: int = 50,
) -> TracePolynomial:
    """Exact rational expansion of a real invariant function ``fn`` on batches of shape (S, n, 2, 2).

    The function is sampled at ``oversample`` times as many random tuples as
    there are monomials, solved by least squares, and the coefficients are
    reconstructed as rationals and re-checked at ``holdout`` fresh tuples.
    ``resolve`` chooses between the minimum-norm solution and a pivoted
    solve that keeps the earliest independent monomials of the given order.
    """
    if oversample < 3:
        raise ValueError("oversample must be at least 3")
    if not isinstance(rng, np.random.Generator):
        seed = rng
        rng = make_rng(rng)
    else:
        seed = None
    basis = list(basis)
    if not basis:
        raise FitError("empty monomial basis")
    samples = max(oversample * len(basis), 30)
    us = su2_sample(rng, (samples, n))
    elems = [us[:, i] for i in range(n)]
    target = np.asarray(fn(us))
    cache: dict = {}
    design = np.stack([m.evaluate(elems, cache) for m in basis], axis=1)
    # SU(2) traces are real; so are quasicharacters
    if np.abs(design.imag).max() > 1e-9 or np.abs(np.imag(target)).max() > 1e-9:
        raise FitError("unexpected imaginary parts in a real fit")
    a, b = design.real, np.real(target)
    scale = np.linalg.norm(a, axis=0)
    scale[scale == 0] = 1.0
    if resolve == "min-norm":
        # unscaled: the minimum-norm point of the exact solution set is rational
        coeffs, *_ = np.linalg.lstsq(a, b, rcond=None)
    elif resolve == "pivot":
        a_scaled = a / scale
        cols = _pivot_columns(a_scaled, 1e-8)
        sol, *_ = np.linalg.lstsq(a_scaled[:, cols], b, rcond=None)
        coeffs = np.zeros(len(basis))
        coeffs[cols] = sol / scale[cols]
    else:
        raise ValueError(f"unknown resolve mode {resolve!r}")
    residual_pre = float(np.abs(a @ coeffs - b).max())
    if residual_pre > residual_tol:
        raise FitError(f"least-squares residual {residual_pre:.3e} exceeds {residual_tol:.0e}; basis does not span")
    radical, rational = _reconstruct_all(coeffs, max_denominator)
    terms = {mono: q for mono, q in zip(basis, rational) if q != 0}
    poly = TracePolynomial(n, terms, radical)
    check = su2_sample(rng, (holdout, n))
    residual_post = float(np.abs(poly.evaluate(check) - np.asarray(fn(check))).max())
    if residual_post > residual_tol:
        raise FitError(f"held-out residual {residual_post:.3e} after rational reconstruction")
    poly.meta = {
        "samples": samples,
        "basis_size": len(basis),
        "residual_pre": residual_pre,
        "residual_post": residual_post,
        "holdout": holdout,
        "seed": seed,
        "resolve": resolve,
        "radical": radical,
    }
    return poly


def fit_trace_polynomial(
    qid: QuasicharId,
    rng: np.random.Generator | int | None = 0,
    monomials: Sequence[TraceMonomial] | None = None,
    mode: str = "generator",
    resolve: str = "min-norm",
    convention: str = "trace",
    oversample: int = 4,
    max_denominator: int = 10 ** 6,
    residual_tol: float = 1e-9,
    holdout: int = 50,
) -> TracePolynomial:
    """Exact rational trace polynomial of a quasicharacter (see ``fit_function``)."""
    caps = [s.twice for s in qid.leaf_spins]
    basis = list(monomials) if monomials is not None else monomial_basis(qid.n, caps, mode=mode)
    poly = fit_function(lambda us: quasichar_eval(qid, us, convention), qid.n, basis, rng, resolve,
                        oversample, max_denominator, residual_tol, holdout)
    poly.meta["convention"] = convention
    return poly


def canonical_form(poly: TracePolynomial, rng: np.random.Generator | int | None = 0) -> TracePolynomial:
    """Rewrite a polynomial in the generator basis, where the expansion of an invariant is unique."""
    basis = [m for d in _degree_boxes(poly) for m in monomial_basis(poly.n, list(d))]
    basis = sorted(set(basis), key=lambda m: (sum(len(w) for w in m.words), len(m.words), m.words))
    return fit_function(poly.evaluate, poly.n, basis, rng)


def _degree_boxes(poly: TracePolynomial) -> list[tuple[int, ...]]:
    """Distinct per-letter degree vectors of the terms (reduction never raises degree or changes parity)."""
    return sorted({tuple(m.degrees(poly.n)) for m in poly.terms}) or [(0,) * poly.n]
