"""Exact arithmetic for half-integer spins and signed square roots of rationals.

Every Clebsch-Gordan coefficient and Racah symbol has the form sign * sqrt(p/q).
``SqrtRational`` stores such a number as the signed rational sign * value**2, so
products and quotients stay exact.  Sums of numbers whose radicands differ by a
non-square factor are not representable; ``SqrtSum`` keeps those exact as a
linear combination over independent square-root classes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

__all__ = [
    "ApproxReal",
    "ExactError",
    "HalfInt",
    "IncompatibleRadicandsError",
    "LabelError",
    "ParseError",
    "SqrtRational",
    "SqrtSum",
    "halfint",
    "halfint_parse",
    "sqrtrational_mul",
    "sqrtrational_to_approx",
]


class ExactError(ValueError):
    """Base class for validation errors raised by the exact layer."""


class ParseError(ExactError):
    pass


class LabelError(ExactError):
    """Inadmissible spin or magnetic label."""


class IncompatibleRadicandsError(ArithmeticError):
    """Raised when two SqrtRationals with unrelated radicands are added."""


# ---------------------------------------------------------------------------
# HalfInt


@dataclass(frozen=True, order=True, slots=True)
class HalfInt:
    """A spin or magnetic label stored as its twice-value (Dynkin label)."""

    twice: int

    @classmethod
    def of(cls, x: "HalfIntLike") -> "HalfInt":
        if isinstance(x, HalfInt):
            return x
        if isinstance(x, bool):
            raise LabelError(f"not a half-integer: {x!r}")
        if isinstance(x, int):
            return cls(2 * x)
        if isinstance(x, str):
            return halfint_parse(x, signed=True)
        if isinstance(x, Fraction):
            t = 2 * x
            if t.denominator != 1:
                raise LabelError(f"not a half-integer: {x}")
            return cls(int(t))
        if isinstance(x, float):
            t = 2 * x
            if not t.is_integer():
                raise LabelError(f"not a half-integer: {x}")
            return cls(int(t))
        raise LabelError(f"not a half-integer: {x!r}")

    @property
    def dim(self) -> int:
        return self.twice + 1

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def as_fraction(self) -> Fraction:
        return Fraction(self.twice, 2)

    def __float__(self) -> float:
        return self.twice / 2

    def __add__(self, other: "HalfIntLike") -> "HalfInt":
        return HalfInt(self.twice + HalfInt.of(other).twice)

    def __sub__(self, other: "HalfIntLike") -> "HalfInt":
        return HalfInt(self.twice - HalfInt.of(other).twice)

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.twice)

    def __str__(self) -> str:
        if self.twice % 2 == 0:
            return str(self.twice // 2)
        return f"{self.twice}/2"

    def __repr__(self) -> str:
        return f"HalfInt({self})"

    def to_json(self) -> dict:
        return {"spin": str(self), "dynkin": self.twice}


HalfIntLike = Union[HalfInt, int, float, Fraction, str]

_INT_RE = re.compile(r"^\s*([+-]?)(\d+)\s*$")
_HALF_RE = re.compile(r"^\s*([+-]?)(\d+)\s*/\s*2\s*$")
_DEC_RE = re.compile(r"^\s*([+-]?)(\d+)\.(0|5)0*\s*$")


def halfint_parse(text: str, signed: bool = False) -> HalfInt:
    """Parse "3/2", "2" or "1.5" into a HalfInt.

    Negative values are only accepted with ``signed=True`` (magnetic labels).
    """
    for pattern, kind in ((_INT_RE, "int"), (_HALF_RE, "half"), (_DEC_RE, "dec")):
        match = pattern.match(text)
        if not match:
            continue
        sign = -1 if match.group(1) == "-" else 1
        if kind == "int":
            twice = 2 * int(match.group(2))
        elif kind == "half":
            twice = int(match.group(2))
        else:
            twice = 2 * int(match.group(2)) + (1 if match.group(3) == "5" else 0)
        if sign < 0 and twice != 0 and not signed:
            raise ParseError(f"negative spin label: {text!r}")
        return HalfInt(sign * twice)
    raise ParseError(f"malformed half-integer: {text!r}")


def halfint(x: HalfIntLike) -> HalfInt:
    return HalfInt.of(x)


# ---------------------------------------------------------------------------
# SqrtRational


def _is_square_int(n: int) -> bool:
    if n < 0:
        return False
    r = math.isqrt(n)
    return r * r == n


def _sqrt_fraction(q: Fraction) -> Fraction | None:
    """Exact square root of a nonnegative rational, or None."""
    if q < 0:
        return None
    p, d = q.numerator, q.denominator
    if _is_square_int(p) and _is_square_int(d):
        return Fraction(math.isqrt(p), math.isqrt(d))
    return None


def _sqrt_to_float(q: Fraction) -> float:
    """Correctly rounded sqrt(q) for q >= 0 (single final rounding)."""
    if q == 0:
        return 0.0
    p, d = q.numerator, q.denominator
    shift = max(0, 140 - (p.bit_length() - d.bit_length()))
    shift += shift % 2
    root = math.isqrt((p << shift) // d)
    return float(Fraction(root, 1 << (shift // 2)))


RationalLike = Union[int, Fraction]


class SqrtRational:
    """The number sign * sqrt(radicand), stored as the signed rational ``sq``.

    ``sq = sign * value**2``; the radicand is ``abs(sq)``.  Instances are
    immutable.
    """

    __slots__ = ("sq",)

    def __init__(self, sq: RationalLike = 0):
        object.__setattr__(self, "sq", Fraction(sq))

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("SqrtRational is immutable")

    # construction -----------------------------------------------------------

    @classmethod
    def from_rational(cls, q: RationalLike) -> "SqrtRational":
        q = Fraction(q)
        return cls(q * abs(q))

    @classmethod
    def sqrt(cls, q: RationalLike, sign: int = 1) -> "SqrtRational":
        q = Fraction(q)
        if q < 0:
            raise ExactError(f"negative radicand {q}")
        if sign not in (-1, 0, 1):
            raise ExactError(f"bad sign {sign}")
        return cls(sign * q)

    @classmethod
    def from_parts(cls, sign: int, num: int, den: int) -> "SqrtRational":
        if den <= 0 or num < 0:
            raise ParseError(f"bad radicand {num}/{den}")
        if (sign == 0) != (num == 0):
            raise ParseError("sign must be 0 exactly when the radicand is 0")
        return cls.sqrt(Fraction(num, den), sign)

    # components -------------------------------------------------------------

    @property
    def sign(self) -> int:
        return (self.sq > 0) - (self.sq < 0)

    @property
    def radicand(self) -> Fraction:
        return abs(self.sq)

    def square(self) -> Fraction:
        return self.radicand

    def is_zero(self) -> bool:
        return self.sq == 0

    def rational(self) -> Fraction | None:
        """The value as a Fraction if it is rational, else None."""
        root = _sqrt_fraction(self.radicand)
        return None if root is None else self.sign * root

    def canonical(self) -> "SqrtRational":
        return self

    # arithmetic -------------------------------------------------------------

    def __mul__(self, other: "SqrtRational | RationalLike") -> "SqrtRational":
        if isinstance(other, (int, Fraction)):
            other = SqrtRational.from_rational(other)
        if not isinstance(other, SqrtRational):
            return NotImplemented
        return SqrtRational(self.sq * other.sq)

    __rmul__ = __mul__

    def __truediv__(self, other: "SqrtRational | RationalLike") -> "SqrtRational":
        if isinstance(other, (int, Fraction)):
            other = SqrtRational.from_rational(other)
        if not isinstance(other, SqrtRational):
            return NotImplemented
        if other.sq == 0:
            raise ZeroDivisionError("division by exact zero")
        return SqrtRational(self.sq / other.sq)

    def __rtruediv__(self, other: RationalLike) -> "SqrtRational":
        return SqrtRational.from_rational(other) / self

    def __neg__(self) -> "SqrtRational":
        return SqrtRational(-self.sq)

    def __pos__(self) -> "SqrtRational":
        return self

    def __abs__(self) -> "SqrtRational":
        return SqrtRational(abs(self.sq))

    def __pow__(self, n: int) -> "SqrtRational":
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return SqrtRational(1) / (self ** (-n))
        result = SqrtRational(1)
        for _ in range(n):
            result = result * self
        return result

    def compatible(self, other: "SqrtRational") -> bool:
        """True when self + other is again a SqrtRational."""
        if self.sq == 0 or other.sq == 0:
            return True
        return _sqrt_fraction(self.radicand / other.radicand) is not None

    def __add__(self, other: "SqrtRational | RationalLike") -> "SqrtRational":
        if isinstance(other, (int, Fraction)):
            other = SqrtRational.from_rational(other)
        if not isinstance(other, SqrtRational):
            return NotImplemented
        if self.sq == 0:
            return other
        if other.sq == 0:
            return self
        ratio = _sqrt_fraction(other.radicand / self.radicand)
        if ratio is None:
            raise IncompatibleRadicandsError(
                f"{self} + {other} is not a signed square root of a rational"
            )
        factor = self.sign + other.sign * ratio
        sign = (factor > 0) - (factor < 0)
        return SqrtRational.sqrt(factor * factor * self.radicand, sign)

    __radd__ = __add__

    def __sub__(self, other: "SqrtRational | RationalLike") -> "SqrtRational":
        if isinstance(other, (int, Fraction)):
            other = SqrtRational.from_rational(other)
        return self + (-other)

    def __rsub__(self, other: RationalLike) -> "SqrtRational":
        return SqrtRational.from_rational(other) - self

    def add_approx(self, other: "SqrtRational") -> "ApproxReal":
        """Opt-in inexact sum for incompatible radicands."""
        return ApproxReal(float(self) + float(other))

    # comparison -------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SqrtRational):
            return self.sq == other.sq
        if isinstance(other, (int, Fraction)):
            return self.sq == Fraction(other) * abs(Fraction(other))
        if isinstance(other, SqrtSum):
            return other == self
        return NotImplemented

    def __hash__(self) -> int:
        return hash(("SqrtRational", self.sq))

    def __lt__(self, other: "SqrtRational | RationalLike") -> bool:
        if isinstance(other, (int, Fraction)):
            other = SqrtRational.from_rational(other)
        return self.sq < other.sq

    def __le__(self, other: "SqrtRational | RationalLike") -> bool:
        if isinstance(other, (int, Fraction)):
            other = SqrtRational.from_rational(other)
        return self.sq <= other.sq

    def __gt__(self, other: "SqrtRational | RationalLike") -> bool:
        if isinstance(other, (int, Fraction)):
            other = SqrtRational.from_rational(other)
        return self.sq > other.sq

    def __ge__(self, other: "SqrtRational | RationalLike") -> bool:
        if isinstance(other, (int, Fraction)):
            other = SqrtRational.from_rational(other)
        return self.sq >= other.sq

    def __bool__(self) -> bool:
        return self.sq != 0

    # conversion -------------------------------------------------------------

    def __float__(self) -> float:
        return self.sign * _sqrt_to_float(self.radicand)

    def to_approx(self) -> "ApproxReal":
        return ApproxReal(float(self))

    def __str__(self) -> str:
        if self.sq == 0:
            return "0"
        r = self.radicand
        body = f"sqrt({r.numerator}/{r.denominator})"
        return body if self.sign > 0 else "-" + body

    def __repr__(self) -> str:
        return f"SqrtRational({self})"

    def to_json(self) -> dict:
        r = self.radicand
        return {"sign": self.sign, "num": r.numerator, "den": r.denominator}

    @classmethod
    def from_json(cls, data: dict) -> "SqrtRational":
        return cls.from_parts(int(data["sign"]), int(data["num"]), int(data["den"]))

    @classmethod
    def parse(cls, text: str) -> "SqrtRational":
        """Parse "sqrt(p/q)", "-sqrt(p/q)", "s*sqrt(p/q)" or a plain rational."""
        s = text.replace(" ", "")
        m = re.fullmatch(r"([+-]?1\*|[+-]|0\*)?sqrt\((\d+)(?:/(\d+))?\)", s)
        if m:
            prefix = m.group(1) or ""
            sign = -1 if prefix.startswith("-") else (0 if prefix == "0*" else 1)
            num = int(m.group(2))
            den = int(m.group(3) or 1)
            if num == 0:
                sign = 0
            return cls.from_parts(sign, num, den)
        try:
            return cls.from_rational(Fraction(s))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"malformed SqrtRational: {text!r}") from exc

    def simplified(self) -> tuple[Fraction, int]:
        """Return (c, n) with value = c * sqrt(n) and n squarefree (display only)."""
        if self.sq == 0:
            return Fraction(0), 1
        r = self.radicand
        # sqrt(p/q) = sqrt(p*q)/q
        a, n = _split_square(r.numerator * r.denominator)
        return Fraction(self.sign * a, r.denominator), n

    def pretty(self) -> str:
        c, n = self.simplified()
        if n == 1:
            return str(c)
        head = "" if c == 1 else "-" if c == -1 else f"{c}*"
        return f"{head}sqrt({n})"


def _split_square(n: int) -> tuple[int, int]:
    """n = a**2 * b with b squarefree (trial division, display use only)."""
    a, b = 1, 1
    p = 2
    while p * p <= n and p < 100_000:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        a *= p ** (e // 2)
        if e % 2:
            b *= p
        p += 1 if p == 2 else 2
    if n > 1:
        if _is_square_int(n):
            a *= math.isqrt(n)
        else:
            b *= n
    return a, b


def sqrtrational_mul(a: SqrtRational, b: SqrtRational) -> SqrtRational:
    return a * b


def sqrtrational_to_approx(a: SqrtRational) -> "ApproxReal":
    return a.to_approx()


# ---------------------------------------------------------------------------
# SqrtSum


class SqrtSum:
    """Exact finite sum of SqrtRationals, grouped by square-root class.

    Square roots of rationals from pairwise incompatible classes are linearly
    independent over Q, so equality and zero tests are exact.
    """

    __slots__ = ("_terms",)

    def __init__(self, items: Iterable["SqrtRational | SqrtSum | RationalLike"] = ()):
        # radicand representative -> rational coefficient of its square root
        self._terms: dict[Fraction, Fraction] = {}
        for item in items:
            self._iadd(item)

    def _add_term(self, coeff: Fraction, rad: Fraction) -> None:
        if coeff == 0 or rad == 0:
            return
        for key in self._terms:
            ratio = _sqrt_fraction(rad / key)
            if ratio is not None:
                value = self._terms[key] + coeff * ratio
                if value == 0:
                    del self._terms[key]
                else:
                    self._terms[key] = value
                return
        self._terms[rad] = coeff

    def _iadd(self, item: "SqrtRational | SqrtSum | RationalLike") -> "SqrtSum":
        if isinstance(item, SqrtSum):
            for rad, coeff in item._terms.items():
                self._add_term(coeff, rad)
        elif isinstance(item, SqrtRational):
            self._add_term(Fraction(item.sign), item.radicand)
        elif isinstance(item, (int, Fraction)):
            self._add_term(Fraction(item), Fraction(1))
        else:
            raise TypeError(f"cannot add {type(item).__name__} to SqrtSum")
        return self

    def copy(self) -> "SqrtSum":
        out = SqrtSum()
        out._terms = dict(self._terms)
        return out

    def __iadd__(self, item: "SqrtRational | SqrtSum | RationalLike") -> "SqrtSum":
        return self._iadd(item)

    def __add__(self, item: "SqrtRational | SqrtSum | RationalLike") -> "SqrtSum":
        return self.copy()._iadd(item)

    __radd__ = __add__

    def __neg__(self) -> "SqrtSum":
        out = SqrtSum()
        out._terms = {k: -v for k, v in self._terms.items()}
        return out

    def __sub__(self, item: "SqrtRational | SqrtSum | RationalLike") -> "SqrtSum":
        if isinstance(item, SqrtSum):
            return self + (-item)
        if isinstance(item, SqrtRational):
            return self + (-item)
        return self + (-Fraction(item))

    def __mul__(self, other: "SqrtRational | SqrtSum | RationalLike") -> "SqrtSum":
        out = SqrtSum()
        if isinstance(other, (int, Fraction)):
            out._terms = {k: v * other for k, v in self._terms.items() if v * other != 0}
            return out
        if isinstance(other, SqrtRational):
            other = SqrtSum([other])
        if not isinstance(other, SqrtSum):
            return NotImplemented
        for r1, c1 in self._terms.items():
            for r2, c2 in other._terms.items():
                out._add_term(c1 * c2, r1 * r2)
        return out

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (SqrtSum, SqrtRational, int, Fraction)):
            return (self - other).is_zero()
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def terms(self) -> list[tuple[Fraction, Fraction]]:
        """(coefficient, radicand) pairs: value = sum of c * sqrt(r)."""
        return [(c, r) for r, c in self._terms.items()]

    def is_sqrt_rational(self) -> bool:
        return len(self._terms) <= 1

    def to_sqrt_rational(self) -> SqrtRational:
        if not self._terms:
            return SqrtRational(0)
        if len(self._terms) > 1:
            raise IncompatibleRadicandsError(f"{self} has {len(self._terms)} radical classes")
        (rad, coeff), = self._terms.items()
        return SqrtRational.sqrt(coeff * coeff * rad, 1 if coeff > 0 else -1)

    def simplify(self) -> "SqrtRational | SqrtSum":
        return self.to_sqrt_rational() if self.is_sqrt_rational() else self

    def __float__(self) -> float:
        return math.fsum(float(c) * _sqrt_to_float(r) for r, c in self._terms.items())

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = [str(SqrtRational.sqrt(c * c * r, 1 if c > 0 else -1)) for r, c in self._terms.items()]
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"SqrtSum({self})"

    def to_json(self) -> list[dict]:
        return [
            SqrtRational.sqrt(c * c * r, 1 if c > 0 else -1).to_json()
            for r, c in sorted(self._terms.items())
        ]


# ---------------------------------------------------------------------------
# ApproxReal


@dataclass(frozen=True, slots=True)
class ApproxReal:
    """A finite binary64 value; NaN or infinity never escapes."""

    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ArithmeticError(f"non-finite value {self.value}")

    def _lift(self, other: object) -> float:
        if isinstance(other, ApproxReal):
            return other.value
        if isinstance(other, (int, float, Fraction, SqrtRational, SqrtSum)):
            return float(other)
        raise TypeError(f"unsupported operand {type(other).__name__}")

    def __add__(self, other: object) -> "ApproxReal":
        return ApproxReal(self.value + self._lift(other))

    __radd__ = __add__

    def __sub__(self, other: object) -> "ApproxReal":
        return ApproxReal(self.value - self._lift(other))

    def __mul__(self, other: object) -> "ApproxReal":
        return ApproxReal(self.value * self._lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> "ApproxReal":
        d = self._lift(other)
        if d == 0:
            raise ZeroDivisionError("division by zero")
        return ApproxReal(self.value / d)

    def __neg__(self) -> "ApproxReal":
        return ApproxReal(-self.value)

    def __float__(self) -> float:
        return self.value
