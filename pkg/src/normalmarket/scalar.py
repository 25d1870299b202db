"""Exact scalars, polynomials and piecewise polynomials over the rationals."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from decimal import Decimal, localcontext, ROUND_DOWN
from fractions import Fraction
from typing import Iterable, Sequence, Union

Scalar = Fraction
ScalarLike = Union[int, str, Fraction, float]

INF = float("inf")


def to_scalar(value: ScalarLike) -> Fraction:
    """Parse an int, ``"p/q"`` string, decimal string or float exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value != value or value in (INF, -INF):
            raise ValueError(f"non-finite scalar {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise ValueError("empty scalar string")
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as a scalar")


def fmt(value: Fraction) -> str:
    """Render a rational as ``"p/q"`` (or ``"p"`` for integers)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def fmt_ext(value) -> str:
    """Like :func:`fmt` but also accepts the infinite sentinels."""
    if value == INF:
        return "inf"
    if value == -INF:
        return "-inf"
    return fmt(value)


def decimal_str(value: Fraction, digits: int = 20) -> str:
    """Truncated decimal rendering with ``digits`` significant digits."""
    value = Fraction(value)
    if value == 0:
        return "0"
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = ROUND_DOWN
        out = Decimal(value.numerator) / Decimal(value.denominator)
    text = format(out.normalize(), "f")
    return text


@dataclass(frozen=True)
class Poly:
    """Polynomial with rational coefficients, lowest degree first."""

    coeffs: tuple[Fraction, ...] = ()

    def __post_init__(self) -> None:
        cs = [Fraction(c) for c in self.coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    @staticmethod
    def const(c: ScalarLike) -> "Poly":
        return Poly((to_scalar(c),))

    @staticmethod
    def linear(c0: ScalarLike, c1: ScalarLike) -> "Poly":
        return Poly((to_scalar(c0), to_scalar(c1)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, k: int) -> Fraction:
        return self.coeffs[k] if k < len(self.coeffs) else Fraction(0)

    def __call__(self, x: Fraction) -> Fraction:
        out = Fraction(0)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def __add__(self, other: "Poly") -> "Poly":
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(tuple(self.coeff(k) + other.coeff(k) for k in range(n)))

    def __neg__(self) -> "Poly":
        return Poly(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: Union["Poly", Fraction, int]) -> "Poly":
        if not isinstance(other, Poly):
            k = Fraction(other)
            return Poly(tuple(c * k for c in self.coeffs))
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Poly(tuple(out))

    __rmul__ = __mul__

    def divmod(self, other: "Poly") -> tuple["Poly", "Poly"]:
        """Polynomial long division."""
        if other.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        rem = list(self.coeffs)
        quot = [Fraction(0)] * max(0, len(rem) - len(other.coeffs) + 1)
        lead = other.coeffs[-1]
        while len(rem) >= len(other.coeffs) and rem:
            shift = len(rem) - len(other.coeffs)
            factor = rem[-1] / lead
            quot[shift] = factor
            for k, c in enumerate(other.coeffs):
                rem[shift + k] -= factor * c
            rem.pop()
            while rem and rem[-1] == 0:
                rem.pop()
        return Poly(tuple(quot)), Poly(tuple(rem))

    def exact_div(self, other: "Poly") -> "Poly":
        quot, rem = self.divmod(other)
        if not rem.is_zero():
            raise NotImplementedError("rational (non-polynomial) quotient is not supported")
        return quot

    def roots_linear(self) -> list[Fraction]:
        """Roots of a polynomial of degree at most one."""
        if self.degree > 1:
            raise NotImplementedError("only linear root finding is supported")
        if self.degree == 1:
            return [-self.coeffs[0] / self.coeffs[1]]
        return []

    def shift(self, a: Fraction) -> "Poly":
        """Return x -> self(x + a)."""
        out = Poly()
        base = Poly.linear(a, 1)
        power = Poly.const(1)
        for c in self.coeffs:
            out = out + power * c
            power = power * base
        return out


def _as_poly(x: Union[Poly, ScalarLike]) -> Poly:
    return x if isinstance(x, Poly) else Poly.const(x)


@dataclass(frozen=True)
class PiecewisePoly:
    """Function on the real line given by polynomials between breakpoints.

    ``pieces[i]`` holds on the open interval between ``breaks[i-1]`` and
    ``breaks[i]`` (with the outer intervals unbounded) and ``at[i]`` is the
    exact value at ``breaks[i]``.
    """

    breaks: tuple[Fraction, ...]
    at: tuple[Fraction, ...]
    pieces: tuple[Poly, ...]

    def __post_init__(self) -> None:
        if len(self.pieces) != len(self.breaks) + 1 or len(self.at) != len(self.breaks):
            raise ValueError("inconsistent piecewise polynomial")
        if any(b >= c for b, c in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @staticmethod
    def constant(c: ScalarLike) -> "PiecewisePoly":
        return PiecewisePoly((), (), (Poly.const(c),))

    @staticmethod
    def step(b: ScalarLike, height: ScalarLike, closed: bool) -> "PiecewisePoly":
        """``height * 1{x >= b}`` when ``closed`` else ``height * 1{x > b}``."""
        h = to_scalar(height)
        return PiecewisePoly((to_scalar(b),), (h if closed else Fraction(0),), (Poly(), Poly.const(h)))

    @staticmethod
    def step_down(b: ScalarLike, height: ScalarLike, closed: bool) -> "PiecewisePoly":
        """``height * 1{x <= b}`` when ``closed`` else ``height * 1{x < b}``."""
        h = to_scalar(height)
        return PiecewisePoly((to_scalar(b),), (h if closed else Fraction(0),), (Poly.const(h), Poly()))

    @staticmethod
    def ramp(lo: ScalarLike, hi: ScalarLike, slope: ScalarLike) -> "PiecewisePoly":
        """Continuous ramp: 0 below ``lo``, slope*(x-lo) on [lo,hi], constant above."""
        lo, hi, k = to_scalar(lo), to_scalar(hi), to_scalar(slope)
        top = k * (hi - lo)
        return PiecewisePoly(
            (lo, hi), (Fraction(0), top), (Poly(), Poly.linear(-k * lo, k), Poly.const(top))
        )

    @staticmethod
    def ramp_down(lo: ScalarLike, hi: ScalarLike, slope: ScalarLike) -> "PiecewisePoly":
        """Continuous ramp: slope*(hi-lo) below ``lo``, slope*(hi-x) on [lo,hi], 0 above."""
        lo, hi, k = to_scalar(lo), to_scalar(hi), to_scalar(slope)
        top = k * (hi - lo)
        return PiecewisePoly(
            (lo, hi), (top, Fraction(0)), (Poly.const(top), Poly.linear(k * hi, -k), Poly())
        )

    def piece_index(self, x: Fraction) -> tuple[int, bool]:
        """Return (index, is_breakpoint) for ``x``."""
        i = bisect.bisect_left(self.breaks, x)
        if i < len(self.breaks) and self.breaks[i] == x:
            return i, True
        return i, False

    def __call__(self, x: Fraction) -> Fraction:
        i, on_break = self.piece_index(x)
        if on_break:
            return self.at[i]
        return self.pieces[i](x)

    def left_limit(self, x: Fraction) -> Fraction:
        i, _ = self.piece_index(x)
        return self.pieces[i](x)

    def right_limit(self, x: Fraction) -> Fraction:
        i, on_break = self.piece_index(x)
        return self.pieces[i + 1 if on_break else i](x)

    def refine(self, breaks: Iterable[Fraction]) -> "PiecewisePoly":
        """Same function expressed on a superset of breakpoints."""
        merged = tuple(sorted(set(self.breaks) | set(breaks)))
        at = tuple(self(b) for b in merged)
        pieces = []
        for i in range(len(merged) + 1):
            if i == 0:
                probe_piece = self.pieces[0] if not merged else self._piece_left_of(merged[0])
            else:
                probe_piece = self._piece_right_of(merged[i - 1])
            pieces.append(probe_piece)
        return PiecewisePoly(merged, at, tuple(pieces))

    def _piece_left_of(self, x: Fraction) -> Poly:
        i, _ = self.piece_index(x)
        return self.pieces[i]

    def _piece_right_of(self, x: Fraction) -> Poly:
        i, on_break = self.piece_index(x)
        return self.pieces[i + 1 if on_break else i]

    def _combine(self, other: "PiecewisePoly", op) -> "PiecewisePoly":
        merged = tuple(sorted(set(self.breaks) | set(other.breaks)))
        a, b = self.refine(merged), other.refine(merged)
        return PiecewisePoly(
            merged,
            tuple(op(x, y) for x, y in zip(a.at, b.at)),
            tuple(op(x, y) for x, y in zip(a.pieces, b.pieces)),
        )

    def __add__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return self._combine(other, lambda x, y: x + y)

    def __sub__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return self._combine(other, lambda x, y: x - y)

    def __mul__(self, other: Union["PiecewisePoly", Poly, Fraction, int]) -> "PiecewisePoly":
        if isinstance(other, PiecewisePoly):
            return self._combine(other, lambda x, y: x * y)
        if isinstance(other, Poly):
            return PiecewisePoly(
                self.breaks,
                tuple(v * other(b) for v, b in zip(self.at, self.breaks)),
                tuple(p * other for p in self.pieces),
            )
        k = Fraction(other)
        return PiecewisePoly(self.breaks, tuple(v * k for v in self.at), tuple(p * k for p in self.pieces))

    __rmul__ = __mul__

    def simplify(self) -> "PiecewisePoly":
        """Drop breakpoints where the function is a single polynomial across."""
        breaks, at, pieces = [], [], [self.pieces[0]]
        for i, b in enumerate(self.breaks):
            left, right = pieces[-1], self.pieces[i + 1]
            if left == right and left(b) == self.at[i]:
                continue
            breaks.append(b)
            at.append(self.at[i])
            pieces.append(right)
        return PiecewisePoly(tuple(breaks), tuple(at), tuple(pieces))


def sum_piecewise(parts: Sequence[PiecewisePoly]) -> PiecewisePoly:
    out = PiecewisePoly.constant(0)
    for p in parts:
        out = out + p
    return out
