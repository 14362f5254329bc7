"""Rigorous enclosures of transcendental quantities via mpmath interval arithmetic.

Every decision that compares a transcendental value against an exact rational
goes through :func:`decide`, which evaluates an enclosure at increasing working
precision until the comparison is settled or the precision cap is reached.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

from mpmath import iv
from mpmath.libmp import to_rational

START_PRECISION = 64
PRECISION_CAP = 4096


class PrecisionExhausted(ArithmeticError):
    """The enclosure could not separate the quantities at the precision cap."""


Enclosure = Callable[[], "iv.mpf"]


def const(x: int | Fraction) -> "iv.mpf":
    """Exact rational as a (possibly non-degenerate) interval at the current precision."""
    x = Fraction(x)
    if x.denominator == 1:
        return iv.mpf(x.numerator)
    return iv.mpf(x.numerator) / iv.mpf(x.denominator)


def bounds(x: "iv.mpf") -> tuple[Fraction, Fraction]:
    lo, hi = x._mpi_
    (p, q), (r, s) = to_rational(lo), to_rational(hi)
    return Fraction(int(p), int(q)), Fraction(int(r), int(s))


def power(base: "iv.mpf", exponent: "iv.mpf") -> "iv.mpf":
    # base > 0 is required by every caller
    return iv.exp(exponent * iv.log(base))


def loglog(n: int | Fraction) -> "iv.mpf":
    return iv.log(iv.log(const(n)))


def refine(build: Enclosure, settled: Callable[[Fraction, Fraction], object],
           precision_cap: int = PRECISION_CAP, start: int = START_PRECISION):
    """Evaluate ``build`` at doubling precision until ``settled(lo, hi)`` is not None.

    ``build`` is called with ``iv.prec`` already set. Raises PrecisionExhausted
    once the cap has been tried without a decision.
    """
    prec = start
    saved = iv.prec
    try:
        while True:
            iv.prec = prec
            lo, hi = bounds(build())
            result = settled(lo, hi)
            if result is not None:
                return result
            if prec >= precision_cap:
                raise PrecisionExhausted(
                    f"undecided at {prec} bits: enclosure [{float(lo)!r}, {float(hi)!r}]")
            prec = min(2 * prec, precision_cap)
    finally:
        iv.prec = saved


def floor_of(build: Enclosure, precision_cap: int = PRECISION_CAP) -> int:
    """Exact floor of the enclosed value."""
    def settled(lo, hi):
        f = math.floor(lo)
        return f if math.floor(hi) == f else None
    return refine(build, settled, precision_cap)


def compare(build: Enclosure, x: int | Fraction, precision_cap: int = PRECISION_CAP) -> int:
    """Sign of (enclosed value - x); never 0, since ties cannot be certified."""
    x = Fraction(x)

    def settled(lo, hi):
        if lo > x:
            return 1
        if hi < x:
            return -1
        return None
    return refine(build, settled, precision_cap)


def sign(build: Enclosure, precision_cap: int = PRECISION_CAP) -> int:
    return compare(build, 0, precision_cap)


def approx(build: Enclosure, prec: int = 64) -> float:
    saved = iv.prec
    try:
        iv.prec = prec
        lo, hi = bounds(build())
    finally:
        iv.prec = saved
    return float((lo + hi) / 2)
