"""Exact arithmetic mod 1 on the unit interval and on the K-torus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Rational = Union[int, Fraction]


class DimensionMismatch(ValueError):
    pass


class _OnBoundary:
    """Marker returned by :func:`bin_of` when v*Q is an integer."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OnBoundary"

    def __bool__(self):
        return False


OnBoundary = _OnBoundary()


def mod_one(x: Rational) -> Fraction:
    x = Fraction(x)
    return x - math.floor(x)


def parse_rational(s: str) -> Fraction:
    """Inverse of :func:`format_rational`."""
    return Fraction(s.strip())


def format_rational(x: Rational) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class ModOneInterval:
    """Open interval (lo, hi) with 0 <= lo < hi <= 1."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        if not (0 <= lo < hi <= 1):
            raise ValueError(f"need 0 <= lo < hi <= 1, got ({lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def bin(cls, p: int, Q: int) -> "ModOneInterval":
        """Zero-indexed bin (p/Q, (p+1)/Q)."""
        if not 0 <= p < Q:
            raise ValueError(f"bin {p} outside [0, {Q})")
        return cls(Fraction(p, Q), Fraction(p + 1, Q))

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo


def interval_contains(interval: ModOneInterval, v: Rational) -> bool:
    return interval.lo < v < interval.hi


def bin_of(v: Rational, Q: int):
    """Index p with p/Q < v < (p+1)/Q, or OnBoundary if v*Q is an integer."""
    if Q < 2:
        raise ValueError("Q must be >= 2")
    scaled = mod_one(v) * Q
    if scaled.denominator == 1:
        return OnBoundary
    return math.floor(scaled)


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.coords) < 1:
            raise ValueError("a torus point needs at least one coordinate")
        object.__setattr__(self, "coords", tuple(mod_one(c) for c in self.coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __getitem__(self, k: int) -> Fraction:
        return self.coords[k]

    def __iter__(self):
        return iter(self.coords)


class RotationVector(TorusPoint):
    """Per-coordinate rotation numbers (r_1, ..., r_K)."""


def rotate(x: TorusPoint, r: RotationVector, a: int) -> TorusPoint:
    """x + a*r coordinatewise, mod 1."""
    if x.dim != r.dim:
        raise DimensionMismatch(f"point has dimension {x.dim}, rotation {r.dim}")
    return TorusPoint(tuple(xk + rk * a for xk, rk in zip(x.coords, r.coords)))
