"""Nested-interval construction of a rotation number hitting prescribed bins.

Given a_1 < a_2 < ... with a_{j+1}/a_j > 2Q and target bins p_j, the solver
finds r with r*a_j mod 1 in (p_j/Q, (p_j+1)/Q) for every j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .torus import ModOneInterval, bin_of, format_rational, interval_contains, mod_one


class RatioTooSmall(ValueError):
    def __init__(self, j: int, message: str = ""):
        self.j = j
        super().__init__(message or f"a[{j + 1}]/a[{j}] <= 2Q")


class Infeasible(RuntimeError):
    """No full cell fits; unreachable when the ratio hypothesis holds."""

    def __init__(self, j: int, message: str = ""):
        self.j = j
        super().__init__(message or f"no admissible cell for constraint {j}")


@dataclass(frozen=True)
class BinConstraint:
    a: int
    target: int

    def __post_init__(self):
        if self.a < 1:
            raise ValueError(f"a must be >= 1, got {self.a}")
        if self.target < 0:
            raise ValueError(f"target must be >= 0, got {self.target}")


@dataclass(frozen=True)
class FeasibleInterval:
    """Closed interval [lo, hi]; every r in its interior satisfies the constraints so far."""

    lo: Fraction
    hi: Fraction

    @property
    def center(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, other: "FeasibleInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


def check_ratios(constraints: Sequence[BinConstraint], Q: int) -> None:
    for j in range(len(constraints) - 1):
        a, b = constraints[j].a, constraints[j + 1].a
        if b <= 2 * Q * a:
            raise RatioTooSmall(j, f"constraint {j}: {b}/{a} <= 2Q = {2 * Q}")


def _cell(m: int, c: BinConstraint, Q: int) -> FeasibleInterval:
    return FeasibleInterval(Fraction(Q * m + c.target, Q * c.a),
                            Fraction(Q * m + c.target + 1, Q * c.a))


def _choose_cell(S: FeasibleInterval, c: BinConstraint, Q: int) -> Optional[int]:
    # cell m is [(Qm + p)/(Qa), (Qm + p + 1)/(Qa)]
    m_lo = math.ceil(S.lo * c.a - Fraction(c.target, Q))
    m_hi = math.floor(S.hi * c.a - Fraction(c.target + 1, Q))
    if m_lo > m_hi:
        return None
    # center of cell m is (m + (p + 1/2)/Q)/a; nearest to S.center, ties to smaller m
    ideal = S.center * c.a - Fraction(2 * c.target + 1, 2 * Q)
    best = None
    for m in {min(max(math.floor(ideal), m_lo), m_hi), min(max(math.ceil(ideal), m_lo), m_hi)}:
        key = (abs(m - ideal), m)
        if best is None or key < best[0]:
            best = (key, m)
    return best[1]


def solve_rotation(constraints: Sequence[BinConstraint], Q: int, *,
                   trace: Optional[list] = None,
                   history: Optional[list] = None) -> Fraction:
    """Return an exact r in (0, 1) whose multiples r*a_j fall in the target bins.

    Each step replaces the feasible interval S by the admissible closed cell
    of the next constraint whose center is nearest S's center; the answer is
    the midpoint of the last cell, which lies in the open interior of every
    cell chosen along the way. ``trace`` collects one text line per
    constraint, ``history`` the sequence of feasible intervals.
    """
    if Q < 2:
        raise ValueError("Q must be >= 2")
    for c in constraints:
        if c.target >= Q:
            raise ValueError(f"target {c.target} outside [0, {Q})")
    check_ratios(constraints, Q)
    S = FeasibleInterval(Fraction(0), Fraction(1))
    if history is not None:
        history.append(S)
    if not constraints:
        return Fraction(1, 2)
    for j, c in enumerate(constraints):
        m = _choose_cell(S, c, Q)
        if m is None:
            raise Infeasible(j, f"internal error: no cell of constraint {j} (a={c.a}) "
                                f"fits in [{S.lo}, {S.hi}] despite the ratio hypothesis")
        S = _cell(m, c, Q)
        if history is not None:
            history.append(S)
        if trace is not None:
            trace.append(f"{j} a={c.a} target={c.target} m={m} "
                         f"lo={format_rational(S.lo)} hi={format_rational(S.hi)}")
    r = S.center
    if not verify_rotation(r, constraints, Q):
        raise Infeasible(len(constraints) - 1, f"internal error: r={r} fails verification")
    return r


def verify_rotation(r, constraints: Sequence[BinConstraint], Q: int) -> bool:
    """True iff every r*a mod 1 lies strictly inside its target bin."""
    for c in constraints:
        if not 0 <= c.target < Q:
            return False
        v = mod_one(Fraction(r) * c.a)
        if bin_of(v, Q) != c.target:
            return False
        assert interval_contains(ModOneInterval.bin(c.target, Q), v)
    return True
