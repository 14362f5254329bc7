"""Bernoulli random sequences with sigma_n = (log log log n)^(1-eta)/n and the
interval thinning that turns a draw into a sub-lacunary subsequence B.

Randomness is counter-based: index n is selected iff U(seed, n) < sigma_n,
where U(seed, n) = BLAKE2b-64(key=seed, msg=n) / 2^64, both encoded as 8-byte
little-endian integers. The comparison is exact: a double-precision filter
settles all but near-ties, which fall back to interval enclosures.
"""

from __future__ import annotations

import bisect
import functools
import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from mpmath import iv

from . import enclosure
from .enclosure import PRECISION_CAP, PrecisionExhausted  # noqa: F401
from .sequences import counting_function
from .torus import format_rational

DEFAULT_N_START = 16
U_BITS = 64
_FLOAT_MARGIN = 1e-9
_CHUNK = 1 << 16
_TWO_POW_MINUS_64 = 2.0 ** -64


class GridCoverageError(ValueError):
    pass


@dataclass(frozen=True)
class ProbabilityProfile:
    """sigma_n = min(1, max(0, (log log log n)^(1-eta) / n)) for n >= n_start, else 0.

    ``override`` replaces the formula by an exact rational sigma(n) (tests only).
    """

    eta: Fraction
    n_start: int = DEFAULT_N_START
    override: Optional[Callable[[int], Fraction]] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "eta", Fraction(self.eta))
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.override is None and self.n_start < DEFAULT_N_START:
            # log log log n is not positive below e^e
            raise ValueError(f"n_start must be >= {DEFAULT_N_START}")

    def numerator_enclosure(self, n: int):
        """Enclosure builder for (log log log n)^(1-eta)."""
        e = 1 - self.eta
        if e == 0:
            return lambda: iv.mpf(1)
        return lambda: enclosure.power(iv.log(enclosure.loglog(n)), enclosure.const(e))

    def _numerator_float(self, n: int) -> float:
        return math.log(math.log(math.log(n))) ** float(1 - self.eta)

    def sigma_float(self, n: int) -> float:
        """Approximate sigma_n, for reports only."""
        if n < self.n_start:
            return 0.0
        if self.override is not None:
            return float(self.override(n))
        return min(1.0, self._numerator_float(n) / n)

    def sigma_enclosure(self, n: int):
        if n < self.n_start:
            return lambda: iv.mpf(0)
        if self.override is not None:
            s = Fraction(self.override(n))
            return lambda: enclosure.const(min(Fraction(1), max(Fraction(0), s)))
        num = self.numerator_enclosure(n)
        return lambda: _clamp_to_one(num() / iv.mpf(n))

    def selects(self, n: int, u: int) -> bool:
        """Exactly decide u / 2^64 < sigma_n."""
        if n < self.n_start:
            return False
        if self.override is not None:
            return Fraction(u, 1 << U_BITS) < Fraction(self.override(n))
        # u/2^64 < min(1, s/n)  <=>  n*u/2^64 < s, since u/2^64 < 1
        s = self._numerator_float(n)
        xf = n * u * _TWO_POW_MINUS_64
        if abs(xf - s) > _FLOAT_MARGIN * max(1.0, s):
            return xf < s
        return enclosure.compare(self.numerator_enclosure(n), Fraction(n * u, 1 << U_BITS)) > 0


def _clamp_to_one(x):
    # x is positive here; only the upper clamp is needed
    lo, hi = enclosure.bounds(x)
    if hi <= 1:
        return x
    if lo >= 1:
        return iv.mpf(1)
    return iv.mpf([x.a, iv.mpf(1)])


def uniform_word(seed: int, n: int) -> int:
    """The 64-bit uniform integer attached to index n under ``seed``."""
    h = _keyed_hasher(seed).copy()
    h.update(n.to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


@functools.lru_cache(maxsize=64)
def _keyed_hasher(seed: int):
    return hashlib.blake2b(digest_size=8, key=(seed % (1 << 64)).to_bytes(8, "little"))


@dataclass(frozen=True)
class RandomDraw:
    seed: int
    profile: ProbabilityProfile
    t_max: int
    selected: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.selected)


def sample_sequence(profile: ProbabilityProfile, t_max: int, seed: int, *,
                    lo: Optional[int] = None) -> RandomDraw:
    """Include each n in [n_start, t_max] independently with probability sigma_n."""
    if t_max < profile.n_start:
        return RandomDraw(seed, profile, t_max, ())
    start = profile.n_start if lo is None else max(lo, profile.n_start)
    if profile.override is not None:
        chosen = [n for n in range(start, t_max + 1) if profile.selects(n, uniform_word(seed, n))]
        return RandomDraw(seed, profile, t_max, tuple(chosen))
    chosen = []
    for a in range(start, t_max + 1, _CHUNK):
        chosen.extend(_select_chunk(profile, seed, a, min(a + _CHUNK, t_max + 1)))
    return RandomDraw(seed, profile, t_max, tuple(chosen))


def _select_chunk(profile: ProbabilityProfile, seed: int, a: int, b: int) -> list:
    """Vectorized form of ``profile.selects`` over [a, b); near-ties go exact."""
    words = [uniform_word(seed, n) for n in range(a, b)]
    n = np.arange(a, b, dtype=np.float64)
    s = np.log(np.log(np.log(n))) ** float(1 - profile.eta)
    x = n * (np.array(words, dtype=np.float64) * _TWO_POW_MINUS_64)
    clear = np.abs(x - s) > _FLOAT_MARGIN * np.maximum(1.0, s)
    out = []
    for j in np.flatnonzero(~clear | (x < s)):
        k = a + int(j)
        if not clear[j]:
            if profile.selects(k, words[j]):
                out.append(k)
        else:
            out.append(k)
    return out


def merge_draws(parts: Sequence[RandomDraw]) -> RandomDraw:
    """Concatenate draws of adjacent index ranges (parallel sampling)."""
    first = parts[0]
    selected = tuple(sorted(n for p in parts for n in p.selected))
    return RandomDraw(first.seed, first.profile, max(p.t_max for p in parts), selected)


def expected_size(profile: ProbabilityProfile, t_max: int) -> tuple[float, float]:
    """(sum sigma_n, sum sigma_n (1 - sigma_n)) over [n_start, t_max], approximate."""
    mean = var = 0.0
    for n in range(profile.n_start, t_max + 1):
        s = profile.sigma_float(n)
        mean += s
        var += s * (1 - s)
    return mean, var


# ---------------------------------------------------------------- interval grid

def _threshold_exponent(eta: Fraction, m: int):
    """Builder for m * (log log m)^(-1 + eta/2)."""
    e = -1 + eta / 2
    if e == 0:
        return lambda: enclosure.const(m)
    return lambda: enclosure.const(m) * enclosure.power(enclosure.loglog(m), enclosure.const(e))


def threshold(eta: Fraction, m: int):
    """Enclosure builder for v_m = exp(m (log log m)^(-1 + eta/2))."""
    ex = _threshold_exponent(Fraction(eta), m)
    return lambda: iv.exp(ex())


def threshold_ratio(eta: Fraction, m_hi: int, m_lo: int):
    """Enclosure builder for v_{m_hi} / v_{m_lo}."""
    a, b = _threshold_exponent(Fraction(eta), m_hi), _threshold_exponent(Fraction(eta), m_lo)
    return lambda: iv.exp(a() - b())


def first_monotone_index(eta: Fraction, precision_cap: int = PRECISION_CAP) -> int:
    """Least m >= 3 from which v_m is strictly increasing.

    m (log log m)^(-c) with c = 1 - eta/2 has derivative of the sign of
    log m * log log m - c, which is increasing in m; so monotonicity starts at
    the first integer where that quantity is positive.
    """
    c = 1 - Fraction(eta) / 2
    if c <= 0:
        return 3
    m = 3
    while enclosure.compare(lambda: iv.log(enclosure.const(m)) * enclosure.loglog(m),
                            c, precision_cap) < 0:
        m += 1
    return m


@dataclass(frozen=True)
class IntervalGrid:
    """Integer intervals I_m = [v_m, v_{m+1}) for m = m0, ..., covering [starts[0], t_max].

    ``starts[j]`` is ceil(v_{m0 + j}); the last entry lies beyond t_max.
    """

    eta: Fraction
    t_max: int
    m0: int
    starts: tuple[int, ...]

    @property
    def first(self) -> int:
        return self.starts[0]

    @property
    def m_last(self) -> int:
        """Index of the last interval meeting [first, t_max]."""
        return self.m0 + len(self.starts) - 2

    def interval(self, m: int) -> tuple[int, int]:
        """Inclusive integer bounds of I_m."""
        j = m - self.m0
        if not 0 <= j < len(self.starts) - 1:
            raise IndexError(f"interval {m} not in grid")
        return self.starts[j], self.starts[j + 1] - 1

    def index_of(self, n: int) -> Optional[int]:
        """m with n in I_m, or None if n is below the grid or beyond t_max."""
        if n < self.first or n > self.t_max:
            return None
        return self.m0 + bisect.bisect_right(self.starts, n) - 1

    def fully_covered(self, m: int) -> bool:
        j = m - self.m0
        return 0 <= j < len(self.starts) - 1 and self.starts[j + 1] - 1 <= self.t_max


def build_interval_grid(eta, t_max: int, *,
                        precision_cap: int = PRECISION_CAP) -> IntervalGrid:
    """Exact integer boundaries ceil(v_m) from the first monotone index until past t_max."""
    eta = Fraction(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    m0 = first_monotone_index(eta, precision_cap)
    starts = []
    m = m0
    while True:
        # v_m is never an integer in practice; floor_of raises if it cannot tell
        starts.append(enclosure.floor_of(threshold(eta, m), precision_cap) + 1)
        if len(starts) >= 2 and starts[-1] <= starts[-2]:
            raise AssertionError(f"thresholds not increasing at m={m}")
        if starts[-1] > t_max:
            break
        m += 1
    if len(starts) < 2:
        raise ValueError(f"t_max={t_max} is below the first threshold {starts[0]}")
    return IntervalGrid(eta, t_max, m0, tuple(starts))


def stated_ratio_bound_holds(eta, m: int, precision_cap: int = PRECISION_CAP) -> bool:
    """Decide v_{m+1}/v_m >= exp(1/(log log m)^(1 - eta/2)) by enclosure."""
    eta = Fraction(eta)
    c = 1 - eta / 2
    ratio_exp = lambda: _threshold_exponent(eta, m + 1)() - _threshold_exponent(eta, m)()
    bound_exp = lambda: enclosure.power(enclosure.loglog(m), enclosure.const(-c))
    return enclosure.sign(lambda: ratio_exp() - bound_exp(), precision_cap) > 0


def interval_sigma_mass(profile: ProbabilityProfile, grid: IntervalGrid) -> dict:
    """Approximate sum of sigma_u over each fully covered I_m."""
    out = {}
    for m in range(grid.m0, grid.m_last + 1):
        if not grid.fully_covered(m):
            break
        lo, hi = grid.interval(m)
        out[m] = math.fsum(profile.sigma_float(u) for u in range(lo, hi + 1))
    return out


# ---------------------------------------------------------------- thinning

@dataclass(frozen=True)
class ThinningResult:
    B: tuple[int, ...]
    D: tuple[int, ...]
    E: tuple[int, ...]
    unresolved: tuple[int, ...]
    uncovered: tuple[int, ...]
    occupancy: dict

    def to_sections(self) -> dict:
        return {"B": list(self.B), "D": list(self.D), "E": list(self.E),
                "UNRESOLVED": list(self.unresolved), "UNCOVERED": list(self.uncovered)}


def thin(draw: RandomDraw, grid: IntervalGrid) -> ThinningResult:
    """Split a draw into E (shared interval), D (successor interval occupied) and B.

    An element lying in an interval with at least two draw elements goes to E.
    A lone element of I_m goes to D if I_{m+1} holds a draw element and to B if
    I_{m+1} is fully below the horizon and holds none; otherwise it cannot be
    classified from the draw and is reported as unresolved. Elements below the
    first threshold are reported as uncovered.
    """
    if Fraction(grid.eta) != draw.profile.eta:
        raise GridCoverageError(f"grid eta {grid.eta} differs from draw eta {draw.profile.eta}")
    if grid.t_max < draw.t_max:
        raise GridCoverageError(f"grid covers up to {grid.t_max}, draw up to {draw.t_max}")

    by_interval: dict[int, list[int]] = {}
    uncovered = []
    for n in draw.selected:
        m = grid.index_of(n)
        if m is None:
            uncovered.append(n)
        else:
            by_interval.setdefault(m, []).append(n)

    B, D, E, unresolved = [], [], [], []
    for m, members in by_interval.items():
        if len(members) > 1:
            E.extend(members)
        elif m + 1 in by_interval:
            D.extend(members)
        elif grid.fully_covered(m + 1):
            B.extend(members)
        else:
            unresolved.extend(members)
    B.sort()
    occupancy = {m: 0 for m in by_interval}
    for b in B:
        occupancy[grid.index_of(b)] += 1
    return ThinningResult(tuple(B), tuple(sorted(D)), tuple(sorted(E)),
                          tuple(sorted(unresolved)), tuple(uncovered), occupancy)


@dataclass
class ThinningReport:
    ok: bool
    violations: list = field(default_factory=list)
    pairs_checked: int = 0


def verify_thinning(result: ThinningResult, grid: IntervalGrid, eta=None, *,
                    precision_cap: int = PRECISION_CAP) -> ThinningReport:
    """Occupancy <= 1, gap rule, and b'/b > v_{m+2}/v_{m+1} for consecutive B elements."""
    eta = grid.eta if eta is None else Fraction(eta)
    violations = []
    occ: dict[int, int] = {}
    where = []
    for b in result.B:
        m = grid.index_of(b)
        if m is None:
            violations.append({"rule": "coverage", "element": b})
            continue
        occ[m] = occ.get(m, 0) + 1
        where.append((b, m))
    for m, count in sorted(occ.items()):
        if count > 1:
            violations.append({"rule": "occupancy", "interval": m, "count": count})
        if count >= 1 and occ.get(m + 1, 0) > 0:
            violations.append({"rule": "gap", "interval": m})
    pairs = 0
    for (b, m), (b2, m2) in zip(where, where[1:]):
        pairs += 1
        if m2 < m + 2:
            violations.append({"rule": "interval-gap", "pair": [b, b2], "intervals": [m, m2]})
            continue
        if enclosure.compare(threshold_ratio(eta, m + 2, m + 1), Fraction(b2, b),
                             precision_cap) >= 0:
            violations.append({"rule": "ratio", "pair": [b, b2], "intervals": [m, m2]})
    return ThinningReport(not violations, violations, pairs)


def density_report(draw: RandomDraw, result: ThinningResult, checkpoints: Sequence[int]) -> list:
    """Rows (t, A(t), B(t), B(t)/A(t)); the ratio is None when A(t) = 0."""
    rows = []
    for t in checkpoints:
        if t > draw.t_max:
            raise ValueError(f"checkpoint {t} beyond t_max={draw.t_max}")
        a = counting_function(draw.selected, t)
        b = counting_function(result.B, t)
        rows.append((t, a, b, Fraction(b, a) if a else None))
    return rows


def density_csv_rows(rows) -> list:
    out = [["t", "A_t", "B_t", "ratio_num", "ratio_den"]]
    for t, a, b, ratio in rows:
        if ratio is None:
            out.append([t, a, b, 0, 0])
        else:
            out.append([t, a, b, ratio.numerator, ratio.denominator])
    return out


# ---------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class SigmaDiagnostics:
    n: int
    partial_sum: tuple  # exact enclosure (lo, hi) of sum_{k <= n} sigma_k
    u_n: int
    comparator: Optional[float]  # exp(n (log log n)^(-1+eta)), approximate

    def to_dict(self) -> dict:
        return {"n": self.n, "partial_sum": [format_rational(x) for x in self.partial_sum],
                "partial_sum_approx": float((self.partial_sum[0] + self.partial_sum[1]) / 2),
                "u_n": self.u_n, "comparator_approx": self.comparator}


def _partial_sum(profile: ProbabilityProfile, t: int):
    total = iv.mpf(0)
    for k in range(profile.n_start, t + 1):
        total += profile.sigma_enclosure(k)()
    return total


def first_passage(profile: ProbabilityProfile, n: int, t_limit: int = 10 ** 6,
                  precision_cap: int = PRECISION_CAP) -> int:
    """u_n = min{t : sum_{k <= t} sigma_k >= n}, decided on enclosures."""
    prec = enclosure.START_PRECISION
    saved = iv.prec
    try:
        while True:
            iv.prec = prec
            total = iv.mpf(0)
            ambiguous = False
            for t in range(profile.n_start, t_limit + 1):
                total += profile.sigma_enclosure(t)()
                lo, hi = enclosure.bounds(total)
                if lo >= n:
                    return t
                if hi >= n:
                    ambiguous = True
                    break
            if not ambiguous:
                raise ValueError(f"partial sums stay below {n} up to t={t_limit}")
            if prec >= precision_cap:
                raise PrecisionExhausted(f"u_{n} undecided at {prec} bits")
            prec = min(2 * prec, precision_cap)
    finally:
        iv.prec = saved


def sigma_diagnostics(profile: ProbabilityProfile, n: int, t_limit: int = 10 ** 6,
                      precision_cap: int = PRECISION_CAP) -> SigmaDiagnostics:
    if n < 1:
        raise ValueError("n must be >= 1")
    saved = iv.prec
    try:
        iv.prec = 128
        ps = enclosure.bounds(_partial_sum(profile, n))
    finally:
        iv.prec = saved
    u = first_passage(profile, n, t_limit, precision_cap)
    comparator = None
    if n >= 3:
        try:
            comparator = math.exp(n * math.log(math.log(n)) ** float(-1 + profile.eta))
        except OverflowError:
            comparator = math.inf
    return SigmaDiagnostics(n, ps, u, comparator)
