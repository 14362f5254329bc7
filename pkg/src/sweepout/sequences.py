"""Integer sequences with prescribed ratio growth, and exact growth checks."""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from mpmath import iv

from . import enclosure
from .enclosure import PRECISION_CAP, PrecisionExhausted  # noqa: F401  (re-exported)


class IndexTooSmall(ValueError):
    pass


class UndefinedBound(ValueError):
    pass


class SequenceError(ValueError):
    """Terms violate positivity or strict monotonicity."""


@dataclass(frozen=True)
class IntegerSequence:
    terms: tuple[int, ...]
    start_index: int = 1

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(int(t) for t in self.terms))
        if self.start_index < 1:
            raise SequenceError(f"start_index must be >= 1, got {self.start_index}")
        if self.terms and self.terms[0] < 1:
            raise SequenceError(f"terms must be positive, got {self.terms[0]}")
        for i in range(len(self.terms) - 1):
            if self.terms[i + 1] <= self.terms[i]:
                raise SequenceError(
                    f"not strictly increasing at index {self.start_index + i}: "
                    f"{self.terms[i]} -> {self.terms[i + 1]}")

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def end_index(self) -> int:
        """Last valid absolute index."""
        return self.start_index + len(self.terms) - 1

    def indices(self) -> range:
        return range(self.start_index, self.end_index + 1)

    def term(self, n: int) -> int:
        if not self.start_index <= n <= self.end_index:
            raise IndexError(f"index {n} outside [{self.start_index}, {self.end_index}]")
        return self.terms[n - self.start_index]


class GrowthKind(enum.Enum):
    LOGLOG_DETERMINISTIC = "loglog"
    LOGLOG_WEIGHTED = "loglog-weighted"
    FIXED_RATIO = "fixed-ratio"
    LACUNARY = "lacunary"


@dataclass(frozen=True)
class GrowthSpec:
    """Lower bound on consecutive ratios term(n+1)/term(n), always enforced strictly.

    ``weights[i]`` is w(i + 1); only used by the weighted kind, whose bound is
    1 + 1/(log log G(n))^(1 - eta) with G the prefix sum of the weights.
    """

    kind: GrowthKind
    eta: Optional[Fraction] = None
    rho: Optional[Fraction] = None
    weights: Optional[Sequence[Fraction]] = None

    def __post_init__(self):
        if self.kind is GrowthKind.FIXED_RATIO:
            if self.rho is None or Fraction(self.rho) <= 1:
                raise ValueError("FixedRatio needs rho > 1")
            object.__setattr__(self, "rho", Fraction(self.rho))
        else:
            if self.eta is None or Fraction(self.eta) <= 0:
                raise ValueError(f"{self.kind.name} needs eta > 0")
            object.__setattr__(self, "eta", Fraction(self.eta))
        if self.kind is GrowthKind.LOGLOG_WEIGHTED and self.weights is None:
            raise ValueError("weighted growth needs a weight sequence")

    @classmethod
    def fixed_ratio(cls, rho) -> "GrowthSpec":
        return cls(GrowthKind.FIXED_RATIO, rho=Fraction(rho))

    @classmethod
    def lacunary(cls, eta) -> "GrowthSpec":
        return cls(GrowthKind.LACUNARY, eta=Fraction(eta))

    @classmethod
    def loglog(cls, eta) -> "GrowthSpec":
        return cls(GrowthKind.LOGLOG_DETERMINISTIC, eta=Fraction(eta))

    @classmethod
    def loglog_weighted(cls, eta, weights) -> "GrowthSpec":
        return cls(GrowthKind.LOGLOG_WEIGHTED, eta=Fraction(eta),
                   weights=tuple(Fraction(w) for w in weights))


@dataclass(frozen=True)
class GrowthReport:
    holds: bool
    first_violation: Optional[int] = None
    checked: int = 0
    skipped: tuple[int, ...] = field(default=())


def _loglog_exceeds(excess: Fraction, arg: Fraction, eta: Fraction,
                    precision_cap: int) -> bool:
    """Decide excess > (log log arg)^(eta - 1), given log log arg > 0."""
    if eta == 1:
        return excess > 1
    sgn = enclosure.compare(
        lambda: enclosure.power(enclosure.loglog(arg), enclosure.const(eta - 1)),
        excess, precision_cap)
    return sgn < 0


def _loglog_positive(arg: Fraction, precision_cap: int) -> bool:
    # log log x > 0  <=>  x > e
    return enclosure.compare(lambda: iv.e, arg, precision_cap) < 0


def verify_growth(seq: IntegerSequence, spec: GrowthSpec, *, strict_domain: bool = False,
                  precision_cap: int = PRECISION_CAP) -> GrowthReport:
    """Check term(n+1)/term(n) > bound(n) for every consecutive pair.

    Log-log bounds are only evaluated where log log of their argument is
    positive; other indices are skipped unless ``strict_domain`` is set, in
    which case UndefinedBound is raised. ``first_violation`` is the index n of
    the left term of the least failing pair.
    """
    if len(seq) == 0:
        raise ValueError("empty sequence")
    prefix: list[Fraction] = []
    if spec.kind is GrowthKind.LOGLOG_WEIGHTED:
        total = Fraction(0)
        for w in spec.weights[:seq.end_index]:
            total += w
            prefix.append(total)
        if len(prefix) < seq.end_index - 1:
            raise ValueError("weight sequence shorter than the sequence")

    checked = 0
    skipped = []
    for n in range(seq.start_index, seq.end_index):
        ratio = Fraction(seq.term(n + 1), seq.term(n))
        if spec.kind is GrowthKind.FIXED_RATIO:
            ok = ratio > spec.rho
        elif spec.kind is GrowthKind.LACUNARY:
            ok = ratio > 1 + spec.eta
        else:
            arg = Fraction(n) if spec.kind is GrowthKind.LOGLOG_DETERMINISTIC else prefix[n - 1]
            if not _loglog_positive(arg, precision_cap):
                if strict_domain:
                    raise UndefinedBound(f"log log undefined or non-positive at n={n}")
                skipped.append(n)
                continue
            ok = _loglog_exceeds(ratio - 1, arg, spec.eta, precision_cap)
        checked += 1
        if not ok:
            return GrowthReport(False, n, checked, tuple(skipped))
    return GrowthReport(True, None, checked, tuple(skipped))


def generate_paper_example(eta, n0: int, count: int, *,
                           precision_cap: int = PRECISION_CAP) -> IntegerSequence:
    """Terms floor(exp(n / (log log n)^(1 - eta))) for n = n0, ..., n0 + count - 1."""
    eta = Fraction(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if n0 < 3:
        raise IndexTooSmall(f"n0 must be >= 3 so that log log n0 > 0, got {n0}")
    if count < 1:
        raise ValueError("count must be >= 1")

    def build(n):
        if eta == 1:
            return lambda: iv.exp(enclosure.const(n))
        return lambda: iv.exp(enclosure.const(n) * enclosure.power(
            enclosure.loglog(n), enclosure.const(eta - 1)))

    terms = [enclosure.floor_of(build(n), precision_cap) for n in range(n0, n0 + count)]
    return IntegerSequence(tuple(terms), n0)


def generate_ratio_sequence(rho, a_start: int, count: int) -> IntegerSequence:
    """term(n+1) = floor(rho * term(n)) + 1, so each ratio strictly exceeds rho."""
    rho = Fraction(rho)
    if rho <= 1:
        raise ValueError("rho must be > 1")
    if a_start < 1 or count < 1:
        raise ValueError("a_start and count must be >= 1")
    terms = [a_start]
    for _ in range(count - 1):
        terms.append(int(rho * terms[-1]) + 1)
    return IntegerSequence(tuple(terms), 1)


def counting_function(seq: Iterable[int], t: int) -> int:
    """#{n : term(n) <= t} for a sorted sequence."""
    terms = seq.terms if isinstance(seq, IntegerSequence) else list(seq)
    return bisect.bisect_right(terms, t)


def write_sequence(seq: IntegerSequence, path) -> None:
    lines = [f"# start_index={seq.start_index}"] + [str(t) for t in seq.terms]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sequence(path) -> IntegerSequence:
    start = 1
    terms = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "start_index":
                start = int(value)
            continue
        terms.append(int(line))
    return IntegerSequence(tuple(terms), start)
