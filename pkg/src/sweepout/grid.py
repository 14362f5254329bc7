"""Torus grid construction: every point of T^K has a block whose orbit average
over a small union of coordinate slabs equals 1.

Cubes and bins are zero-indexed: cube q = (q(1), ..., q(K)) is the product of
the open bins (q(k)/Q, (q(k)+1)/Q), and coordinate k of cube q is matched with
the target bin (Q - q(k)) mod Q, so that x_k + r_k*a_n lands in (0, 2/Q).
"""

from __future__ import annotations

import enum
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

from mpmath import iv

from . import enclosure
from .enclosure import PRECISION_CAP
from .rotation import BinConstraint, RatioTooSmall, solve_rotation, verify_rotation
from .sequences import IntegerSequence
from .torus import (DimensionMismatch, RotationVector, TorusPoint, bin_of,
                    format_rational, mod_one, rotate)

MAX_PLANNED_Q = 10 ** 6
SAMPLE_DENOMINATOR = 2 ** 32
ENUMERATION_TAG = "mixed-radix-le"


class InfeasibleParameters(ValueError):
    pass


class NotEnoughIndices(ValueError):
    pass


class EmptyBlock(ValueError):
    pass


class ThresholdOutOfRange(ValueError):
    pass


class CoordinateRatioTooSmall(RatioTooSmall):
    """Ratio hypothesis fails inside the residue class of coordinate k (1-based)."""

    def __init__(self, k: int, n: int, a: int, b: int, Q: int):
        self.k, self.n = k, n
        super().__init__(n, f"coordinate {k}: a[{n}]={a}, next in class {b}, "
                            f"ratio <= 2Q = {2 * Q}")


class Mode(enum.Enum):
    DEMO = "demo"
    FULL = "full"


@dataclass(frozen=True)
class GridParameters:
    eta: Fraction
    epsilon: Fraction
    C: Fraction
    Q: int
    K: int
    mode: Mode = Mode.DEMO
    block_length: int = 0
    N1: int = 0

    @property
    def n_cubes(self) -> int:
        return self.Q ** self.K

    @property
    def threshold(self) -> Fraction:
        """min(epsilon, 1/C), the bound 2K/Q must stay strictly below."""
        return min(self.epsilon, 1 / self.C)

    @property
    def log2_N(self) -> int:
        """The bookkeeping horizon N = 2^(Q^K), kept as its exponent."""
        return self.n_cubes

    def to_dict(self) -> dict:
        return {"eta": format_rational(self.eta), "epsilon": format_rational(self.epsilon),
                "C": format_rational(self.C), "Q": self.Q, "K": self.K,
                "mode": self.mode.value, "block_length": self.block_length, "N1": self.N1,
                "N": {"base": 2, "exponent": {"Q": self.Q, "K": self.K}}}


def _min_K_full(Q: int, eta: Fraction, precision_cap: int) -> int:
    """Least integer K > (log Q)^(2/eta)."""
    bound = enclosure.floor_of(
        lambda: enclosure.power(iv.log(enclosure.const(Q)), enclosure.const(2 / eta)),
        precision_cap)
    # floor(b) + 1 > b always; an integer value of b would also need +1
    return bound + 1


def _K_ok_full(K: int, Q: int, eta: Fraction, precision_cap: int) -> bool:
    return enclosure.compare(
        lambda: enclosure.power(iv.log(enclosure.const(Q)), enclosure.const(2 / eta)),
        K, precision_cap) < 0


def plan_parameters(eta, epsilon, C, mode: Union[Mode, str] = Mode.DEMO, *,
                    Q: Optional[int] = None, K: Optional[int] = None,
                    block_length: Optional[int] = None, N1: int = 0,
                    precision_cap: int = PRECISION_CAP) -> GridParameters:
    """Validate or choose (Q, K) so that 2K/Q < min(epsilon, 1/C).

    Demo mode takes Q and K as given. Full mode also requires K > (log Q)^(2/eta):
    starting from Q (default 3) it picks the least such K and increases Q until
    the measure constraint holds, or checks a caller-supplied K.
    """
    eta, epsilon, C = Fraction(eta), Fraction(epsilon), Fraction(C)
    mode = Mode(mode)
    if eta <= 0 or not 0 < epsilon < 1 or C < 1:
        raise InfeasibleParameters("need eta > 0, 0 < epsilon < 1, C >= 1")
    limit = min(epsilon, 1 / C)

    if mode is Mode.DEMO:
        if Q is None or K is None:
            raise InfeasibleParameters("demo mode needs explicit Q and K")
        if Q < 3 or K < 1:
            raise InfeasibleParameters(f"need Q >= 3 and K >= 1, got Q={Q}, K={K}")
        if not Fraction(2 * K, Q) < limit:
            raise InfeasibleParameters(
                f"2K/Q = {Fraction(2 * K, Q)} is not < min(epsilon, 1/C) = {limit}")
        L = K if block_length is None else block_length
        if L < K:
            raise InfeasibleParameters(f"block_length {L} < K = {K}")
        return GridParameters(eta, epsilon, C, Q, K, mode, L, N1)

    if N1 < 0:
        raise InfeasibleParameters("N1 must be >= 0")
    if K is not None:
        if Q is None:
            raise InfeasibleParameters("full mode with fixed K also needs Q")
        if not _K_ok_full(K, Q, eta, precision_cap):
            raise InfeasibleParameters(f"K={K} does not exceed (log {Q})^(2/eta)")
        if not Fraction(2 * K, Q) < limit:
            raise InfeasibleParameters(f"2K/Q = {Fraction(2 * K, Q)} is not < {limit}")
        return GridParameters(eta, epsilon, C, Q, K, mode, 0, N1)

    q = max(3, Q or 3)
    while q <= MAX_PLANNED_Q:
        k = _min_K_full(q, eta, precision_cap)
        if Fraction(2 * k, q) < limit:
            return GridParameters(eta, epsilon, C, q, k, mode, 0, N1)
        # K is nondecreasing in Q, so any feasible Q must exceed 2k/limit
        q = max(q + 1, math.floor(2 * k / limit) + 1)
    raise InfeasibleParameters(f"no Q <= {MAX_PLANNED_Q} satisfies the constraints")


@dataclass(frozen=True)
class Block:
    """Inclusive index interval [lo, hi]."""

    lo: int
    hi: int

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))

    def __len__(self) -> int:
        return max(0, self.hi - self.lo + 1)

    def __contains__(self, n) -> bool:
        return self.lo <= n <= self.hi


@dataclass(frozen=True)
class IndexPartition:
    N_total: int
    K: int
    blocks: tuple[Block, ...]

    def residue_class(self, k: int) -> range:
        """Indices n <= N_total with n = k (mod K), k in 1..K."""
        if not 1 <= k <= self.K:
            raise ValueError(f"k={k} outside [1, {self.K}]")
        return range(k, self.N_total + 1, self.K)

    @property
    def residue_classes(self) -> dict:
        return {k: self.residue_class(k) for k in range(1, self.K + 1)}

    def coordinate_of(self, n: int) -> int:
        """1-based k with n in the k-th residue class."""
        return (n - 1) % self.K + 1


def partition_indices(params: GridParameters, N_total: int) -> IndexPartition:
    K, n_blocks = params.K, params.n_cubes
    if params.mode is Mode.DEMO:
        L = params.block_length
        if L < K:
            raise NotEnoughIndices(f"block length {L} cannot meet all {K} residue classes")
        if N_total < n_blocks * L:
            raise NotEnoughIndices(f"need {n_blocks} * {L} = {n_blocks * L} indices, have {N_total}")
        blocks = tuple(Block(i * L + 1, (i + 1) * L) for i in range(n_blocks))
    else:
        top = params.N1 + n_blocks + 1
        if N_total < 1 or N_total.bit_length() - 1 < top:
            raise NotEnoughIndices(f"dyadic blocks need N_total >= 2^{top}")
        if 2 ** (params.N1 + 1) < K:
            raise NotEnoughIndices("first dyadic block shorter than K")
        blocks = tuple(Block(2 ** (params.N1 + i) + 1, 2 ** (params.N1 + i + 1))
                       for i in range(1, n_blocks + 1))
    return IndexPartition(N_total, K, blocks)


def cube_vector(i: int, Q: int, K: int) -> tuple[int, ...]:
    """Zero-based cube index -> q vector, coordinate 1 fastest."""
    return tuple((i // Q ** k) % Q for k in range(K))


def cube_index(q: Sequence[int], Q: int) -> int:
    return sum(qk * Q ** k for k, qk in enumerate(q))


def target_bin(qk: int, Q: int) -> int:
    return (Q - qk) % Q


@dataclass(frozen=True)
class CubeAssignment:
    Q: int
    K: int
    constraints: tuple[tuple[BinConstraint, ...], ...]
    constraint_indices: tuple[tuple[int, ...], ...]

    def q_vector(self, i: int) -> tuple[int, ...]:
        return cube_vector(i, self.Q, self.K)

    def targets(self, i: int) -> tuple[int, ...]:
        return tuple(target_bin(qk, self.Q) for qk in self.q_vector(i))


def assign_targets(partition: IndexPartition, params: GridParameters,
                   seq: IntegerSequence) -> CubeAssignment:
    """Per coordinate k, the list of (a_n, target) for n in each J_i of class k."""
    Q, K = params.Q, params.K
    per_k: list[list[BinConstraint]] = [[] for _ in range(K)]
    per_k_n: list[list[int]] = [[] for _ in range(K)]
    for i, J in enumerate(partition.blocks):
        targets = [target_bin(qk, Q) for qk in cube_vector(i, Q, K)]
        for n in J:
            k = partition.coordinate_of(n) - 1
            per_k[k].append(BinConstraint(seq.term(n), targets[k]))
            per_k_n[k].append(n)
    return CubeAssignment(Q, K, tuple(map(tuple, per_k)), tuple(map(tuple, per_k_n)))


def solve_all_rotations(seq: IntegerSequence, assignment: CubeAssignment,
                        params: GridParameters, *, threads: int = 1) -> RotationVector:
    Q = params.Q

    def solve(k: int) -> Fraction:
        cons = assignment.constraints[k]
        idx = assignment.constraint_indices[k]
        for j in range(len(cons) - 1):
            if cons[j + 1].a <= 2 * Q * cons[j].a:
                raise CoordinateRatioTooSmall(k + 1, idx[j], cons[j].a, cons[j + 1].a, Q)
        return solve_rotation(cons, Q)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            coords = list(pool.map(solve, range(params.K)))
    else:
        coords = [solve(k) for k in range(params.K)]
    r = RotationVector(tuple(coords))
    for k in range(params.K):
        assert verify_rotation(r[k], assignment.constraints[k], Q)
    return r


@dataclass(frozen=True)
class BadSet:
    """Union over k of the slabs {x : 0 < x_k < 2/Q}."""

    K: int
    Q: int

    @property
    def slab_width(self) -> Fraction:
        return Fraction(2, self.Q)

    @property
    def measure(self) -> Fraction:
        return bad_set_measure(self.K, self.Q)

    def __contains__(self, x: TorusPoint) -> bool:
        return in_bad_set(x, self)


def bad_set_measure(K: int, Q: int) -> Fraction:
    if Q < 3 or K < 1:
        raise ValueError("need Q >= 3 and K >= 1")
    m = 1 - (1 - Fraction(2, Q)) ** K
    assert m <= Fraction(2 * K, Q)
    return m


def in_bad_set(x: TorusPoint, bad: BadSet) -> bool:
    if x.dim != bad.K:
        raise DimensionMismatch(f"point has dimension {x.dim}, bad set {bad.K}")
    w = bad.slab_width
    return any(0 < xk < w for xk in x.coords)


def _indices(J) -> list:
    idx = list(J)
    if not idx:
        raise EmptyBlock("empty index set")
    return idx


def _hits(x, idx, seq, r, bad) -> list:
    return [in_bad_set(rotate(x, r, seq.term(n)), bad) for n in idx]


def block_average(x: TorusPoint, J, seq: IntegerSequence, r: RotationVector,
                  bad: BadSet) -> Fraction:
    """Fraction of n in J with T^{a_n} x in the bad set."""
    idx = _indices(J)
    return Fraction(sum(_hits(x, idx, seq, r, bad)), len(idx))


WeightLike = Union[Callable[[int], Fraction], Sequence[Fraction]]


def _weight_fn(w: WeightLike) -> Callable[[int], Fraction]:
    if callable(w):
        return lambda n: Fraction(w(n))
    return lambda n: Fraction(w[n - 1])


def weighted_average(x: TorusPoint, J, w: WeightLike, seq: IntegerSequence,
                     r: RotationVector, bad: BadSet) -> Fraction:
    idx = _indices(J)
    wf = _weight_fn(w)
    weights = [wf(n) for n in idx]
    total = sum(weights)
    if total <= 0:
        raise ValueError("weights must be positive")
    hit = sum(wn for wn, h in zip(weights, _hits(x, idx, seq, r, bad)) if h)
    return Fraction(hit) / total


def prefix_sums(w: WeightLike, N_total: int) -> list:
    """G(0), G(1), ..., G(N_total) with G(n) = w(1) + ... + w(n)."""
    wf = _weight_fn(w)
    G = [Fraction(0)]
    for n in range(1, N_total + 1):
        wn = wf(n)
        if not 0 < wn <= 1:
            raise ValueError(f"weight w({n}) = {wn} outside (0, 1]")
        G.append(G[-1] + wn)
    return G


def g_inverse(G: Sequence[Fraction], y) -> int:
    """min{n >= 1 : G(n) >= y} over the supplied prefix sums."""
    import bisect
    n = bisect.bisect_left(G, Fraction(y), lo=1)
    if n >= len(G):
        raise ThresholdOutOfRange(f"G never reaches {y} within {len(G) - 1} terms")
    return n


def weighted_block_intervals(w: WeightLike, N1: int, count: int, N_total: int) -> list:
    """Blocks (G^-1(2^(N1+i)), G^-1(2^(N1+i+1))], i = 1..count, as inclusive Blocks."""
    G = prefix_sums(w, N_total)
    top = 2 ** (N1 + count + 1)
    if top > G[-1]:
        raise ThresholdOutOfRange(f"need G(N_total) >= {top}, have {G[-1]}")
    blocks = []
    for i in range(1, count + 1):
        lo = g_inverse(G, 2 ** (N1 + i))
        hi = g_inverse(G, 2 ** (N1 + i + 1))
        if hi <= lo:
            raise EmptyBlock(f"block {i} is empty")
        blocks.append(Block(lo + 1, min(hi, N_total)))
    return blocks


def max_initial_segment_average(x: TorusPoint, seq: IntegerSequence, r: RotationVector,
                                bad: BadSet, N_max: int, N_min: int = 1) -> tuple:
    """(N, A_[N]) maximizing the average over n in [1, N], N_min <= N <= N_max.

    Ties go to the smallest N.
    """
    if not 1 <= N_min <= N_max <= seq.end_index or seq.start_index != 1:
        raise ValueError("need 1 <= N_min <= N_max <= available indices")
    hits = 0
    best = None
    for N in range(1, N_max + 1):
        hits += in_bad_set(rotate(x, r, seq.term(N)), bad)
        if N >= N_min:
            value = Fraction(hits, N)
            if best is None or value > best[1]:
                best = (N, value)
    return best


def sample_in_cube(q: Sequence[int], Q: int, rng: random.Random) -> TorusPoint:
    """Uniform point j/2^32 per coordinate, strictly inside bin q_k."""
    D = SAMPLE_DENOMINATOR
    coords = []
    for qk in q:
        lo = (qk * D) // Q + 1
        hi = -((-(qk + 1) * D) // Q) - 1
        coords.append(Fraction(rng.randint(lo, hi), D))
    return TorusPoint(tuple(coords))


@dataclass
class CubeResult:
    cube_index: int
    q_vector: tuple
    certificate: bool
    witness: Optional[dict] = None
    samples: list = field(default_factory=list)
    sample_values: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.certificate and all(v == 1 for v in self.sample_values)

    def to_dict(self) -> dict:
        return {"cube_index": self.cube_index, "q_vector": list(self.q_vector),
                "pass": self.passed, "certificate": self.certificate,
                "witness": self.witness,
                "samples": [[format_rational(c) for c in p.coords] for p in self.samples],
                "sample_values": [format_rational(v) for v in self.sample_values]}


@dataclass
class SweepoutReport:
    params: GridParameters
    cubes: list
    measure: Fraction

    @property
    def full_cover(self) -> bool:
        return all(c.passed for c in self.cubes)

    @property
    def measure_ok(self) -> bool:
        return self.measure < self.params.threshold

    @property
    def failures(self) -> list:
        return [c for c in self.cubes if not c.passed]

    def to_dict(self) -> dict:
        return {"parameters": self.params.to_dict(),
                "enumeration": ENUMERATION_TAG,
                "bad_set_measure": format_rational(self.measure),
                "bad_set_measure_approx": float(self.measure),
                "threshold": format_rational(self.params.threshold),
                "measure_ok": self.measure_ok,
                "full_cover": self.full_cover,
                "cubes": [c.to_dict() for c in self.cubes]}


def _check_cube(i, J, seq, params, partition, assignment, r, bad, samples_per_cube, seed):
    Q, K = params.Q, params.K
    q = cube_vector(i, Q, K)
    result = CubeResult(i, q, True)
    for n in J:
        k = partition.coordinate_of(n)
        want = target_bin(q[k - 1], Q)
        got = bin_of(mod_one(r[k - 1] * seq.term(n)), Q)
        if got != want:
            result.certificate = False
            result.witness = {"cube_index": i, "k": k, "n": n, "a_n": seq.term(n),
                              "expected_bin": want,
                              "actual_bin": got if isinstance(got, int) else "OnBoundary"}
            break
    rng = random.Random(f"{seed}:{i}")
    for _ in range(samples_per_cube):
        x = sample_in_cube(q, Q, rng)
        result.samples.append(x)
        result.sample_values.append(block_average(x, J, seq, r, bad))
    if result.certificate and result.witness is None:
        for x, v in zip(result.samples, result.sample_values):
            if v != 1:
                result.witness = {"cube_index": i, "sample": [format_rational(c) for c in x],
                                  "block_average": format_rational(v)}
                break
    return result


def verify_sweepout(seq: IntegerSequence, params: GridParameters, partition: IndexPartition,
                    assignment: CubeAssignment, r: RotationVector, bad: BadSet,
                    samples_per_cube: int = 3, *, seed: int = 0,
                    threads: int = 1) -> SweepoutReport:
    """Certify, cube by cube, that the matched block average of 1_E is 1 on the open cube.

    The certificate checks that r_k*a_n sits in the target bin of cube i for
    every n in J_i; sampled points additionally evaluate the average directly.
    """
    if not (params.Q == assignment.Q == bad.Q and params.K == assignment.K == bad.K == r.dim):
        raise DimensionMismatch("artifacts disagree on Q or K")

    def check(i):
        return _check_cube(i, partition.blocks[i], seq, params, partition, assignment,
                           r, bad, samples_per_cube, seed)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cubes = list(pool.map(check, range(params.n_cubes)))
    else:
        cubes = [check(i) for i in range(params.n_cubes)]
    return SweepoutReport(params, cubes, bad_set_measure(params.K, params.Q))


def cube_csv_rows(report: SweepoutReport) -> list:
    rows = [["cube_index", "q_vector", "pass", "min_block_average", "max_block_average"]]
    for c in report.cubes:
        vals = c.sample_values or [Fraction(0)]
        rows.append([c.cube_index, " ".join(map(str, c.q_vector)), int(c.passed),
                     format_rational(min(vals)), format_rational(max(vals))])
    return rows


def grid_artifact(params: GridParameters, partition: IndexPartition, r: RotationVector,
                  sequence_path: Optional[str] = None) -> dict:
    d = params.to_dict()
    d.update({"N_total": partition.N_total,
              "blocks": [[b.lo, b.hi] for b in partition.blocks],
              "rotation": [format_rational(c) for c in r.coords],
              "sequence": sequence_path,
              "enumeration": ENUMERATION_TAG})
    return d


def load_grid_artifact(d: dict) -> tuple:
    """Inverse of :func:`grid_artifact`: (params, partition, rotation, sequence path)."""
    if d.get("enumeration") != ENUMERATION_TAG:
        raise ValueError(f"unknown enumeration convention {d.get('enumeration')!r}")
    params = GridParameters(Fraction(d["eta"]), Fraction(d["epsilon"]), Fraction(d["C"]),
                            int(d["Q"]), int(d["K"]), Mode(d["mode"]),
                            int(d["block_length"]), int(d["N1"]))
    partition = IndexPartition(int(d["N_total"]), params.K,
                               tuple(Block(lo, hi) for lo, hi in d["blocks"]))
    r = RotationVector(tuple(Fraction(s) for s in d["rotation"]))
    return params, partition, r, d.get("sequence")
