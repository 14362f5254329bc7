import math
from decimal import Decimal, localcontext
from fractions import Fraction as F

import pytest

from sweepout.randomseq import (GridCoverageError, IntervalGrid, ProbabilityProfile, RandomDraw,
                                ThinningResult, build_interval_grid, density_report,
                                expected_size, first_monotone_index, interval_sigma_mass,
                                merge_draws, sample_sequence, sigma_diagnostics,
                                stated_ratio_bound_holds, thin, uniform_word, verify_thinning)

HALF = F(1, 2)


def dec_threshold(m, eta=HALF, digits=60):
    """Independent oracle for v_m = exp(m (log log m)^(-1 + eta/2))."""
    with localcontext() as ctx:
        ctx.prec = digits
        e = Decimal(-1) + Decimal(eta.numerator) / Decimal(2 * eta.denominator)
        return (Decimal(m) * Decimal(m).ln().ln() ** e).exp()


def dec_sigma(n, eta=HALF, digits=50):
    with localcontext() as ctx:
        ctx.prec = digits
        e = Decimal(1) - Decimal(eta.numerator) / Decimal(eta.denominator)
        return Decimal(n).ln().ln().ln() ** e / n


def ones(lo, hi):
    return ProbabilityProfile(HALF, lo, override=lambda n: F(1) if n <= hi else F(0))


def toy_grid(t_max=100):
    # I_1 = [10, 19], I_2 = [20, 29], ..., last start beyond t_max
    return IntervalGrid(HALF, t_max, 1, tuple(range(10, t_max + 20, 10)))


def draw_of(elements, t_max=100):
    return RandomDraw(0, ProbabilityProfile(HALF), t_max, tuple(elements))


# ---------------------------------------------------------------- sampling

def test_empty_when_start_beyond_horizon():
    assert sample_sequence(ProbabilityProfile(HALF, 100), 50, 1).selected == ()


def test_forced_ones():
    assert sample_sequence(ones(20, 40), 40, 5).selected == tuple(range(20, 41))


def test_uniform_word_is_counter_based():
    assert uniform_word(42, 1000) == uniform_word(42, 1000)
    assert uniform_word(42, 1000) != uniform_word(43, 1000)
    assert 0 <= uniform_word(7, 10 ** 12) < 2 ** 64


def test_vectorized_matches_scalar_decision():
    p = ProbabilityProfile(HALF)
    for seed in (0, 1, 42):
        scalar = tuple(n for n in range(16, 30000) if p.selects(n, uniform_word(seed, n)))
        assert sample_sequence(p, 29999, seed).selected == scalar


def test_near_tie_decided_exactly():
    p = ProbabilityProfile(HALF)
    for n in (16, 17, 1000, 123457):
        with localcontext() as ctx:
            ctx.prec = 80
            u = int(dec_sigma(n, digits=80) * (2 ** 64))
        assert p.selects(n, u) and not p.selects(n, u + 1)


def test_parallel_ranges_merge_to_whole():
    p = ProbabilityProfile(HALF)
    whole = sample_sequence(p, 200000, 9)
    parts = [sample_sequence(p, 70000, 9), sample_sequence(p, 200000, 9, lo=70001)]
    assert merge_draws(parts) == whole


def test_draw_size_within_four_sd():
    p = ProbabilityProfile(HALF)
    draw = sample_sequence(p, 10 ** 6, 42)
    mean, var = expected_size(p, 10 ** 6)
    # the double-precision sum agrees with a 30-digit decimal sum on a prefix
    with localcontext() as ctx:
        ctx.prec = 30
        head = sum(dec_sigma(n, digits=30) for n in range(16, 3000))
    assert abs(float(head) - expected_size(p, 2999)[0]) < 1e-12
    assert mean == pytest.approx(8.9152, abs=1e-4)
    assert abs(len(draw) - mean) <= 4 * math.sqrt(var)


def test_sigma_clamp():
    p = ProbabilityProfile(F(3))
    assert all(0 <= p.sigma_float(n) <= 1 for n in range(16, 5000))
    assert p.sigma_float(16) == 1.0
    q = ProbabilityProfile(HALF)
    assert all(0 < q.sigma_float(n) <= 1 for n in range(16, 5000))


# ---------------------------------------------------------------- grid

def test_thresholds_not_monotone_before_five():
    assert dec_threshold(3) > dec_threshold(4) > dec_threshold(5) < dec_threshold(6)
    assert first_monotone_index(HALF) == 5
    assert first_monotone_index(F(2)) == 3


def test_grid_boundaries_match_decimal_oracle():
    grid = build_interval_grid(HALF, 10 ** 6)
    assert grid.m0 == 5
    expected = tuple(int(dec_threshold(m)) + 1 for m in range(5, 5 + len(grid.starts)))
    assert grid.starts == expected
    assert grid.starts[-1] > 10 ** 6 >= grid.starts[-2]


def test_grid_partition_exhaustive():
    grid = build_interval_grid(HALF, 10 ** 4)
    seen = {}
    for m in range(grid.m0, grid.m_last + 1):
        lo, hi = grid.interval(m)
        for n in range(lo, min(hi, 10 ** 4) + 1):
            assert n not in seen
            seen[n] = m
    assert sorted(seen) == list(range(grid.first, 10 ** 4 + 1))
    assert all(grid.index_of(n) == m for n, m in seen.items())


def test_stated_ratio_bound_fails_at_every_computed_index():
    # exp(1/(log log m)^(1 - eta/2)) exceeds v_{m+1}/v_m since log log m increases
    grid = build_interval_grid(HALF, 10 ** 7)
    for m in range(grid.m0, grid.m_last + 1):
        ratio = dec_threshold(m + 1) / dec_threshold(m)
        with localcontext() as ctx:
            ctx.prec = 60
            bound = (1 / Decimal(m).ln().ln() ** Decimal("0.75")).exp()
        assert ratio < bound
        assert stated_ratio_bound_holds(HALF, m) is False


def test_interval_sigma_mass_values():
    mass = interval_sigma_mass(ProbabilityProfile(HALF), build_interval_grid(HALF, 10 ** 6))
    frozen = {5: 0.23320667193604744, 6: 0.4534125977842567, 7: 0.5542336784256825,
              8: 0.6104582847678347, 9: 0.6458622889381478, 10: 0.6700507896861717,
              11: 0.6875608116110999, 12: 0.7008040890357947}
    assert mass.keys() == frozen.keys()
    for m, v in frozen.items():
        assert mass[m] == pytest.approx(v, rel=1e-9)
    assert all(v < 1 for v in mass.values())


# ---------------------------------------------------------------- thinning

def test_thin_one_per_interval():
    grid = toy_grid()
    res = thin(draw_of([15, 25, 35, 45, 55]), grid)
    assert res.D == (15, 25, 35, 45) and res.E == () and res.B == (55,)


def test_thin_separated():
    res = thin(draw_of([15, 35]), toy_grid())
    assert res.B == (15, 35) and res.D == res.E == ()


def test_thin_shared_interval():
    res = thin(draw_of([21, 27]), toy_grid())
    assert res.E == (21, 27) and res.D == res.B == ()


def test_thin_horizon_and_uncovered():
    res = thin(draw_of([3, 15, 95]), toy_grid())
    assert res.uncovered == (3,)
    assert res.unresolved == (95,)
    assert res.B == (15,)


def test_thin_rejects_mismatched_grid():
    with pytest.raises(GridCoverageError):
        thin(draw_of([15]), IntervalGrid(F(1, 3), 100, 1, tuple(range(10, 120, 10))))
    with pytest.raises(GridCoverageError):
        thin(draw_of([15], t_max=200), toy_grid(100))


def structural_check(draw, grid):
    res = thin(draw, grid)
    parts = [set(res.B), set(res.D), set(res.E), set(res.unresolved), set(res.uncovered)]
    assert sum(map(len, parts)) == len(set().union(*parts))
    assert set().union(*parts) == set(draw.selected)
    occ = {}
    for b in res.B:
        occ[grid.index_of(b)] = occ.get(grid.index_of(b), 0) + 1
    assert all(c == 1 for c in occ.values())
    assert not any(m + 1 in occ for m in occ)
    assert occ == {m: c for m, c in res.occupancy.items() if c}
    return res


def test_structural_over_200_seeds():
    p = ProbabilityProfile(HALF)
    grid = build_interval_grid(HALF, 30000)
    for seed in range(200):
        draw = sample_sequence(p, 30000, seed)
        res = structural_check(draw, grid)
        assert verify_thinning(res, grid).ok


def test_structural_dense_synthetic():
    # toy intervals are not the v_m thresholds, so only the structural rules apply
    profile = ProbabilityProfile(HALF, 10, override=lambda n: F(1, 25))
    grid = toy_grid(1000)
    seen = set()
    for seed in range(200):
        draw = sample_sequence(profile, 1000, seed)
        res = structural_check(draw, grid)
        seen |= {name for name in ("B", "D", "E") if getattr(res, name)}
    assert seen == {"B", "D", "E"}


def test_verify_thinning_mutation():
    grid = build_interval_grid(HALF, 10 ** 6)
    draw = sample_sequence(ProbabilityProfile(HALF), 10 ** 6, 42)
    res = thin(draw, grid)
    assert verify_thinning(res, grid).ok and res.B
    b = res.B[0]
    m = grid.index_of(b)
    moved = grid.interval(m + 1)[0]
    mutated = ThinningResult(tuple(sorted(res.B[1:] + (moved,))), res.D, res.E,
                             res.unresolved, res.uncovered, res.occupancy)
    # b moved up one interval now touches its successor's occupant or the next B element
    bad = ThinningResult(tuple(sorted(res.B + (moved,))), res.D, res.E, res.unresolved,
                         res.uncovered, res.occupancy)
    report = verify_thinning(bad, grid)
    assert not report.ok
    assert {"rule": "gap", "interval": m} in report.violations
    assert verify_thinning(mutated, grid).pairs_checked == len(res.B) - 1


def test_verify_thinning_empty():
    report = verify_thinning(ThinningResult((), (), (), (), (), {}), toy_grid())
    assert report.ok and report.pairs_checked == 0


def test_verify_thinning_handcrafted_violation():
    grid = build_interval_grid(HALF, 10 ** 6)
    a = grid.interval(7)[1]
    b = grid.interval(9)[0]
    c = grid.interval(10)[0]
    report = verify_thinning(ThinningResult((a, b, c), (), (), (), (), {}), grid)
    assert not report.ok
    assert report.violations == [{"rule": "gap", "interval": 9},
                                 {"rule": "interval-gap", "pair": [b, c], "intervals": [9, 10]}]


def test_interval_gap_ratio_is_tight_against_oracle():
    grid = build_interval_grid(HALF, 10 ** 6)
    # worst admissible pair: last integer of I_7 and first integer of I_9
    b, b2 = grid.interval(7)[1], grid.interval(9)[0]
    assert F(b2, b) > F(int(dec_threshold(9) / dec_threshold(8) * 10 ** 12), 10 ** 12)
    assert verify_thinning(ThinningResult((b, b2), (), (), (), (), {}), grid).ok


# ---------------------------------------------------------------- density & diagnostics

def test_density_no_thinning():
    draw = draw_of([15, 35, 55])
    res = ThinningResult(draw.selected, (), (), (), (), {})
    assert [row[3] for row in density_report(draw, res, [20, 60, 100])] == [1, 1, 1]


def test_density_empty_b():
    draw = draw_of([21, 27])
    res = thin(draw, toy_grid())
    assert density_report(draw, res, [100]) == [(100, 2, 0, F(0))]
    assert density_report(draw, res, [5]) == [(5, 0, 0, None)]


def test_sigma_diagnostics_forced_ones():
    p = ones(20, 10 ** 6)
    assert sigma_diagnostics(p, 5).u_n == 20 + 5 - 1


def test_first_passage_monotone_and_oracle():
    p = ProbabilityProfile(HALF)
    us = [sigma_diagnostics(p, n).u_n for n in (1, 2, 3)]
    assert us == sorted(us)
    with localcontext() as ctx:
        ctx.prec = 40
        total, t = Decimal(0), 15
        while total < 3:
            t += 1
            total += dec_sigma(t, digits=40)
    assert us[2] == t == 1621
