import math
from decimal import Decimal, localcontext
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sweepout.sequences import (GrowthSpec, IndexTooSmall, IntegerSequence, SequenceError,
                                UndefinedBound, counting_function, generate_paper_example,
                                generate_ratio_sequence, read_sequence, verify_growth,
                                write_sequence)


def decimal_floor_exp(n, digits=120):
    """Independent oracle: floor(e^n) with the decimal module."""
    with localcontext() as ctx:
        ctx.prec = digits
        return int(Decimal(n).exp().to_integral_value(rounding="ROUND_FLOOR"))


def decimal_loglog(n, digits=60):
    with localcontext() as ctx:
        ctx.prec = digits
        return Decimal(n).ln().ln()


def test_loglog_example_eta_one():
    assert generate_paper_example(1, 3, 3).terms == (20, 54, 148)
    seq = generate_paper_example(1, 3, 5)
    assert seq.terms[-2:] == (403, 1096)
    assert seq.start_index == 3


@pytest.mark.parametrize("n", [3, 10, 25, 60, 150])
def test_loglog_example_matches_decimal_oracle(n):
    assert generate_paper_example(1, n, 1).terms == (decimal_floor_exp(n),)


def test_loglog_example_general_eta_against_decimal():
    eta = Fraction(3, 2)
    seq = generate_paper_example(eta, 20, 5)
    with localcontext() as ctx:
        ctx.prec = 60
        for n, t in zip(seq.indices(), seq.terms):
            x = Decimal(n) / decimal_loglog(n) ** (1 - Decimal(3) / 2)
            assert t == int(x.exp().to_integral_value(rounding="ROUND_FLOOR"))


def test_loglog_example_index_too_small():
    with pytest.raises(IndexTooSmall):
        generate_paper_example(1, 2, 1)


def test_loglog_example_small_eta_not_monotone():
    # n/(log log n)^(1/2) decreases between 3 and 4
    with pytest.raises(SequenceError):
        generate_paper_example(Fraction(1, 2), 3, 3)


@pytest.mark.parametrize("rho,count,expected", [
    (21, 3, (1, 22, 463)),
    (2, 5, (1, 3, 7, 15, 31)),
    (5, 2, (1, 6)),
])
def test_ratio_sequence_examples(rho, count, expected):
    assert generate_ratio_sequence(rho, 1, count).terms == expected


def test_ratio_sequence_rejects_rho_at_most_one():
    with pytest.raises(ValueError):
        generate_ratio_sequence(1, 1, 3)


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=Fraction(1), max_value=100, max_denominator=1000)
       .filter(lambda r: r > 1),
       st.integers(1, 50), st.integers(1, 30))
def test_ratio_sequence_property(rho, start, count):
    seq = generate_ratio_sequence(rho, start, count)
    for a, b in zip(seq.terms, seq.terms[1:]):
        assert Fraction(b, a) > rho
    assert verify_growth(seq, GrowthSpec.fixed_ratio(rho)).holds


def test_growth_fixed_ratio():
    assert verify_growth(IntegerSequence((1, 3, 7, 15, 31)), GrowthSpec.fixed_ratio(2)).holds
    report = verify_growth(IntegerSequence((10, 20)), GrowthSpec.fixed_ratio(2))
    assert not report.holds and report.first_violation == 1


def test_growth_lacunary_first_violation_by_scan():
    seq = IntegerSequence(tuple(range(3, 21)))
    eta = Fraction(1, 2)
    oracle = next(n for n in seq.indices()
                  if Fraction(seq.term(n + 1), seq.term(n)) <= 1 + eta)
    report = verify_growth(seq, GrowthSpec.lacunary(eta))
    assert not report.holds
    assert report.first_violation == oracle == 1


def test_growth_loglog_eta_one_is_doubling():
    ok = IntegerSequence((1, 3, 7, 15, 31), start_index=3)
    assert verify_growth(ok, GrowthSpec.loglog(1)).holds
    bad = IntegerSequence((1, 3, 6), start_index=3)
    assert verify_growth(bad, GrowthSpec.loglog(1)).first_violation == 4


def test_growth_loglog_against_decimal_oracle():
    eta = Fraction(1, 2)
    seq = IntegerSequence((100, 250, 500, 900, 1500, 2000, 2400), start_index=3)
    expected = None
    for n in range(3, seq.end_index):
        with localcontext() as ctx:
            ctx.prec = 60
            bound = 1 + 1 / decimal_loglog(n).sqrt()
        if Decimal(seq.term(n + 1)) / Decimal(seq.term(n)) <= bound:
            expected = n
            break
    report = verify_growth(seq, GrowthSpec.loglog(eta))
    assert expected is not None
    assert report.first_violation == expected


def test_growth_loglog_domain_policy():
    seq = IntegerSequence((1, 5, 25, 125), start_index=1)
    report = verify_growth(seq, GrowthSpec.loglog(Fraction(1, 2)))
    assert report.holds and report.skipped == (1, 2)
    with pytest.raises(UndefinedBound):
        verify_growth(seq, GrowthSpec.loglog(Fraction(1, 2)), strict_domain=True)


def test_growth_weighted_constant_weights_matches_unweighted():
    seq = generate_ratio_sequence(3, 1, 12)
    weighted = GrowthSpec.loglog_weighted(Fraction(1, 2), [1] * 12)
    assert verify_growth(seq, weighted) == verify_growth(seq, GrowthSpec.loglog(Fraction(1, 2)))


def test_growth_weighted_slow_weights():
    # w = 1/2 gives G(n) = n/2, so log log G(n) > 0 only from n = 6 on
    seq = generate_ratio_sequence(3, 1, 10)
    report = verify_growth(seq, GrowthSpec.loglog_weighted(Fraction(1, 2), [Fraction(1, 2)] * 10))
    assert report.skipped == (1, 2, 3, 4, 5)
    # at n = 6 the bound is 1 + 1/sqrt(log log 3) > 4, above the ratio 3
    with localcontext() as ctx:
        ctx.prec = 40
        assert 1 + 1 / decimal_loglog(3).sqrt() > Fraction(seq.term(7), seq.term(6))
    assert report.first_violation == 6


@pytest.mark.parametrize("t,expected", [(7, 3), (0, 0), (31, 5), (100, 5), (6, 2)])
def test_counting_function(t, expected):
    assert counting_function(IntegerSequence((1, 3, 7, 15, 31)), t) == expected


def test_counting_function_example_terms():
    assert counting_function(IntegerSequence((20, 54, 148)), 54) == 2


@given(st.lists(st.integers(1, 10 ** 6), min_size=1, max_size=30, unique=True),
       st.integers(-5, 2 * 10 ** 6), st.integers(0, 1000))
def test_counting_function_monotone(values, t, dt):
    seq = IntegerSequence(tuple(sorted(values)))
    assert counting_function(seq, t) <= counting_function(seq, t + dt)
    assert counting_function(seq, seq.terms[-1]) == len(seq)


def test_sequence_invariants():
    with pytest.raises(SequenceError):
        IntegerSequence((1, 1))
    with pytest.raises(SequenceError):
        IntegerSequence((0, 2))
    seq = IntegerSequence((5, 9), start_index=4)
    assert seq.term(5) == 9
    with pytest.raises(IndexError):
        seq.term(3)


def test_sequence_file_round_trip(tmp_path):
    seq = generate_paper_example(1, 3, 40)
    path = tmp_path / "s.txt"
    write_sequence(seq, path)
    assert path.read_text().splitlines()[0] == "# start_index=3"
    assert read_sequence(path) == seq
