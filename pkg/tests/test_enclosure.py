from fractions import Fraction

import pytest
from mpmath import iv

from sweepout import enclosure


def test_floor_of_exp():
    assert enclosure.floor_of(lambda: iv.exp(iv.mpf(3))) == 20


def test_compare_rational_against_transcendental():
    assert enclosure.compare(lambda: iv.pi, Fraction(22, 7)) == -1
    assert enclosure.compare(lambda: iv.pi, Fraction(333, 106)) == 1


def test_tie_is_undecidable():
    with pytest.raises(enclosure.PrecisionExhausted):
        enclosure.compare(lambda: iv.mpf(5), 5, precision_cap=256)


def test_near_integer_floor_is_undecidable():
    # log(e^5) straddles 5 at every precision
    with pytest.raises(enclosure.PrecisionExhausted):
        enclosure.floor_of(lambda: iv.log(iv.exp(iv.mpf(5))), precision_cap=256)


def test_precision_restored():
    before = iv.prec
    enclosure.floor_of(lambda: iv.exp(iv.mpf(7)))
    assert iv.prec == before


def test_bounds_are_plain_ints():
    lo, hi = enclosure.bounds(iv.exp(iv.mpf(1)))
    assert type(lo.numerator) is int and lo < hi
