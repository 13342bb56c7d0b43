import math

import pytest

from disconj.interval import Interval


def test_parse_notation():
    iv = Interval.parse("[0, pi)")
    assert iv.lo == 0 and iv.hi == pytest.approx(math.pi) and iv.lo_closed and not iv.hi_closed
    iv = Interval.parse("(-inf, 2]")
    assert iv.lo == -math.inf and not iv.lo_closed and iv.hi_closed


def test_infinite_endpoint_never_closed():
    iv = Interval(-math.inf, math.inf, True, True)
    assert not iv.lo_closed and not iv.hi_closed


def test_requires_lo_below_hi():
    with pytest.raises(ValueError):
        Interval.closed(1.0, 1.0)
    with pytest.raises(ValueError):
        Interval.parse("[0, 1")


def test_contains():
    iv = Interval.closed_open(0.0, 1.0)
    assert 0.0 in iv and 0.5 in iv and 1.0 not in iv
    assert Interval.closed(0, 2).contains_interval(Interval.open(0, 1))
    assert not Interval.open(0, 2).contains_interval(Interval.closed(0, 1))


def test_str_round_trip():
    for iv in (Interval.closed(0, 1), Interval.open_closed(-1, 3.5), Interval.real_line()):
        assert Interval.parse(str(iv)) == iv
