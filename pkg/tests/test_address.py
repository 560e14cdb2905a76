import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from exprays.address import (Address, MetricInterval, Ordering, growth_model, is_exponentially_bounded,
                             lex_compare, log_growth_iterate, metric_distance, orbit_recurrence_gap,
                             parse_addresses, shift)
from exprays.errors import Undecidable

A = Address.parse

digits = st.integers(-3, 3)
addresses = st.builds(lambda pre, per: Address(tuple(pre), tuple(per)),
                      st.lists(digits, max_size=4), st.lists(digits, min_size=1, max_size=4))


def test_parse_and_str():
    s = A("3 | 0 1")
    assert s.preperiod == (3,) and s.period == (0, 1)
    assert str(s) == "3 | 0 1"
    assert str(A("|0")) == "| 0"
    assert A("−1 | 2") == A("-1 | 2")
    with pytest.raises(ValueError):
        A("0 1")
    with pytest.raises(ValueError):
        A("| a")
    with pytest.raises(ValueError):
        A("1 |")


def test_canonical_form():
    assert A("| 0 1 0 1") == A("| 0 1")
    assert A("0 1 | 0 1") == A("| 0 1")
    assert A("1 | 0 1") == A("| 1 0")
    assert str(A("1 | 0 1 0")) == "1 | 0 1 0"
    assert hash(A("| 2 2")) == hash(A("| 2"))


def test_inexact_window():
    s = A("| 0 1 ~5")
    assert not s.exact and s.window_len == 5
    assert str(s) == "| 0 1 ~5"


def test_shift_examples():
    assert shift(Address((3,), (0,)), 1) == Address((), (0,))
    assert shift(Address((), (0, 1)), 2) == Address((), (0, 1))
    assert shift(Address((5, 2), (7,)), 1) == Address((2,), (7,))
    assert shift(A("| 0 1"), 1) == A("| 1 0")


def test_metric_examples():
    assert metric_distance(A("| 0"), A("| 0")) == 0
    assert metric_distance(A("1 | 0"), A("| 0")) == 1
    assert metric_distance(A("| 0 1"), A("| 0")) == Fraction(2, 3)


def test_metric_inexact_interval():
    r = metric_distance(A("| 0 ~4"), A("1 | 0"))
    assert isinstance(r, MetricInterval)
    assert r.lower == 1 and r.upper == 1 + Fraction(2, 16)


def test_lex_compare_examples():
    assert lex_compare(A("| 0"), A("| 1")) is Ordering.LT
    assert lex_compare(A("0 | 2"), A("0 | 1")) is Ordering.GT
    assert lex_compare(A("| 0 1"), A("| 0 1")) is Ordering.EQ
    with pytest.raises(Undecidable):
        lex_compare(A("| 0 ~3"), A("| 0 0 0 1"))


def test_exponential_boundedness():
    # index 0 counts: |5| > F^0(3) = 3
    assert not is_exponentially_bounded(A("| 5"), 3.0)
    assert is_exponentially_bounded(A("| 5"), 5.0)
    assert is_exponentially_bounded(A("| 0"), 0.1)
    assert not is_exponentially_bounded(A("10 | 0"), 0.5)
    # F(0.1) < 1, so the entry 1 at index 1 already fails
    assert not is_exponentially_bounded(A("0 | 1"), 0.1)
    assert is_exponentially_bounded(A("0 | 1"), 1.0)


def test_orbit_recurrence_gap():
    g = orbit_recurrence_gap(A("| 0"), 5)
    assert all(d == 0 for _, d in g.distances) and not g.non_recurrent
    g = orbit_recurrence_gap(A("1 | 0"), 5)
    assert g.min_distance == 1 and g.non_recurrent
    g = orbit_recurrence_gap(A("| 0 1"), 4)
    expected = {k: metric_distance(A("| 0 1"), shift(A("| 0 1"), k)) for k in range(1, 5)}
    assert dict(g.distances) == expected
    assert expected[2] == 0 and expected[1] == 2 and g.min_distance == 0


def test_growth_model():
    assert growth_model(0.0) == 0.0
    assert growth_model(1.0) == pytest.approx(math.e - 1)
    assert growth_model(800.0) == math.inf
    assert log_growth_iterate(2.0, 2) == pytest.approx(math.log(math.expm1(math.expm1(2.0))))
    assert math.isfinite(log_growth_iterate(2.0, 4))


def test_parse_addresses():
    got = parse_addresses("| 0 1 # comment\n\n| 1 0; 2 | 0")
    assert got == [A("| 0 1"), A("| 1 0"), A("2 | 0")]


@settings(max_examples=200, deadline=None)
@given(addresses, addresses)
def test_metric_symmetry_and_tail_bound(s, t):
    d = metric_distance(s, t)
    assert d == metric_distance(t, s)
    m = next((i for i in range(64) if s.entry(i) != t.entry(i)), None)
    if m is None:
        assert d == 0 and s == t
    else:
        assert Fraction(1, 2 ** m) <= d <= Fraction(2, 2 ** m)


@settings(max_examples=200, deadline=None)
@given(addresses, st.integers(0, 8))
def test_shift_entries(s, k):
    assert shift(s, k).entries(10) == s.entries(k + 10)[k:]
    assert Address(s.preperiod, s.period) == s


@settings(max_examples=100, deadline=None)
@given(addresses)
def test_preperiodic_nonrecurrent(s):
    if s.preperiod:
        assert orbit_recurrence_gap(s, s.orbit_size).non_recurrent
