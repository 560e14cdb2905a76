import cmath
import math

import pytest

from exprays.errors import EscapingSample, OrbitEscape
from exprays.hyperbolicity import (derivative_direct, growth_report, growth_sums,
                                   nonrecurrence_distance, orbit_growth_report, orbit_sample)

C_MIS = complex(math.log(2 * math.pi), math.pi / 2)


def fixed_point(c, x):
    for _ in range(100):
        x -= (math.exp(x) + c - x) / (math.exp(x) - 1)
    return x


P = fixed_point(-2.0, 1.0)
Q = fixed_point(-2.0, -1.8)


def test_orbit_sample_attracting():
    s = orbit_sample(-2.0, 50)
    assert not s.escaped and len(s.points) == 50
    assert abs(s.points[-1] - Q) < 1e-12
    # the closest point is the first iterate e^-2 - 2, not the limit
    assert s.min_distance == pytest.approx(math.exp(-2.0), rel=1e-12)
    assert s.min_re == pytest.approx(math.exp(-2.0) - 2.0, rel=1e-12)


def test_orbit_sample_escape():
    s = orbit_sample(1.0, 10)
    assert s.escaped and s.escape_iterate is not None
    assert abs(s.points[0] - (math.e + 1)) < 1e-12
    with pytest.raises(EscapingSample):
        nonrecurrence_distance(s)
    with pytest.raises(OrbitEscape):
        orbit_growth_report(1.0, 10, 3)
    with pytest.raises(ValueError):
        orbit_sample(1.0, 0)


def test_finite_orbit():
    s = orbit_sample(C_MIS, 6)
    # the fixed point c + 2 pi i repels with |f'| = 2 pi, so rounding grows along the sample
    assert all(abs(z - (C_MIS + 2j * math.pi)) < 1e-9 for z in s.points)
    nr = nonrecurrence_distance(s)
    assert nr.distance == pytest.approx(2 * math.pi) and not nr.recurrent


def test_nonrecurrence_distance():
    nr = nonrecurrence_distance(orbit_sample(-2.0, 50))
    assert nr.distance == pytest.approx(math.exp(-2.0), rel=1e-12)
    assert nr.m_star == pytest.approx(2.0, rel=1e-12)
    assert nr.argmin == 1
    # |f(c) - c| = e^{Re c} for the first iterate
    assert math.exp(-2.0) >= nr.distance - 1e-15


def test_recurrent_flag():
    # c = 0 + 0j is not periodic, but a sample whose orbit passes through c is recurrent
    from exprays.hyperbolicity import OrbitSample
    s = OrbitSample(1j, 3, (2j, 1j, 0j), False, None, 0.0, 0.0)
    nr = nonrecurrence_distance(s)
    assert nr.recurrent and nr.m_star == math.inf


def test_growth_sums_and_direct():
    sums, esc = growth_sums(-2.0, P, 10)
    assert not esc and len(sums) == 11
    for k, s in enumerate(sums):
        assert s == pytest.approx(k * P)
    z, c = 0.3 + 0.7j, -2.5 + 0.1j
    assert derivative_direct(c, z, 7) == pytest.approx(math.exp(growth_sums(c, z, 7)[0][7]),
                                                      rel=1e-12)


def test_growth_report_repelling_fixed_point():
    r = growth_report(-2.0, [P], 10)
    assert r.positive and r.k_bar == 1
    assert r.eta == pytest.approx(math.exp(2 * P))


def test_growth_report_attracting_fixed_point():
    r = growth_report(-2.0, [P, Q], 10)
    assert not r.positive and r.k_bar is None
    assert (Q, 1) in [(z.real, k) for z, k in r.violations]


def test_growth_report_misiurewicz_orbit():
    r = orbit_growth_report(C_MIS, 5, 6)
    # every orbit point has Re = log 2 pi, so S_k = k log 2 pi
    assert r.positive and r.k_bar == 1
    assert r.eta == pytest.approx((2 * math.pi) ** 2)


def test_strip_guard():
    # Re z >= log 2 along the orbit gives S_k >= k log 2
    sums, _ = growth_sums(-0.1, 1.0, 4)
    assert all(s >= k * math.log(2) for k, s in enumerate(sums))


def test_growth_report_validation():
    with pytest.raises(ValueError):
        growth_report(-2.0, [], 5)
    with pytest.raises(ValueError):
        growth_report(-2.0, [P], 1)
