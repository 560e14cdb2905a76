import cmath
import math
from fractions import Fraction

import pytest

from exprays.address import Address, metric_distance, shift
from exprays.errors import BranchAmbiguity
from exprays.polynomial import (address_to_angle, alphabet_window, angle_to_address, d_adic_angle,
                                land_poly_ray, landing_pattern_compare, multiply_angle,
                                renormalizability_indicator, trace_poly_ray)

A = Address.parse
C_MIS = complex(math.log(2 * math.pi), math.pi / 2)


def test_angle_examples():
    assert angle_to_address(Fraction(1, 3), 2) == A("| 0 1")
    assert angle_to_address(0, 2) == A("| 0")
    assert angle_to_address(Fraction(1, 2), 3) == A("| 1")
    # a terminating expansion keeps its zero tail
    assert angle_to_address(Fraction(1, 4), 2) == A("0 1 | 0")
    assert angle_to_address("2/3", 3) == A("-1 | 0")
    assert angle_to_address("1/4", 3) == A("| 0 -1")


def test_windows():
    assert alphabet_window(2) == (0, 1)
    assert alphabet_window(3) == (-1, 1)
    assert alphabet_window(4) == (-1, 2)
    assert alphabet_window(5) == (-2, 2)


def test_boundary_digits_flagged():
    a = d_adic_angle(Fraction(1, 3), 2)
    assert a.boundary_digits == (1,)
    assert d_adic_angle(Fraction(1, 2), 3).boundary_digits == ()


def test_round_trip_and_errors():
    for D in (2, 3, 4, 5):
        for q in range(1, 30):
            for p in range(q):
                theta = Fraction(p, q)
                s = angle_to_address(theta, D)
                assert address_to_angle(s, D) == theta
                assert angle_to_address(multiply_angle(theta, D), D) == shift(s, 1)
    with pytest.raises(ValueError):
        address_to_angle(A("| 3"), 2)
    with pytest.raises(ValueError):
        angle_to_address(Fraction(3, 2), 2)


def test_c0_rays():
    # for c = 0 the Boettcher map is the identity
    tr = trace_poly_ray(2, 0j, 0, [4.0, 1.0, 0.1])
    assert all(abs(s.z.imag) < 1e-12 and abs(s.z - math.exp(s.t)) < 1e-9 for s in tr.samples)
    tr = trace_poly_ray(2, 0j, Fraction(1, 3), [2.0, 0.5])
    for s in tr.samples:
        assert abs(s.z - cmath.exp(s.t + 2j * math.pi / 3)) < 1e-9
    res = land_poly_ray(2, 0j, Fraction(1, 3))
    assert res.landed and abs(res.point - cmath.exp(2j * math.pi / 3)) < 1e-8


def test_degree_consistency():
    c = -0.12 + 0.75j
    a = trace_poly_ray(2, c, Fraction(1, 7), [1.0, 0.5])
    b = trace_poly_ray(2, c, Fraction(2, 7), [2.0, 1.0])
    for x, y in zip(a.samples, b.samples):
        assert abs(x.z ** 2 + c - y.z) < 1e-9


def test_basilica_landing():
    # z^2 - 1: rays 1/3 and 2/3 land at the fixed point (1 - sqrt 5)/2
    alpha = (1 - math.sqrt(5)) / 2
    for theta in (Fraction(1, 3), Fraction(2, 3)):
        res = land_poly_ray(2, -1.0, theta)
        assert res.landed and abs(res.point - alpha) < 1e-8


def test_preperiodic_landing():
    # c = i: the ray 1/6 lands at the critical value i
    res = land_poly_ray(2, 1j, Fraction(1, 6))
    assert res.landed and abs(res.point - 1j) < 1e-6


def test_branch_ambiguity_near_critical_value():
    # real c > 1/4 escapes along the ray of angle 0, which then runs into the
    # critical point 0 at half the Green potential of c
    c = 0.55
    z = c
    for n in range(1, 30):
        z = z * z + c
        if abs(z) > 1e100:
            break
    green = math.log(abs(z)) / 2 ** n
    with pytest.raises(BranchAmbiguity):
        trace_poly_ray(2, c, 0, [green / 2])


def test_renormalizability_indicator():
    rows = renormalizability_indicator(A("| 0"), 2, 3, 4)
    assert rows == [(q, [1, 2, 3, 4]) for q in (1, 2, 3)]
    s = A("1 | 0")
    rows = renormalizability_indicator(s, 2, 1, 3)
    assert rows == [(1, [k for k in (1, 2, 3) if metric_distance(s, shift(s, k)) < 1])]
    # two blocks of length 2: close returns at multiples of 2
    rows = dict(renormalizability_indicator(A("| 0 1 0 0"), 2, 2, 8))
    assert rows[2] == [4, 8]


def test_landing_pattern_compare():
    pair = (A("| 0 1"), A("| 1 0"))
    (r,) = landing_pattern_compare(2, -1.0, C_MIS, [pair])
    assert r.poly_colands and r.exp_colands and r.agree
    (r,) = landing_pattern_compare(2, 0j, -2.0, [pair])
    assert r.poly_colands is False and r.exp_colands is False and r.agree
    (r,) = landing_pattern_compare(2, -1.0, C_MIS, [(pair[0], pair[0])])
    assert r.agree
