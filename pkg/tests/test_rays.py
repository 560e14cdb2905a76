import cmath
import math

import pytest

from exprays.address import Address, growth_model
from exprays.errors import SingularObstruction
from exprays.rays import (OrbitType, find_periodic_orbits, geometric_potentials, land_ray,
                          ray_point, trace_ray, trace_ray_at, transversal_continuity_check)

A = Address.parse


def real_newton(g, dg, x):
    for _ in range(100):
        step = g(x) / dg(x)
        x -= step
        if abs(step) < 1e-16:
            break
    return x


# fixed points of e^x - 2, by real Newton
P_STAR = real_newton(lambda x: math.exp(x) - 2 - x, lambda x: math.exp(x) - 1, 1.0)
Q_STAR = real_newton(lambda x: math.exp(x) - 2 - x, lambda x: math.exp(x) - 1, -1.8)


def test_geometric_potentials():
    ts = geometric_potentials(0.5, 20.0, 5)
    assert ts[0] == 20.0 and ts[-1] == 0.5
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_real_ray_stays_real():
    z = ray_point(-2.0, A("| 0"), 5.0)
    assert abs(z.imag) < 1e-12


def test_functional_equation_fixed_address():
    s = A("| 0")
    for t in (3.0, 2.0, 1.0):
        z = ray_point(-2.0, s, t)
        w = ray_point(-2.0, s, growth_model(t))
        assert abs(cmath.exp(z) - 2.0 - w) < 1e-9


def test_trace_samples_and_errors():
    tr = trace_ray(-2.0, A("| 0 1"), 0.05, 20.0, 30, tol=1e-9)
    assert len(tr.samples) == 30
    assert all(s.err < 1e-9 for s in tr.samples)
    assert tr.potentials == sorted(tr.potentials, reverse=True)


def test_potentials_must_decrease():
    with pytest.raises(ValueError):
        trace_ray_at(0j, A("| 0"), [1.0, 2.0])


def test_land_fixed_ray():
    res = land_ray(-2.0, A("| 0"))
    assert res.landed
    assert abs(res.point - P_STAR) < 1e-10
    assert abs(res.multiplier - math.exp(P_STAR)) < 1e-9
    assert abs(res.point - Q_STAR) > 1.0


def test_land_preperiodic_ray():
    res = land_ray(-2.0, A("1 | 0"))
    assert res.landed
    w = res.point
    # w = Log_1(p* + 2), the branch with imaginary part in (pi, 3pi]
    oracle = cmath.log(P_STAR + 2.0) + 2j * math.pi
    assert math.pi < w.imag < 3 * math.pi
    assert abs(w - oracle) < 1e-9
    assert abs(cmath.exp(w) - 2.0 - P_STAR) < 1e-10


def test_landing_blocked_by_singular_value():
    # c = 20 + 2 pi i lies on the ray | 1 of its own dynamical plane
    res = land_ray(20 + 2j * math.pi, A("| 1"))
    assert not res.landed
    assert res.status.value == "SingularObstruction"
    with pytest.raises(SingularObstruction):
        trace_ray_at(3.0, A("| 0"), [5.0, 1.0])


def test_find_orbits_classification():
    orbits = find_periodic_orbits(-2.0, 1, [1.0, -1.8])
    assert len(orbits) == 2
    by_kind = {o.classification: o for o in orbits}
    rep, att = by_kind[OrbitType.REPELLING], by_kind[OrbitType.ATTRACTING]
    assert abs(rep.points[0] - P_STAR) < 1e-10
    assert abs(att.points[0] - Q_STAR) < 1e-10
    assert abs(att.multiplier - math.exp(Q_STAR)) < 1e-10
    for o in orbits:
        assert abs(abs(o.multiplier) - math.exp(sum(z.real for z in o.points))) < 1e-10


def test_find_orbits_minimal_period():
    (o,) = find_periodic_orbits(-2.0, 2, [1.14])
    assert o.period == 2 and o.minimal_period == 1
    assert find_periodic_orbits(-2.0, 1, [800.0]) == []
    with pytest.raises(ValueError):
        find_periodic_orbits(-2.0, 1, [])


def test_orbit_points_form_a_cycle():
    c = -4.0 + 0.5j
    orbits = find_periodic_orbits(c, 2, [0.5 + 1j, -1 + 2j, 1 - 1j])
    assert orbits
    for o in orbits:
        pts = o.points
        for i, z in enumerate(pts):
            assert abs(cmath.exp(z) + c - pts[(i + 1) % len(pts)]) < 1e-9


def test_transversal_continuity():
    limit = A("| 0")
    seq = [Address((0,) * n + (1,), (0,)) for n in range(3, 9)]
    devs = transversal_continuity_check(-2.0, seq, limit, 1.0).per_element
    # the gap shrinks like exp(-F^n(t)) and reaches exactly 0 in double precision
    assert all(b <= a for a, b in zip(devs, devs[1:]))
    devs = transversal_continuity_check(-2.0, seq, limit, 0.3).per_element
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert transversal_continuity_check(-2.0, [limit], limit, 1.0).deviation == 0.0
    # agreement at index 0 is enough far out
    far = transversal_continuity_check(-2.0, [A("0 | 3")], limit, 30.0, 31.0, 3)
    assert far.deviation < 1e-6
