"""Unicritical polynomials z^D + c and the angle/address correspondence.

An angle theta in [0, 1) with base-D digits d_0 d_1 ... is identified with
the address whose entries are the digits moved into a signed window: a digit
d > D/2 becomes d - D.  Multiplication by D modulo 1 is then the shift.
Terminating expansions are written with a zero tail (theta = 0 is "| 0"),
which keeps that identity exact.

Dynamic rays of the polynomial are traced by the same pullback idea as the
exponential rays: a point of potential D^N t near infinity is pulled back N
times through D-th roots.
"""
from __future__ import annotations

import bisect
import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .address import Address, metric_distance, shift
from .errors import BranchAmbiguity, NoConvergence
from .rays import LandingResult, LandingStatus

TWO_PI = 2.0 * math.pi
SEED_LOG_RADIUS = math.log(1e8)
REFINE_EXTRA = 5
CRITICAL_RADIUS = 1e-8
_LOG_ONLY = 600.0


def _as_fraction(theta) -> Fraction:
    if isinstance(theta, str):
        theta = Fraction(theta.strip())
    theta = Fraction(theta)
    if not 0 <= theta < 1:
        raise ValueError("angles must lie in [0, 1)")
    return theta


def signed_digit(d: int, D: int) -> int:
    """Move a base-D digit into the signed alphabet (subtract D above D/2)."""
    return d - D if 2 * d > D else d


def alphabet_window(D: int) -> tuple[int, int]:
    """(lowest, highest) signed entry for base D."""
    return signed_digit((D // 2) + 1, D) if D > 2 else 0, D // 2


@dataclass(frozen=True)
class DAdicAngle:
    D: int
    theta: Fraction
    digits: Address
    # indices (within preperiod + one period) whose digit sits on the
    # boundary value D/2 of the signed window, even D only
    boundary_digits: tuple[int, ...] = field(default=(), compare=False)


def expand(theta, D: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Base-D digits of theta as (preperiod, period) by long division."""
    if D < 2:
        raise ValueError("D must be at least 2")
    theta = _as_fraction(theta)
    num, den = theta.numerator, theta.denominator
    seen: dict[int, int] = {}
    digits = []
    r = num
    while r not in seen:
        seen[r] = len(digits)
        r *= D
        digits.append(r // den)
        r %= den
    start = seen[r]
    return tuple(digits[:start]), tuple(digits[start:])


def d_adic_angle(theta, D: int) -> DAdicAngle:
    theta = _as_fraction(theta)
    pre, per = expand(theta, D)
    addr = Address(tuple(signed_digit(d, D) for d in pre),
                   tuple(signed_digit(d, D) for d in per))
    flags = ()
    if D % 2 == 0:
        L = addr.preperiod_len + addr.period_len
        flags = tuple(i for i in range(L) if addr.entry(i) == D // 2)
    return DAdicAngle(D, theta, addr, flags)


def angle_to_address(theta, D: int) -> Address:
    return d_adic_angle(theta, D).digits


def address_to_angle(s: Address, D: int) -> Fraction:
    """Inverse of angle_to_address: theta = sum (s_i mod D) D^{-i-1}."""
    lo, hi = alphabet_window(D)
    if not s.exact:
        raise ValueError("angles are only defined for exact addresses")
    if any(not lo <= v <= hi for v in s.preperiod + s.period):
        raise ValueError(f"address {s} has entries outside the base-{D} window [{lo}, {hi}]")
    L, P = s.preperiod_len, s.period_len
    head = sum((Fraction(v % D, D ** (i + 1)) for i, v in enumerate(s.preperiod)), Fraction(0))
    block = sum((Fraction(v % D, D ** (j + 1)) for j, v in enumerate(s.period)), Fraction(0))
    theta = head + block * Fraction(D ** P, D ** P - 1) / D ** L
    return theta % 1


def multiply_angle(theta, D: int) -> Fraction:
    return (D * _as_fraction(theta)) % 1


# polynomial rays

def poly(c: complex, z: complex, D: int) -> complex:
    return z ** D + c


class _Levels:
    """Per-level reference points ordered by decreasing potential."""

    def __init__(self):
        self.neg_u: list[float] = []
        self.z: list[complex] = []

    def add(self, u, z):
        i = bisect.bisect_left(self.neg_u, -u)
        self.neg_u.insert(i, -u)
        self.z.insert(i, z)

    def near(self, u):
        if not self.z:
            return None
        i = bisect.bisect_left(self.neg_u, -u)
        cands = [j for j in (i - 1, i) if 0 <= j < len(self.z)]
        j = min(cands, key=lambda j: abs(-self.neg_u[j] - u))
        return self.z[j]

    def last(self):
        return self.z[-1] if self.z else None


class PolyRayMarcher:
    """Continuation for the ray of angle theta of z^D + c toward potential 0.

    Potential here is the Green's function value t; level k of the chain is
    the ray of angle D^k theta at potential D^k t.  Above the safe potential
    the D-th root is the one whose argument is closest to 2 pi D^k theta.
    """

    def __init__(self, D: int, c: complex, theta, max_seg: float = 0.05):
        self.D = D
        self.c = complex(c)
        self.theta = _as_fraction(theta)
        self.s = angle_to_address(self.theta, D)
        self.angles = [self.theta]
        for _ in range(self.s.orbit_size - 1):
            self.angles.append(multiply_angle(self.angles[-1], D))
        self.levels = [_Levels() for _ in range(self.s.orbit_size)]
        # beyond log(2 + |c|) * 4 the plane is a near-copy of the c = 0 picture
        self.safe = 4.0 * math.log(2.0 + abs(self.c))
        self.max_seg = max_seg
        self.t: float | None = None

    def angle(self, k: int) -> Fraction:
        return self.angles[self.s.orbit_index(k)]

    def depth(self, t: float) -> int:
        n = 0
        while self.D ** n * t < SEED_LOG_RADIUS:
            n += 1
            if n > 2000:
                raise NoConvergence(f"potential {t!r} too small")
        return n

    def chain(self, t: float, depth: int | None = None):
        """Returns (points per level, potentials per level); logs used for huge levels."""
        D, c = self.D, self.c
        N = self.depth(t) if depth is None else depth
        pots = [t * D ** k for k in range(N + 1)]
        logs = [0j] * (N + 1)
        logs[N] = pots[N] + 1j * TWO_PI * float(self.angle(N))
        out = [0j] * (N + 1)
        for k in range(N - 1, -1, -1):
            L = logs[k + 1]
            if L.real > _LOG_ONLY:
                w = L
            else:
                zz = cmath.exp(L)
                if abs(zz - c) < CRITICAL_RADIUS:
                    raise BranchAmbiguity(f"pullback at t={t!r} passes the critical value")
                w = cmath.log(zz - c)
            base = w / D
            ref_pt = None
            if pots[k] < self.safe:
                ref_pt = self.levels[self.s.orbit_index(k)].near(pots[k])
            if ref_pt is None:
                # root whose argument is closest to the level angle
                target = TWO_PI * float(self.angle(k))
                m = round((target - base.imag) * D / TWO_PI)
                logs[k] = base + 1j * TWO_PI * m / D
            else:
                best = None
                for m in range(D):
                    cand = base + 1j * TWO_PI * m / D
                    d = abs(cmath.exp(cand) - ref_pt)
                    if best is None or d < best[0]:
                        best = (d, cand)
                logs[k] = best[1]
        for k in range(N + 1):
            out[k] = cmath.exp(logs[k]) if logs[k].real <= _LOG_ONLY else complex(math.inf)
        return out, pots

    def _store(self, zs, pots):
        for k in range(min(len(zs), len(self.levels))):
            if pots[k] < self.safe:
                self.levels[self.s.orbit_index(k)].add(pots[k], zs[k])

    def _ok(self, zs, pots):
        for k in range(min(len(zs), len(self.levels))):
            last = self.levels[self.s.orbit_index(k)].last()
            if last is not None and pots[k] < self.safe:
                scale = self.max_seg * max(1.0, abs(last) * 0.1)
                if abs(zs[k] - last) > scale:
                    return False
        return True

    def advance_to(self, target: float):
        if self.t is None:
            t0 = max(target, self.safe)
            zs, pots = self.chain(t0)
            self._store(zs, pots)
            self.t = t0
        h = 0.25
        zs = pots = None
        while self.t > target:
            tn = max(self.t * (1.0 - h), target)
            zs2, pots2 = self.chain(tn)
            if self._ok(zs2, pots2):
                self._store(zs2, pots2)
                self.t, zs, pots = tn, zs2, pots2
                h = min(0.5, h * 1.5)
            else:
                h *= 0.5
                if h < 1e-12:
                    raise NoConvergence(f"polynomial ray cannot be continued below t={self.t!r}")
        if zs is None:
            zs, pots = self.chain(target)
        return zs, pots

    def refine_error(self, t: float, zs, pots) -> float:
        deeper, _ = self.chain(t, depth=len(pots) - 1 + REFINE_EXTRA)
        return abs(deeper[0] - zs[0])


@dataclass(frozen=True)
class PolySample:
    t: float
    z: complex
    err: float


@dataclass(frozen=True)
class PolyRayTrace:
    D: int
    c: complex
    angle: Fraction
    samples: tuple[PolySample, ...]

    @property
    def points(self) -> list[complex]:
        return [s.z for s in self.samples]


def trace_poly_ray(D: int, c: complex, theta, potentials, tol: float = 1e-9,
                   max_seg: float = 0.05) -> PolyRayTrace:
    """Ray of angle theta for z^D + c at strictly decreasing Green potentials."""
    ts = [float(t) for t in potentials]
    if any(b >= a for a, b in zip(ts, ts[1:])) or (ts and ts[-1] <= 0):
        raise ValueError("potentials must be positive and strictly decreasing")
    m = PolyRayMarcher(D, c, theta, max_seg)
    out = []
    for t in ts:
        zs, pots = m.advance_to(t)
        err = m.refine_error(t, zs, pots)
        if not err < tol:
            raise NoConvergence(f"depth refinement error {err:.3g} at t={t!r}")
        out.append(PolySample(t, zs[0], err))
    return PolyRayTrace(D, complex(c), m.theta, tuple(out))


def _poly_newton(D: int, c: complex, z0: complex, p: int, tol: float = 1e-14):
    z = complex(z0)
    for _ in range(60):
        w, dw = z, 1.0 + 0j
        for _ in range(p):
            dw *= D * w ** (D - 1)
            w = w ** D + c
        g, dg = w - z, dw - 1.0
        if dg == 0 or not cmath.isfinite(dg):
            return None
        step = g / dg
        if abs(step) > 1.0:
            step /= abs(step)
        z -= step
        if abs(step) <= tol * (1.0 + abs(z)):
            w, dw = z, 1.0 + 0j
            for _ in range(p):
                dw *= D * w ** (D - 1)
                w = w ** D + c
            return z, abs(w - z), dw
    return None


def _poly_candidate(D: int, c: complex, zs, ell: int, p: int):
    """Newton on the cycle from the level-ell point, pulled back to level 0."""
    found = _poly_newton(D, c, zs[ell], p)
    if found is None:
        return None
    z, residual, mult = found
    for k in range(ell - 1, -1, -1):
        # pull back along the root closest to the ray's own point at that level
        base = cmath.log(z - c) / D
        roots = [cmath.exp(base + 1j * TWO_PI * j / D) for j in range(D)]
        z = min(roots, key=lambda r: abs(r - zs[k]))
    return z, residual, mult


def land_poly_ray(D: int, c: complex, theta, tol: float = 1e-9, *, t0: float = 1.0,
                  ratio: float = 0.5, t_min: float = 1e-12, window: int = 5,
                  capture: float = 25.0) -> LandingResult:
    """Landing point of a rational ray, refined by Newton on the periodic cycle.

    Rays landing at weakly repelling points approach them like a small power
    of t, so besides a Cauchy tail the ray counts as landed once Newton from
    two consecutive tail samples returns the same point and that point lies
    within ``capture`` tail steps of the last sample.
    """
    m = PolyRayMarcher(D, c, theta)
    s = m.s
    ell, p = s.preperiod_len, s.period_len
    tail = []
    cands = []
    t = t0
    try:
        while t >= t_min:
            zs, pots = m.advance_to(t)
            tail.append(zs[0])
            cand = _poly_candidate(D, c, zs, ell, p)
            cands.append(cand)
            if len(tail) >= window and max(abs(z - tail[-1]) for z in tail[-window:]) < tol:
                if cand is not None and abs(cand[0] - tail[-1]) <= 100.0 * tol + 1e-10:
                    return LandingResult(LandingStatus.LANDED, cand[0], cand[1], cand[2],
                                         t_last=m.t)
                return LandingResult(LandingStatus.NO_CONVERGENCE, tail[-1], t_last=m.t,
                                     note="Newton refinement failed")
            if len(cands) > 1 and cand is not None and cands[-2] is not None:
                step = abs(tail[-1] - tail[-2])
                if (abs(cand[0] - cands[-2][0]) < tol
                        and abs(cand[0] - tail[-1]) <= capture * step + 100.0 * tol):
                    return LandingResult(LandingStatus.LANDED, cand[0], cand[1], cand[2],
                                         t_last=m.t)
            t *= ratio
    except (NoConvergence, BranchAmbiguity) as exc:
        return LandingResult(LandingStatus.NO_CONVERGENCE, tail[-1] if tail else None,
                             t_last=m.t, note=str(exc))
    return LandingResult(LandingStatus.NO_CONVERGENCE, tail[-1] if tail else None,
                         t_last=m.t, note="potential schedule exhausted")


# indicators and correspondence

def renormalizability_indicator(s: Address, D: int, q_max: int, k_max: int):
    """[(q, [k with |s - sigma^k s| < 2/D^q])] for q = 1 .. q_max, compared exactly."""
    if not s.exact:
        raise ValueError("the indicator needs an exact address")
    dist = {k: metric_distance(s, shift(s, k)) for k in range(1, k_max + 1)}
    out = []
    for q in range(1, q_max + 1):
        bound = Fraction(2, D ** q)
        out.append((q, [k for k in range(1, k_max + 1) if dist[k] < bound]))
    return out


@dataclass(frozen=True)
class PairComparison:
    pair: tuple[Address, Address]
    poly_colands: bool | None
    exp_colands: bool | None
    poly_distance: float | None
    exp_distance: float | None
    error: str = ""

    @property
    def agree(self) -> bool | None:
        if self.poly_colands is None or self.exp_colands is None:
            return None
        return self.poly_colands == self.exp_colands


def landing_pattern_compare(D: int, c_poly: complex, c_exp: complex, pairs,
                            group_tol: float = 1e-7, tol: float = 1e-9):
    """Co-landing of each address pair for z^D + c_poly and for e^z + c_exp."""
    from .rays import land_ray

    out = []
    for a, b in pairs:
        errors = []
        pd = ed = None
        try:
            la = land_poly_ray(D, c_poly, address_to_angle(a, D), tol)
            lb = land_poly_ray(D, c_poly, address_to_angle(b, D), tol)
            if la.landed and lb.landed:
                pd = abs(la.point - lb.point)
            else:
                errors.append(f"polynomial landing: {la.note or lb.note}")
        except (ValueError, NoConvergence, BranchAmbiguity) as exc:
            errors.append(f"polynomial: {exc}")
        ea, eb = land_ray(c_exp, a, tol), land_ray(c_exp, b, tol)
        if ea.landed and eb.landed:
            ed = abs(ea.point - eb.point)
        else:
            errors.append(f"exponential landing: {ea.note or eb.note}")
        out.append(PairComparison(
            (a, b),
            None if pd is None else pd < group_tol,
            None if ed is None else ed < group_tol,
            pd, ed, "; ".join(errors)))
    return out
