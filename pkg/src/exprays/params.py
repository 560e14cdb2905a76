"""Parameter rays G_s(t) and wake membership.

A parameter c lies on G_s at potential t exactly when the dynamic ray
g_s^c passes through c at that potential.  Tracing G_s is therefore a
continuation in t of the root of h(c) = g_s^c(t) - c, with h evaluated by the
same pullback chain the dynamic marcher uses.  The derivative of h is taken
by central differences.

Landing uses the tail of the continuation to seed an algebraic refinement:
periodic rays land at parabolic parameters (a cycle with (f^p)' = 1), and
preperiodic rays at parameters with f^{l+p}(c) = f^l(c).
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .address import Address
from .errors import (ContinuationBreak, LandingFailure, NoConvergence, NumericFailure,
                     SingularObstruction)
from .puzzle import GROUP_TOL, SIDE_TOL, T_JOIN, RayCurve, _closed_curve, _probe_crossings
from .rays import (TWO_PI, LandingResult, LandingStatus, OrbitType, RayMarcher,
                   find_periodic_orbits, geometric_potentials, land_ray, newton_periodic)

PARAM_T_START = 20.0
PARAM_MAX_SEG = 0.05
NEWTON_ITER = 30
MAX_HALVINGS = 8
INDIFFERENT_BAND = 0.05
ESCAPE_GUARD = 1e100

PARAM_LANDING_T0 = 2.0
PARAM_LANDING_RATIO = 0.5
PARAM_LANDING_T_MIN = 1e-3


@dataclass(frozen=True)
class ParamRaySample:
    t: float
    c: complex
    err: float


@dataclass(frozen=True)
class ParamRayTrace:
    address: Address
    samples: tuple[ParamRaySample, ...]
    # Newton iterations used for every accepted continuation step
    iterations: tuple[int, ...] = field(default=(), compare=False)

    @property
    def parameters(self) -> list[complex]:
        return [s.c for s in self.samples]

    @property
    def potentials(self) -> list[float]:
        return [s.t for s in self.samples]


class _ParamSolver:
    """Continuation of the root of g_s^c(t) - c toward smaller t."""

    def __init__(self, s: Address, max_seg: float = PARAM_MAX_SEG, solve_tol: float = 1e-9):
        self.s = s
        self.max_seg = max_seg
        self.solve_tol = solve_tol
        # the marcher only supplies the pullback chain and the branch references;
        # its own parameter is replaced at every evaluation
        self.m = RayMarcher(complex(PARAM_T_START), s, max_seg=max_seg)
        self.t: float | None = None
        self.c: complex | None = None
        self.prev: tuple[float, complex] | None = None
        self.iterations: list[int] = []
        self.trail: list[tuple[float, complex]] = []

    def _h(self, t: float, c: complex):
        zs, pots = self.m.chain(t, c=c)
        return zs[0] - c, zs, pots

    def error(self, t: float, c: complex) -> float:
        """|h(c)| plus the depth refinement estimate of g_s^c(t)."""
        zs, pots = self.m.chain(t, c=c)
        deeper, _ = self.m.chain(t, c=c, depth=len(pots) - 1 + 5)
        return abs(zs[0] - c) + abs(deeper[0] - zs[0])

    def solve(self, t: float, c0: complex):
        """Newton for h(c) = 0 at potential t.  Returns (c, |h|, zs, pots, iterations)."""
        c = complex(c0)
        it = 0
        for it in range(1, NEWTON_ITER + 1):
            r, _, _ = self._h(t, c)
            d = 1e-6 * (1.0 + abs(c))
            dh = (self._h(t, c + d)[0] - self._h(t, c - d)[0]) / (2.0 * d)
            if dh == 0 or not cmath.isfinite(dh):
                raise NoConvergence(f"degenerate derivative at t={t!r}")
            step = r / dh
            if abs(step) > 1.0:
                step /= abs(step)
            c -= step
            if abs(step) < 1e-14 * (1.0 + abs(c)):
                break
        r, zs, pots = self._h(t, c)
        return c, abs(r), zs, pots, it

    def start(self, t: float):
        s0 = self.s.entry(0)
        c, err, zs, pots, it = self.solve(t, t + 1j * TWO_PI * s0)
        if not err < self.solve_tol:
            raise ContinuationBreak(t, f"no root near the asymptotic seed (|h| = {err:.3g})")
        self._accept(t, c, zs, pots, it)

    def _accept(self, t, c, zs, pots, it):
        if self.t is not None:
            self.prev = (self.t, self.c)
        self.t, self.c = t, c
        self.m.store(zs, pots, c)
        self.iterations.append(it)
        self.trail.append((t, c))

    def _guess(self, tn: float) -> complex:
        if self.prev is None:
            return self.c
        t0, c0 = self.prev
        return self.c + (self.c - c0) * (tn - self.t) / (self.t - t0)

    def _displacement_ok(self, c, zs, pots) -> bool:
        if abs(c - self.c) > self.max_seg:
            return False
        safe = self.m.safe_potential(c)
        for j in range(min(self.m.nrays, len(zs))):
            last = self.m.polys[j].last()
            if last is not None and pots[j] < safe and abs(zs[j] - last) > self.max_seg:
                return False
        return True

    def advance_to(self, target: float):
        if self.t is None:
            self.start(max(target, PARAM_T_START))
        if target > self.t:
            raise ValueError("the continuation only moves toward smaller potential")
        h = 0.1
        failures = 0
        while self.t > target:
            tn = max(self.t * (1.0 - h), target)
            try:
                c, err, zs, pots, it = self.solve(tn, self._guess(tn))
                ok = err < self.solve_tol
            except (NoConvergence, SingularObstruction, OverflowError, ValueError):
                ok, err = False, math.inf
            if ok and self._displacement_ok(c, zs, pots):
                self._accept(tn, c, zs, pots, it)
                failures = 0
                h = min(0.3, h * 1.5)
                continue
            h *= 0.5
            if not ok:
                failures += 1
                if failures > MAX_HALVINGS:
                    raise ContinuationBreak(tn, f"Newton failed after {MAX_HALVINGS} halvings")
            if h < 1e-12:
                raise ContinuationBreak(tn, "step size underflow")
        return self.c


def trace_param_ray(s: Address, t_lo: float, t_hi: float, n_samples: int,
                    tol: float = 1e-9, max_seg: float = PARAM_MAX_SEG) -> ParamRayTrace:
    """Samples of G_s at geometrically spaced potentials from t_hi down to t_lo.

    The continuation starts at max(t_hi, 20) from the seed t + 2*pi*i*s_0.
    """
    if not s.exact:
        raise ValueError("parameter rays need an exact address")
    solver = _ParamSolver(s, max_seg, tol)
    samples = []
    for t in geometric_potentials(t_lo, t_hi, n_samples):
        c = solver.advance_to(t)
        err = solver.error(t, c)
        samples.append(ParamRaySample(t, c, err))
    return ParamRayTrace(s, tuple(samples), tuple(solver.iterations))


def param_ray_point(s: Address, t: float, tol: float = 1e-9) -> complex:
    return trace_param_ray(s, t, t, 1, tol).samples[0].c


# algebraic refinement of landing parameters

def _orbit_c_derivs(c: complex, z: complex, n: int, dz0: complex = 1.0, dc0: complex = 0.0):
    """Points z_0..z_n of the orbit of z with d/dz and d/dc derivatives."""
    pts, dz, dc = [z], [dz0], [dc0]
    for _ in range(n):
        w = pts[-1]
        if w.real > 700:
            raise OverflowError("orbit overflows")
        e = cmath.exp(w)
        pts.append(e + c)
        dz.append(e * dz[-1])
        dc.append(e * dc[-1] + 1.0)
    return pts, dz, dc


def _misiurewicz_newton(c0: complex, ell: int, p: int, tol: float = 1e-14):
    """Newton on f^{l+p}(c) - f^l(c) = 0 (orbit of the singular value)."""
    c = complex(c0)
    for _ in range(60):
        pts, _, dc = _orbit_c_derivs(c, c, ell + p, dz0=0.0, dc0=1.0)
        # the orbit starts at z_0 = c, so z_0 depends on c with derivative 1
        g = pts[ell + p] - pts[ell]
        dg = dc[ell + p] - dc[ell]
        if dg == 0:
            return None
        step = g / dg
        if abs(step) > 1.0:
            step /= abs(step)
        c -= step
        if abs(step) < tol * (1.0 + abs(c)):
            pts, _, _ = _orbit_c_derivs(c, c, ell + p, dz0=0.0, dc0=1.0)
            return c, abs(pts[ell + p] - pts[ell])
    return None


def _parabolic_newton(c0: complex, z0: complex, q: int, omega: complex = 1.0,
                      tol: float = 1e-14):
    """Newton in (c, z) on f^q(z) = z and (f^q)'(z) = omega."""
    c, z = complex(c0), complex(z0)
    for _ in range(60):
        pts, dz, dc = _orbit_c_derivs(c, z, q)
        mult = cmath.exp(sum(pts[:q]))
        g1 = pts[q] - z
        g2 = mult - omega
        # derivatives of sum z_i with respect to z and c
        sz = sum(dz[:q])
        sc = sum(dc[:q])
        a11, a12 = dz[q] - 1.0, dc[q]
        a21, a22 = mult * sz, mult * sc
        det = a11 * a22 - a12 * a21
        if det == 0 or not cmath.isfinite(det):
            return None
        dzs = (g1 * a22 - g2 * a12) / det
        dcs = (a11 * g2 - a21 * g1) / det
        n = max(abs(dzs), abs(dcs))
        if n > 1.0:
            dzs, dcs = dzs / n, dcs / n
        z -= dzs
        c -= dcs
        if n < tol * (1.0 + abs(c) + abs(z)):
            pts, _, _ = _orbit_c_derivs(c, z, q)
            return c, z, abs(pts[q] - z), cmath.exp(sum(pts[:q]))
    return None


def _cycle_period(c: complex, z: complex, p: int) -> int:
    w = z
    for q in range(1, p + 1):
        w = cmath.exp(w) + c
        if p % q == 0 and abs(w - z) < 1e-8 * (1.0 + abs(z)):
            return q
    return p


def _singular_orbit_seeds(c: complex, n: int = 60) -> list[complex]:
    seeds, z = [], complex(c)
    for _ in range(n):
        if z.real > 50 or abs(z) > ESCAPE_GUARD:
            break
        z = cmath.exp(z) + c
        seeds.append(z)
    return seeds


def _refine_landing(s: Address, c_tail: complex):
    """Algebraic landing candidate near c_tail: (c, residual, multiplier or None)."""
    ell, p = s.preperiod_len, s.period_len
    if ell:
        try:
            out = _misiurewicz_newton(c_tail, ell, p)
        except OverflowError:
            return None
        if out is None:
            return None
        c, res = out
        return c, res, None
    # near a parabolic parameter the singular orbit lingers at the cycle.  The
    # cycle has some period q dividing p and its multiplier is a (p/q)-th root
    # of unity, so (f^p)' = 1 there; solving for the q-cycle keeps the system
    # regular in the satellite case.
    best = None
    seeds = _singular_orbit_seeds(c_tail)
    for q in (d for d in range(1, p + 1) if p % d == 0):
        r = p // q
        for z0 in seeds:
            try:
                if r == 1:
                    out = _parabolic_newton(c_tail, z0, p)
                    if out is not None and (best is None
                                            or abs(out[0] - c_tail) < abs(best[0] - c_tail)):
                        best = out
                    continue
                found = newton_periodic(c_tail, z0, q)
                if found is None:
                    continue
                zq, _, _, lam = found
                k = round(cmath.phase(lam) * r / TWO_PI)
                omega = cmath.exp(1j * TWO_PI * k / r)
                if r > 1 and k % r == 0:
                    continue
                out = _parabolic_newton(c_tail, zq, q, omega)
            except OverflowError:
                continue
            if out is None:
                continue
            if best is None or abs(out[0] - c_tail) < abs(best[0] - c_tail):
                best = out
    if best is None:
        return None
    c, z, res, mult = best
    # report the multiplier of f^p on the cycle
    return c, res, mult ** (p // _cycle_period(c, z, p))


@dataclass(frozen=True)
class ParamLanding:
    """Landing of a parameter ray; ``result`` carries the usual landing fields."""

    address: Address
    result: LandingResult
    tail: tuple[tuple[float, complex], ...] = field(compare=False, default=())
    warning: str = field(compare=False, default="")

    @property
    def landed(self) -> bool:
        return self.result.landed

    @property
    def point(self) -> complex | None:
        return self.result.point


def _check_landing_type(s: Address, c: complex, mult: complex | None) -> str:
    if s.preperiod_len:
        return ""
    if mult is not None:
        # Newton on f^p(z) - z is ill-conditioned at the double root of a
        # parabolic cycle, so the multiplier of the (c, z) solve is used
        if abs(abs(mult) - 1.0) <= INDIFFERENT_BAND:
            return ""
        return f"cycle multiplier {abs(mult):.6g} outside the indifferent band"
    p = s.period_len
    seeds = _singular_orbit_seeds(c) or [0j]
    orbits = find_periodic_orbits(c, p, seeds, band=INDIFFERENT_BAND)
    if any(o.classification is OrbitType.INDIFFERENT for o in orbits):
        return ""
    return "no indifferent cycle found at the landing parameter"


def land_param_ray(s: Address, tol: float = 1e-9, *, t0: float = PARAM_LANDING_T0,
                   ratio: float = PARAM_LANDING_RATIO, t_min: float = PARAM_LANDING_T_MIN,
                   t_start: float = PARAM_T_START, window: int = 5,
                   max_seg: float = PARAM_MAX_SEG) -> ParamLanding:
    """Follow G_s toward t = 0 and identify the landing parameter.

    At each potential of the schedule t0 * ratio^j the current parameter seeds
    the algebraic refinement.  The ray is declared landed when two consecutive
    schedule points refine to the same root within tol, or when the raw tail
    itself is Cauchy within tol over ``window`` samples.
    """
    if not s.exact:
        raise ValueError("landing needs an exact address")
    solver = _ParamSolver(s, max_seg, min(tol, 1e-9))
    solver.start(max(t_start, t0))
    tail: list[tuple[float, complex]] = []
    refined: list[complex | None] = []
    extra: list = []
    t = t0
    status, point, residual, mult, note = LandingStatus.NO_CONVERGENCE, None, None, None, ""
    try:
        while t >= t_min:
            c = solver.advance_to(t)
            tail.append((t, c))
            ref = _refine_landing(s, c) if len(tail) > 1 else None
            cand = None
            if ref is not None:
                step = abs(c - tail[-2][1])
                # the root has to be within reach of the tail
                if abs(ref[0] - c) < max(0.05, 4.0 * step):
                    cand = ref
            refined.append(cand[0] if cand else None)
            extra.append(cand)
            if (len(refined) > 1 and refined[-1] is not None and refined[-2] is not None
                    and abs(refined[-1] - refined[-2]) < tol):
                status, point = LandingStatus.LANDED, refined[-1]
                residual, mult = cand[1], cand[2]
                break
            if len(tail) >= window:
                last = tail[-1][1]
                if max(abs(cc - last) for _, cc in tail[-window:]) < tol:
                    status, point = LandingStatus.LANDED, last
                    break
            t *= ratio
        else:
            point = tail[-1][1] if tail else None
            note = "potential schedule exhausted"
    except SingularObstruction as exc:
        status, note = LandingStatus.SINGULAR_OBSTRUCTION, str(exc)
        point = tail[-1][1] if tail else None
    except (NoConvergence, ContinuationBreak) as exc:
        note = str(exc)
        point = tail[-1][1] if tail else None
    warning = ""
    if status is LandingStatus.LANDED:
        warning = _check_landing_type(s, point, mult)
        if s.preperiod_len and residual is not None and residual > 1e-6:
            warning = f"orbit relation residual {residual:.3g}"
    result = LandingResult(status, point, residual, mult, t_last=tail[-1][0] if tail else None,
                           note=note)
    return ParamLanding(s, result, tuple(tail), warning)


# wake membership

class Verdict(enum.Enum):
    INSIDE = "Inside"
    OUTSIDE = "Outside"
    UNDECIDED = "Undecided"


class WakeMethod(enum.Enum):
    DYNAMICAL = "Dynamical"
    PARAMETRIC = "Parametric"


@dataclass(frozen=True)
class WakeVerdict:
    inside: Verdict
    method: WakeMethod
    evidence: dict = field(compare=False, default_factory=dict)


ESCAPE_HORIZON = 10


def _escapes(c: complex, n: int = ESCAPE_HORIZON) -> int | None:
    # a short horizon: rounding drives orbits off repelling cycles within a
    # few dozen iterates, which must not be mistaken for escape
    z = complex(c)
    for j in range(1, n + 1):
        if z.real > 700:
            return j
        z = cmath.exp(z) + c
        if abs(z) > ESCAPE_GUARD or not cmath.isfinite(z):
            return j
    return None


def wake_test_dynamical(c: complex, s_plus: Address, s_minus: Address,
                        group_tol: float = GROUP_TOL, tol: float = 1e-9) -> WakeVerdict:
    """Inside iff the two dynamic rays land together at parameter c."""
    c = complex(c)
    j = _escapes(c)
    if j is not None:
        return WakeVerdict(Verdict.UNDECIDED, WakeMethod.DYNAMICAL,
                           {"reason": "escaping parameter", "escape_iterate": j})
    points = []
    for s in (s_plus, s_minus):
        res = land_ray(c, s, tol)
        if not res.landed:
            return WakeVerdict(Verdict.UNDECIDED, WakeMethod.DYNAMICAL,
                               {"reason": f"ray {s} did not land ({res.status.value})",
                                "note": res.note})
        points.append(res.point)
    d = abs(points[0] - points[1])
    evidence = {"landing_distance": d, "landing_points": tuple(points)}
    if d < group_tol:
        verdict = Verdict.INSIDE
    elif d > 10.0 * group_tol:
        verdict = Verdict.OUTSIDE
    else:
        verdict = Verdict.UNDECIDED
    return WakeVerdict(verdict, WakeMethod.DYNAMICAL, evidence)


def _param_curve(s: Address, landing: ParamLanding, t_far: float, max_seg: float) -> RayCurve:
    # densely sampled parameter ray from the landing parameter out to t_far
    solver = _ParamSolver(s, max_seg)
    solver.start(t_far)
    t_end = landing.tail[-1][0] if landing.tail else PARAM_LANDING_T_MIN
    solver.advance_to(t_end)
    trail = solver.trail[::-1]
    pots = np.array([0.0] + [t for t, _ in trail])
    pts = np.array([landing.point] + [c for _, c in trail])
    return RayCurve(s, pots, pts)


def wake_test_parametric(c: complex, s_plus: Address, s_minus: Address,
                         tol: float = SIDE_TOL, landing_tol: float = 1e-6,
                         max_seg: float = PARAM_MAX_SEG) -> WakeVerdict:
    """Inside iff c is enclosed by the two co-landing parameter rays.

    The rays are closed up at their common landing parameter and by the
    vertical junction at Re = 50; the parity of crossings of a leftward
    horizontal probe from c decides the side.
    """
    c = complex(c)
    lands = [land_param_ray(s) for s in (s_plus, s_minus)]
    for s, ln in zip((s_plus, s_minus), lands):
        if not ln.landed:
            raise LandingFailure(s, ln.result.status.value)
    d = abs(lands[0].point - lands[1].point)
    if d > landing_tol:
        raise ValueError(f"parameter rays {s_plus} and {s_minus} do not land together "
                         f"(distance {d:.3g})")
    curves = [_param_curve(s, ln, T_JOIN, max_seg) for s, ln in zip((s_plus, s_minus), lands)]
    poly = _closed_curve(curves[0], curves[1])
    try:
        n = _probe_crossings(poly, c, tol, strict=True)
    except NumericFailure as exc:
        return WakeVerdict(Verdict.UNDECIDED, WakeMethod.PARAMETRIC, {"reason": str(exc)})
    verdict = Verdict.INSIDE if n % 2 == 1 else Verdict.OUTSIDE
    return WakeVerdict(verdict, WakeMethod.PARAMETRIC,
                       {"crossings": n, "landing_parameter": lands[0].point})
