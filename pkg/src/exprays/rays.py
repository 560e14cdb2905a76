"""Dynamic rays of f_c(z) = exp(z) + c: tracing, landing and periodic points.

A ray point g_s(t) is obtained by pulling back the asymptotic seed
F^N(t) + 2*pi*i*s_N through N logarithms.  At large potential the branch of
each logarithm is the strip branch of the corresponding address entry.  At
small potential that rule breaks down as soon as the rays separate c from
-infinity, so below a safe potential the branch is chosen by continuation:
every ray in the shift orbit of s keeps a polyline of points already computed,
and a new point takes the branch closest to the polyline sample of nearest
potential.  The march in t only accepts steps that move every tracked point by
less than ``max_seg``, which keeps those references valid.
"""
from __future__ import annotations

import bisect
import cmath
import enum
import math
from dataclasses import dataclass, field

from .address import Address, growth_model
from .errors import NoConvergence, SingularObstruction

TWO_PI = 2.0 * math.pi
SINGULAR_RADIUS = 1e-8
SEED_BASE = 50.0
MAX_DEPTH = 20000
REFINE_EXTRA = 5

LANDING_T0 = 2.0
LANDING_RATIO = 0.5
LANDING_T_MIN = 1e-12
CAUCHY_WINDOW = 5
NEWTON_MAX_ITER = 50

_EXP_GUARD = 700.0


def f(c: complex, z: complex) -> complex:
    return cmath.exp(z) + c


def iterate(c: complex, z: complex, n: int) -> complex:
    for _ in range(n):
        z = cmath.exp(z) + c
    return z


def strip_log(w: complex, m: int) -> complex:
    """Log_m(w): the logarithm with imaginary part in (2*pi*m - pi, 2*pi*m + pi]."""
    return cmath.log(w) + 1j * TWO_PI * m


def _nearest_branch(w: complex, ref: complex) -> complex:
    m = round((ref.imag - w.imag) / TWO_PI)
    return w + 1j * TWO_PI * m


class _Polyline:
    """Points of one ray ordered by decreasing potential."""

    __slots__ = ("neg_u", "z")

    def __init__(self):
        self.neg_u: list[float] = []
        self.z: list[complex] = []

    def add(self, u: float, z: complex):
        if self.neg_u and -u < self.neg_u[-1]:
            return
        self.neg_u.append(-u)
        self.z.append(z)

    def last(self):
        return self.z[-1] if self.z else None

    def near(self, u: float):
        if not self.z:
            return None
        i = bisect.bisect_left(self.neg_u, -u)
        if i == len(self.z):
            return self.z[-1]
        if i == 0:
            return self.z[0]
        above, below = -self.neg_u[i - 1], -self.neg_u[i]
        return self.z[i] if abs(below - u) < abs(above - u) else self.z[i - 1]


def potential_levels(t: float, threshold: float, max_depth: int = MAX_DEPTH) -> list[float]:
    """[t, F(t), F^2(t), ...] up to the first value above ``threshold``."""
    pots = [t]
    while pots[-1] <= threshold:
        if len(pots) > max_depth:
            raise NoConvergence(f"pullback depth exceeds {max_depth} at t={t!r}")
        pots.append(growth_model(pots[-1]))
    return pots


class RayMarcher:
    """Continuation state for the ray of address ``s`` at parameter ``c``.

    The marcher moves monotonically toward smaller potential.  ``history``
    keeps every accepted (t, z) pair when ``record`` is set.
    """

    def __init__(self, c: complex, s: Address, *, max_seg: float = 0.1,
                 singular_radius: float = SINGULAR_RADIUS, max_depth: int = MAX_DEPTH,
                 record: bool = False):
        self.c = complex(c)
        self.s = s
        self.max_seg = max_seg
        self.singular_radius = singular_radius
        self.max_depth = max_depth
        norm = s.sup_norm
        self._log_norm = math.log1p(norm)
        self._safe = 10.0 + abs(self.c) + self._log_norm
        self.threshold = min(SEED_BASE + norm, 700.0)
        self.nrays = s.orbit_size
        self.polys = [_Polyline() for _ in range(self.nrays)]
        self.record = record
        self.history: list[tuple[float, complex]] = []
        self.t: float | None = None
        self.z: complex | None = None
        self.steps = 0
        self.rejections = 0
        self.max_level = 0

    def safe_potential(self, c: complex | None = None) -> float:
        if c is None:
            return self._safe
        return 10.0 + abs(c) + self._log_norm

    def chain(self, t: float, c: complex | None = None, depth: int | None = None):
        """Pull back the seed at potential t; returns (points per level, potentials)."""
        c = self.c if c is None else complex(c)
        s = self.s
        if depth is None:
            pots = potential_levels(t, self.threshold, self.max_depth)
        else:
            # levels whose potential overflows add nothing: the seed correction
            # there is below e^-700, so the refinement stops at the last finite level
            pots = [t]
            for _ in range(depth):
                nxt = growth_model(pots[-1])
                if math.isinf(nxt):
                    break
                pots.append(nxt)
        N = len(pots) - 1
        if not s.exact and N >= s.window_len:
            raise NoConvergence(f"address window {s.window_len} shorter than depth {N}")
        safe = self.safe_potential(c)
        out = [0j] * (N + 1)
        top = pots[N]
        if math.isinf(top):
            raise NoConvergence(f"seed potential overflows at t={t!r}")
        z = top + 1j * TWO_PI * s.entry(N)
        out[N] = z
        polys = self.polys
        for k in range(N - 1, -1, -1):
            d = z - c
            if abs(d) < self.singular_radius:
                raise SingularObstruction(t, k, abs(d))
            w = cmath.log(d)
            u = pots[k]
            ref = polys[s.orbit_index(k)].near(u) if u < safe else None
            if ref is None:
                z = w + 1j * TWO_PI * s.entry(k)
            else:
                z = _nearest_branch(w, ref)
            out[k] = z
        return out, pots

    def refine_error(self, t: float, zs: list[complex], pots: list[float]) -> float:
        """|z_N - z_{N+5}|, the depth refinement estimate at potential t."""
        N = len(pots) - 1
        deeper, _ = self.chain(t, depth=N + REFINE_EXTRA)
        return abs(deeper[0] - zs[0])

    def store(self, zs, pots, c: complex | None = None):
        safe = self.safe_potential(c)
        for j in range(min(self.nrays, len(zs))):
            if pots[j] < safe:
                self.polys[j].add(pots[j], zs[j])

    def displacement_ok(self, zs, pots, c: complex | None = None) -> bool:
        if self.z is not None and abs(zs[0] - self.z) > self.max_seg:
            return False
        safe = self.safe_potential(c)
        for j in range(min(self.nrays, len(zs))):
            last = self.polys[j].last()
            if last is not None and pots[j] < safe and abs(zs[j] - last) > self.max_seg:
                return False
        return True

    def start(self, t: float):
        t0 = max(t, self.safe_potential())
        zs, pots = self.chain(t0)
        self._accept(t0, zs, pots)
        return zs, pots

    def _accept(self, t, zs, pots):
        self.t = t
        self.z = zs[0]
        self.max_level = max(self.max_level, len(pots) - 1)
        self.store(zs, pots)
        self.steps += 1
        if self.record:
            self.history.append((t, zs[0]))

    def advance_to(self, target: float):
        """March down to potential ``target``; returns (points per level, potentials)."""
        if self.t is None:
            zs, pots = self.start(target)
            if self.t == target:
                return zs, pots
        if target > self.t:
            raise ValueError("the marcher only moves toward smaller potential")
        if target == self.t:
            return self.chain(target)
        h = 0.25
        zs = pots = None
        t = self.t
        while t > target:
            tn = max(t * (1.0 - h), target)
            zs2, pots2 = self.chain(tn)
            if self.displacement_ok(zs2, pots2):
                self._accept(tn, zs2, pots2)
                t = tn
                zs, pots = zs2, pots2
                h = min(0.5, h * 1.5)
            else:
                self.rejections += 1
                h *= 0.5
                if h < 1e-12:
                    raise NoConvergence(f"ray {self.s} cannot be continued below t={t!r}")
        if zs is None:
            zs, pots = self.chain(target)
        return zs, pots


@dataclass(frozen=True)
class RaySample:
    t: float
    z: complex
    err: float


@dataclass(frozen=True)
class RayTrace:
    c: complex
    address: Address
    samples: tuple[RaySample, ...]
    depth: int

    @property
    def points(self) -> list[complex]:
        return [s.z for s in self.samples]

    @property
    def potentials(self) -> list[float]:
        return [s.t for s in self.samples]


def geometric_potentials(t_lo: float, t_hi: float, n: int) -> list[float]:
    if not 0 < t_lo <= t_hi:
        raise ValueError("need 0 < t_lo <= t_hi")
    if n < 1:
        raise ValueError("need at least one sample")
    if n == 1:
        return [t_hi]
    r = (t_lo / t_hi) ** (1.0 / (n - 1))
    ts = [t_hi * r ** j for j in range(n)]
    ts[-1] = t_lo
    return ts


def trace_ray_at(c: complex, s: Address, potentials, tol: float = 1e-9,
                 max_seg: float = 0.1, marcher: RayMarcher | None = None) -> RayTrace:
    """Trace the ray at the given strictly decreasing potentials."""
    ts = [float(t) for t in potentials]
    if any(b >= a for a, b in zip(ts, ts[1:])):
        raise ValueError("potentials must be strictly decreasing")
    if ts and ts[-1] <= 0:
        raise ValueError("potentials must be positive")
    m = marcher if marcher is not None else RayMarcher(c, s, max_seg=max_seg)
    samples = []
    depth = 0
    for t in ts:
        zs, pots = m.advance_to(t)
        N = len(pots) - 1
        err = m.refine_error(t, zs, pots)
        z = zs[0]
        if not err < tol:
            # depth doubling before giving up
            deep, _ = m.chain(t, depth=2 * N)
            deeper, _ = m.chain(t, depth=2 * N + REFINE_EXTRA)
            err = abs(deeper[0] - deep[0])
            z = deep[0]
            N = 2 * N
            if not err < tol:
                raise NoConvergence(f"depth refinement error {err:.3g} >= tol at t={t!r}")
        depth = max(depth, N)
        samples.append(RaySample(t, z, err))
    return RayTrace(complex(c), s, tuple(samples), depth)


def trace_ray(c: complex, s: Address, t_lo: float, t_hi: float, n_samples: int,
              tol: float = 1e-9, max_seg: float = 0.1) -> RayTrace:
    """Trace g_s^c at ``n_samples`` geometrically spaced potentials from t_hi down to t_lo."""
    return trace_ray_at(c, s, geometric_potentials(t_lo, t_hi, n_samples), tol, max_seg)


def ray_point(c: complex, s: Address, t: float) -> complex:
    return trace_ray_at(c, s, [t]).samples[0].z


class LandingStatus(enum.Enum):
    LANDED = "Landed"
    NO_CONVERGENCE = "NoConvergence"
    SINGULAR_OBSTRUCTION = "SingularObstruction"


@dataclass(frozen=True)
class LandingResult:
    status: LandingStatus
    point: complex | None = None
    residual: float | None = None
    multiplier: complex | None = None
    # potential of the last tail sample and a short explanation for failures
    t_last: float | None = field(default=None, compare=False)
    note: str = field(default="", compare=False)

    @property
    def landed(self) -> bool:
        return self.status is LandingStatus.LANDED


def cycle_orbit(c: complex, z: complex, p: int):
    """[z, f(z), ..., f^p(z)] or None when an iterate is too large to exponentiate."""
    orb = [z]
    for _ in range(p):
        if orb[-1].real > _EXP_GUARD:
            return None
        orb.append(cmath.exp(orb[-1]) + c)
    return orb


def cycle_multiplier(points) -> complex:
    """(f^p)'(z) = prod exp(z_i) = exp(sum z_i)."""
    total = sum(points)
    if total.real > _EXP_GUARD:
        return complex(math.inf, 0)
    return cmath.exp(total)


def newton_periodic(c: complex, z0: complex, p: int, tol: float = 1e-14,
                    max_iter: int = NEWTON_MAX_ITER):
    """Newton on f^p(z) - z.  Returns (z, orbit, residual, multiplier) or None."""
    z = complex(z0)
    for _ in range(max_iter):
        orb = cycle_orbit(c, z, p)
        if orb is None:
            return None
        g = orb[p] - z
        dg = cycle_multiplier(orb[:p]) - 1.0
        if dg == 0 or not cmath.isfinite(dg):
            return None
        step = g / dg
        if abs(step) > 1.0:
            step /= abs(step)
        z -= step
        if abs(step) <= tol * (1.0 + abs(z)):
            break
    else:
        return None
    orb = cycle_orbit(c, z, p)
    if orb is None:
        return None
    return z, orb[:p], abs(orb[p] - z), cycle_multiplier(orb[:p])


def _pull_back_along(c: complex, point: complex, chain_refs) -> complex:
    """Pull ``point`` back through the levels whose reference points are chain_refs."""
    for ref in reversed(chain_refs):
        point = _nearest_branch(cmath.log(point - c), ref)
    return point


def land_ray(c: complex, s: Address, tol: float = 1e-9, *, t0: float = LANDING_T0,
             ratio: float = LANDING_RATIO, t_min: float = LANDING_T_MIN,
             window: int = CAUCHY_WINDOW, max_depth: int = MAX_DEPTH,
             marcher: RayMarcher | None = None) -> LandingResult:
    """Follow the ray toward t = 0 and identify its landing point.

    For periodic s the Cauchy tail seeds Newton on f^p(z) - z.  For
    preperiodic s the periodic ray sigma^l(s) is landed first and the result
    is pulled back along the branches the ray itself uses.  The multiplier
    reported for a preperiodic ray is that of the cycle it eventually lands on.
    """
    if not s.exact:
        raise ValueError("landing needs an exact address")
    c = complex(c)
    m = marcher if marcher is not None else RayMarcher(c, s, max_depth=max_depth)
    ell, p = s.preperiod_len, s.period_len
    tail: list[complex] = []
    zs = None
    t = t0
    try:
        if m.t is not None and m.t < t:
            t = m.t
        while t >= t_min:
            zs, pots = m.advance_to(t)
            tail.append(zs[0])
            if len(tail) >= window:
                last = tail[-1]
                if max(abs(z - last) for z in tail[-window:]) < tol:
                    break
            t *= ratio
        else:
            return LandingResult(LandingStatus.NO_CONVERGENCE, tail[-1] if tail else None,
                                 t_last=m.t, note="potential schedule exhausted")
    except SingularObstruction as exc:
        return LandingResult(LandingStatus.SINGULAR_OBSTRUCTION, tail[-1] if tail else None,
                             t_last=m.t, note=str(exc))
    except NoConvergence as exc:
        return LandingResult(LandingStatus.NO_CONVERGENCE, tail[-1] if tail else None,
                             t_last=m.t, note=str(exc))

    seed = zs[ell]
    found = newton_periodic(c, seed, p)
    if found is None:
        return LandingResult(LandingStatus.NO_CONVERGENCE, tail[-1], t_last=m.t,
                             note="Newton refinement failed")
    zp, orbit, residual, mult = found
    point = _pull_back_along(c, zp, zs[:ell]) if ell else zp
    if abs(point - tail[-1]) > 100.0 * tol + 1e-10:
        return LandingResult(LandingStatus.NO_CONVERGENCE, tail[-1], t_last=m.t,
                             note=f"Newton moved {abs(point - tail[-1]):.3g} away from the tail")
    return LandingResult(LandingStatus.LANDED, point, residual, mult, t_last=m.t)


class OrbitType(enum.Enum):
    ATTRACTING = "Attracting"
    REPELLING = "Repelling"
    INDIFFERENT = "Indifferent"


@dataclass(frozen=True)
class PeriodicOrbit:
    period: int
    points: tuple[complex, ...]
    multiplier: complex
    classification: OrbitType
    minimal_period: int
    residual: float


def classify_multiplier(mult: complex, band: float) -> OrbitType:
    r = abs(mult)
    if r < 1.0 - band:
        return OrbitType.ATTRACTING
    if r > 1.0 + band:
        return OrbitType.REPELLING
    return OrbitType.INDIFFERENT


def find_periodic_orbits(c: complex, p: int, seeds, tol: float = 1e-10,
                         band: float | None = None) -> list[PeriodicOrbit]:
    """Newton from each seed on f^p(z) = z; cycles are deduplicated up to rotation.

    ``minimal_period`` records the exact period when it is a proper divisor
    of p.  ``band`` is the half-width of the indifferent classification band
    (defaults to tol).
    """
    if p < 1:
        raise ValueError("period must be positive")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    band = tol if band is None else band
    c = complex(c)
    found: list[PeriodicOrbit] = []
    match_tol = max(1e3 * tol, 1e-9)
    for seed in seeds:
        res = newton_periodic(c, complex(seed), p)
        if res is None:
            continue
        z, orbit, residual, mult = res
        if residual > max(tol, 1e-12) * (1.0 + abs(z)) * 1e3:
            continue
        q = next(d for d in range(1, p + 1) if p % d == 0
                 and abs(iterate(c, z, d) - z) <= match_tol * (1.0 + abs(z)))
        if any(min(abs(z - w) for w in o.points) <= match_tol * (1.0 + abs(z)) for o in found):
            continue
        found.append(PeriodicOrbit(p, tuple(orbit), mult, classify_multiplier(mult, band),
                                   q, residual))
    return found


@dataclass(frozen=True)
class ContinuityReport:
    deviation: float
    per_element: tuple[float, ...]
    potentials: tuple[float, ...]


def transversal_continuity_check(c: complex, s_seq, s_limit: Address, t_star: float,
                                 t_max: float = 30.0, n_grid: int = 30) -> ContinuityReport:
    """Max over t in [t_star, t_max] of |g_{s_n}(t) - g_s(t)| for every s_n in s_seq.

    ``deviation`` is the value for the last element.
    """
    s_seq = list(s_seq)
    if not s_seq:
        raise ValueError("s_seq must be nonempty")
    ts = geometric_potentials(t_star, t_max, n_grid)
    ref = trace_ray_at(c, s_limit, ts).points
    devs = []
    for s in s_seq:
        pts = trace_ray_at(c, s, ts).points
        devs.append(max(abs(a - b) for a, b in zip(pts, ref)))
    return ContinuityReport(devs[-1], tuple(devs), tuple(ts))
