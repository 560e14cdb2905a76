"""Postsingular orbit samples, non-recurrence distances and derivative growth.

Since |f_c'(w)| = e^{Re w}, the derivative of f_c^k along an orbit is
log|(f_c^k)'(z)| = S_k(z) = sum_{i<k} Re f_c^i(z), so growth estimates only
need running sums of real parts.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .errors import EscapingSample, OrbitEscape

ESCAPE_GUARD = 1e100
ANNULUS_OUTER = 2.0
DEFAULT_DISK_EXPONENT = 5.0
LOG2 = math.log(2.0)


def _tag(d: float, inner: float) -> str:
    if d < inner:
        return "disk"
    if d < ANNULUS_OUTER:
        return "annulus"
    return "outside"


@dataclass(frozen=True)
class OrbitSample:
    """f_c^j(c) for j = 1 .. len(points); the singular value itself is excluded."""

    c: complex
    horizon: int
    points: tuple[complex, ...]
    escaped: bool
    escape_iterate: int | None
    min_re: float
    min_distance: float
    # region of each point relative to the disk of radius e^{-M} and the
    # annulus out to radius 2 around c
    tags: tuple[str, ...] = field(default=(), compare=False)
    disk_exponent: float = DEFAULT_DISK_EXPONENT


def orbit_sample(c: complex, M: int, guard: float = ESCAPE_GUARD,
                 disk_exponent: float = DEFAULT_DISK_EXPONENT) -> OrbitSample:
    """Forward orbit of the singular value up to M iterates, stopping at |z| > guard."""
    if M < 1:
        raise ValueError("M must be at least 1")
    c = complex(c)
    pts = []
    z = c
    escaped, at = False, None
    for j in range(1, M + 1):
        if z.real > 700.0:
            escaped, at = True, j
            break
        z = cmath.exp(z) + c
        if not cmath.isfinite(z) or abs(z) > guard:
            escaped, at = True, j
            break
        pts.append(z)
    inner = math.exp(-disk_exponent)
    dists = [abs(p - c) for p in pts]
    return OrbitSample(
        c=c, horizon=M, points=tuple(pts), escaped=escaped, escape_iterate=at,
        min_re=min((p.real for p in pts), default=math.inf),
        min_distance=min(dists, default=math.inf),
        tags=tuple(_tag(d, inner) for d in dists),
        disk_exponent=disk_exponent,
    )


@dataclass(frozen=True)
class NonRecurrence:
    distance: float          # min_j |f^j(c) - c|
    m_star: float            # -log(distance): the orbit avoids D_{e^-M}(c) for M > m_star
    min_re: float            # min_j Re f^j(c), the half-plane form of the same test
    argmin: int              # iterate j attaining the distance
    recurrent: bool


def nonrecurrence_distance(sample: OrbitSample, zero_tol: float = 1e-14) -> NonRecurrence:
    if sample.escaped:
        raise EscapingSample(f"orbit of c={sample.c!r} escapes at iterate {sample.escape_iterate}")
    if not sample.points:
        raise ValueError("empty orbit sample")
    dists = [abs(p - sample.c) for p in sample.points]
    j = min(range(len(dists)), key=dists.__getitem__)
    d = dists[j]
    recurrent = d <= zero_tol * (1.0 + abs(sample.c))
    m_star = math.inf if d == 0 else -math.log(d)
    return NonRecurrence(d, m_star, sample.min_re, j + 1, recurrent)


def growth_sums(c: complex, z: complex, k_max: int, guard: float = ESCAPE_GUARD):
    """[S_0, ..., S_k] with S_k = sum_{i<k} Re f^i(z), plus an escape flag.

    The list stops early once the orbit passes the guard.  A final real part
    too large for the next point to be represented is still added, so the last
    sum may be +inf or -inf in that case.
    """
    c, z = complex(c), complex(z)
    sums = [0.0]
    s = 0.0
    for _ in range(k_max):
        s += z.real
        sums.append(s)
        if len(sums) > k_max:
            break
        if z.real > 700.0:
            return sums, True
        z = cmath.exp(z) + c
        if not cmath.isfinite(z) or abs(z) > guard:
            # the real part of the escaping point still enters the next sum
            re = z.real if math.isfinite(z.real) else math.copysign(math.inf, z.real)
            sums.append(s + re)
            return sums, True
    return sums, False


def derivative_direct(c: complex, z: complex, k: int) -> float:
    """|(f_c^k)'(z)| by the chain rule, multiplying the factors f_c'(z_i) = e^{z_i}."""
    d = 1.0 + 0j
    z = complex(z)
    for _ in range(k):
        d *= cmath.exp(z)
        z = cmath.exp(z) + c
    return abs(d)


@dataclass(frozen=True)
class StartGrowth:
    z: complex
    sums: tuple[float, ...]
    escaped: bool


@dataclass(frozen=True)
class GrowthReport:
    c: complex
    k_max: int
    per_start: tuple[StartGrowth, ...]
    k_bar: int | None
    eta: float | None
    violations: tuple[tuple[complex, int], ...]

    @property
    def positive(self) -> bool:
        return self.eta is not None and self.eta > 1.0


def growth_report(c: complex, starts, k_max: int, guard: float = ESCAPE_GUARD) -> GrowthReport:
    """Sampled hyperbolicity evidence: S_k > log(eta) > 0 for every start and k_bar < k <= k_max.

    k_bar is the smallest k_bar >= 1 with min over starts of S_k > 0 for all
    k_bar < k <= k_max, and eta = exp of the minimum of those S_k.  Sums past an
    escape are +inf (an escaping orbit only adds growth) unless the escape
    produced a huge negative real part, in which case they are treated as
    unknown and excluded.
    """
    starts = [complex(z) for z in starts]
    if not starts:
        raise ValueError("starts must be nonempty")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    per = []
    table = []
    for z in starts:
        sums, esc = growth_sums(c, z, k_max, guard)
        per.append(StartGrowth(z, tuple(sums), esc))
        full = list(sums[: k_max + 1])
        last = full[-1]
        fill = math.inf if last == math.inf or (esc and last > 0) else math.nan
        full += [fill] * (k_max + 1 - len(full))
        table.append(full)
    mins = []
    for k in range(k_max + 1):
        col = [row[k] for row in table if not math.isnan(row[k])]
        mins.append(min(col) if col else math.nan)
    k_bar = None
    for kb in range(1, k_max):
        if all(mins[k] > 0 for k in range(kb + 1, k_max + 1)):
            k_bar = kb
            break
    if k_bar is not None:
        eta = math.exp(min(mins[k] for k in range(k_bar + 1, k_max + 1)))
        violations = ()
    else:
        eta = None
        violations = tuple((z, k) for z, row in zip(starts, table)
                           for k in range(1, k_max + 1) if row[k] <= 0)
    return GrowthReport(complex(c), k_max, tuple(per), k_bar, eta, violations)


def orbit_growth_report(c: complex, M: int, k_max: int) -> GrowthReport:
    """growth_report over the sampled postsingular orbit."""
    sample = orbit_sample(c, M)
    if sample.escaped:
        raise OrbitEscape(sample.escape_iterate, sample.points[-1] if sample.points else c)
    return growth_report(c, sample.points, k_max)
