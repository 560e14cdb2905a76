"""Ray graphs, their pullbacks and the puzzle pieces they cut out.

Every ray of a level is kept as a polyline from its landing point (potential 0)
up to the junction potential T_JOIN.  Rays of the graph itself come from the
continuation tracer.  A preimage ray k·s is the logarithm of the polyline of s
on the branch that continues the far end of k·s, so the pulled back polylines
inherit the disjointness of their parents.

Pieces are never stored as regions.  For a co-landing class r_1 < ... < r_m
(lexicographic, which is the vertical order near +infinity) the closed curve
r_i ∪ r_{i+1} bounds sector i; everything else is sector 0.  A point's
signature is its sector index in every class with at least two rays, found
from the parity of crossings of a leftward horizontal probe.  Two points lie
in the same piece iff their signatures agree, and the all-zero signature is
the piece containing a left half plane.
"""
from __future__ import annotations

import cmath
import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.spatial import cKDTree

from .address import Address, shift
from .errors import (AmbiguousCrossing, ContinuationBreak, LandingFailure,
                     NotForwardInvariant, OnBoundary, OrbitEscape, ParabolicVertex,
                     SingularObstruction)
from .rays import (SINGULAR_RADIUS, TWO_PI, LandingResult, RayMarcher, land_ray)

GROUP_TOL = 1e-7
SIDE_TOL = 1e-9
T_JOIN = 50.0
DEFAULT_KMAX = 3
BRANCHING = "*"
ESCAPE_GUARD = 1e100
# interior samples keep this distance from every boundary polyline, well above
# the chord error of the polylines themselves
SAMPLE_RESOLUTION = 1e-4


@dataclass(frozen=True, eq=False)
class RayCurve:
    """Polyline of one ray, ordered by increasing potential; points[0] is the landing point."""

    address: Address
    potentials: np.ndarray
    points: np.ndarray

    @property
    def landing(self) -> complex:
        return complex(self.points[0])


def _curve_from_history(s: Address, landing: complex, history) -> RayCurve:
    hist = [(t, z) for t, z in history if t <= T_JOIN]
    hist.sort(key=lambda p: p[0])
    pots = np.array([0.0] + [t for t, _ in hist])
    pts = np.array([landing] + [z for _, z in hist], dtype=complex)
    return RayCurve(s, pots, pts)


def _segment_distance(c: complex, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    L2 = (d.real ** 2 + d.imag ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = ((c - a) * np.conj(d)).real / L2
    u = np.where(L2 > 0, np.clip(u, 0.0, 1.0), 0.0)
    return np.abs(a + u * d - c)


def _preimage_curve(c: complex, child: Address, parent: RayCurve, max_seg: float,
                    singular_radius: float = SINGULAR_RADIUS) -> RayCurve:
    """Curve of ``child`` (= k·parent) from the curve of its parent ray."""
    tau0 = math.log1p(T_JOIN)
    m = RayMarcher(c, child, max_seg=max_seg, record=True)
    m.advance_to(T_JOIN)
    m.advance_to(tau0)
    far = [(t, z) for t, z in m.history if t <= T_JOIN]

    # parent points in decreasing potential, refined so that each image
    # segment turns by at most max_seg around c
    pu = parent.potentials[::-1]
    pz = parent.points[::-1]
    a, b = pz[:-1], pz[1:]
    r = _segment_distance(c, a, b)
    if r.min() < singular_radius:
        raise SingularObstruction(float(pu[int(np.argmin(r))]), 1, float(r.min()))
    nsub = np.maximum(1, np.ceil(np.abs(b - a) / (r * max_seg))).astype(np.int64)
    seg = np.repeat(np.arange(len(nsub)), nsub)
    start = np.repeat(np.cumsum(nsub) - nsub, nsub)
    frac = (np.arange(int(nsub.sum())) - start) / np.repeat(nsub, nsub)
    zz = np.concatenate([a[seg] + frac * (b[seg] - a[seg]), pz[-1:]])
    uu = np.concatenate([pu[:-1][seg] + frac * (pu[1:][seg] - pu[:-1][seg]), pu[-1:]])
    w = np.log(zz - c)
    im = np.unwrap(w.imag)
    ref = far[-1][1]
    shift_m = round((ref.imag - im[0]) / TWO_PI)
    near = w.real + 1j * (im + TWO_PI * shift_m)
    if abs(near[0] - ref) > 1e-6 * (1.0 + abs(ref)):
        raise ContinuationBreak(tau0, f"pullback of {parent.address} does not meet {child}")
    near_u = np.log1p(uu)

    pots = np.concatenate([near_u[::-1], np.array([t for t, _ in far[::-1]][1:])])
    pts = np.concatenate([near[::-1], np.array([z for _, z in far[::-1]][1:], dtype=complex)])
    return RayCurve(child, pots, pts)


def _group(points: list[complex], tol: float) -> list[list[int]]:
    """Union-find on points closer than tol."""
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n > 1:
        xy = np.array([[p.real, p.imag] for p in points])
        for i, j in cKDTree(xy).query_pairs(tol):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _classes(addresses, landing: dict, tol: float):
    """Co-landing classes (each sorted lexicographically), sorted by first member."""
    addrs = sorted(addresses)
    groups = _group([landing[a] for a in addrs], tol)
    classes = [tuple(sorted(addrs[i] for i in g)) for g in groups]
    classes.sort(key=lambda cl: cl[0])
    return classes


@dataclass(eq=False)
class RayGraph:
    c: complex
    addresses: tuple[Address, ...]
    landings: dict
    curves: dict
    classes: tuple[tuple[Address, ...], ...]

    @property
    def graph_id(self) -> str:
        text = repr(complex(self.c)) + ";" + ";".join(str(a) for a in self.addresses)
        return hashlib.sha1(text.encode()).hexdigest()[:16]

    def landing_point(self, s: Address) -> complex:
        return self.curves[s].landing

    def class_of(self, s: Address) -> tuple[Address, ...]:
        return next(cl for cl in self.classes if s in cl)


def check_forward_invariant(addresses: Iterable[Address]) -> None:
    addrs = set(addresses)
    missing = sorted({shift(a, 1) for a in addrs} - addrs)
    if missing:
        raise NotForwardInvariant(missing)


def build_graph(c: complex, addresses: Iterable[Address], *, tol: float = 1e-9,
                group_tol: float = GROUP_TOL, max_seg: float = 0.1,
                repelling_band: float = 1e-6) -> RayGraph:
    """Land every ray of a shift-closed set of periodic addresses and group co-landing rays."""
    c = complex(c)
    addrs = tuple(sorted(set(addresses)))
    if not addrs:
        raise ValueError("the graph needs at least one address")
    for a in addrs:
        if not a.exact or not a.is_periodic:
            raise ValueError(f"graph addresses must be exact and periodic: {a}")
    check_forward_invariant(addrs)
    landings: dict[Address, LandingResult] = {}
    histories = {}
    for a in addrs:
        m = RayMarcher(c, a, max_seg=max_seg, record=True)
        m.advance_to(T_JOIN)
        res = land_ray(c, a, tol, marcher=m)
        if not res.landed:
            raise LandingFailure(a, res.status.value)
        if abs(res.multiplier) <= 1.0 + repelling_band:
            raise ParabolicVertex(a, res.multiplier)
        landings[a] = res
        histories[a] = m.history
    points = {a: landings[a].point for a in addrs}
    classes = _classes(addrs, points, group_tol)
    curves = {}
    for cl in classes:
        rep = points[cl[0]]
        for a in cl:
            curves[a] = _curve_from_history(a, rep, histories[a])
    return RayGraph(c, addrs, landings, curves, tuple(classes))


@dataclass(frozen=True)
class PreimagePairs:
    pairs: tuple[tuple[Address, Address], ...]
    singletons: tuple[Address, ...]


def entry_window(k_max: int = DEFAULT_KMAX) -> range:
    return range(-k_max + 1, k_max)


def preimage_addresses(s1: Address, s2: Address, separates: bool,
                       window: Iterable[int] | None = None) -> PreimagePairs:
    """Co-landing preimage pairs of a co-landing pair s1 < s2.

    When the pair separates c from -infinity, k·s1 lands with (k-1)·s2;
    otherwise with k·s2.  Singletons are window rays k·s2 left without a
    partner inside the window.
    """
    if s1 == s2:
        raise ValueError("the pair must consist of two distinct addresses")
    if not s1 < s2:
        raise ValueError("expected s1 < s2 in lexicographic order")
    ks = sorted(entry_window() if window is None else window)
    d = 1 if separates else 0
    pairs = tuple((s1.prepend(k), s2.prepend(k - d)) for k in ks)
    used = {k - d for k in ks}
    singles = tuple(s2.prepend(k) for k in ks if k not in used)
    return PreimagePairs(pairs, singles)


def _closed_curve(a: RayCurve, b: RayCurve) -> np.ndarray:
    # landing -> far end of a, junction, far end of b -> landing
    return np.concatenate([a.points, b.points[::-1]])


def _probe_crossings(poly: np.ndarray, z: complex, tol: float, strict: bool) -> int:
    a, b = poly[:-1], poly[1:]
    y0 = z.imag
    straddle = (a.imag > y0) != (b.imag > y0)
    if strict:
        near = np.abs(poly.imag - y0) < tol
        near_left = near & (poly.real < z.real)
        if near_left.any():
            raise AmbiguousCrossing(f"probe from {z!r} passes within {tol:g} of a vertex")
    a, b = a[straddle], b[straddle]
    xint = a.real + (y0 - a.imag) * (b.real - a.real) / (b.imag - a.imag)
    return int(np.count_nonzero(xint < z.real))


def separates_c(c: complex, s1: Address, s2: Address, *, tol: float = SIDE_TOL,
                group_tol: float = GROUP_TOL, max_seg: float = 0.1,
                graph: RayGraph | None = None) -> bool:
    """Whether the closed curve formed by two co-landing rays separates c from -infinity."""
    c = complex(c)
    curves = []
    for s in (s1, s2):
        if graph is not None and s in graph.curves:
            curves.append(graph.curves[s])
            continue
        m = RayMarcher(c, s, max_seg=max_seg, record=True)
        m.advance_to(T_JOIN)
        res = land_ray(c, s, marcher=m)
        if not res.landed:
            raise LandingFailure(s, res.status.value)
        curves.append(_curve_from_history(s, res.point, m.history))
    w1, w2 = curves[0].landing, curves[1].landing
    if abs(w1 - w2) >= group_tol:
        raise ValueError(f"{s1} and {s2} do not land together (distance {abs(w1 - w2):.3g})")
    curves[1] = RayCurve(s2, curves[1].potentials, np.concatenate([[w1], curves[1].points[1:]]))
    poly = _closed_curve(curves[0], curves[1])
    return _probe_crossings(poly, c, tol, strict=True) % 2 == 1


class _CurveIndex:
    """Segments of many polylines bucketed by height, plus a vertex KD-tree."""

    def __init__(self, curves: list[np.ndarray]):
        xs1, ys1, xs2, ys2, rid = [], [], [], [], []
        for i, p in enumerate(curves):
            xs1.append(p.real[:-1]); ys1.append(p.imag[:-1])
            xs2.append(p.real[1:]); ys2.append(p.imag[1:])
            rid.append(np.full(len(p) - 1, i))
        self.nrays = len(curves)
        self.x1 = np.concatenate(xs1); self.y1 = np.concatenate(ys1)
        self.x2 = np.concatenate(xs2); self.y2 = np.concatenate(ys2)
        self.rid = np.concatenate(rid)
        verts = np.concatenate(curves)
        self.vert_rid = np.concatenate([np.full(len(p), i) for i, p in enumerate(curves)])
        self.tree = cKDTree(np.column_stack([verts.real, verts.imag]))
        ylo = np.minimum(self.y1, self.y2)
        yhi = np.maximum(self.y1, self.y2)
        nseg = len(ylo)
        self.ymin = float(ylo.min())
        span = max(float(yhi.max()) - self.ymin, 1e-9)
        self.nb = int(np.clip(nseg // 4, 64, 1 << 16))
        self.bh = span / self.nb
        blo = self._bin(ylo)
        bhi = self._bin(yhi)
        counts = bhi - blo + 1
        seg_rep = np.repeat(np.arange(nseg), counts)
        offs = np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts)
        bins = np.repeat(blo, counts) + offs
        order = np.argsort(bins, kind="stable")
        self.bin_segs = seg_rep[order]
        self.bin_start = np.searchsorted(bins[order], np.arange(self.nb + 1))

    def _bin(self, y):
        return np.clip(np.floor((np.asarray(y) - self.ymin) / self.bh).astype(np.int64),
                       0, self.nb - 1)

    def _candidates(self, ylo: float, yhi: float) -> np.ndarray:
        b0, b1 = int(self._bin(ylo)), int(self._bin(yhi))
        segs = self.bin_segs[self.bin_start[b0]:self.bin_start[b1 + 1]]
        return np.unique(segs) if b1 > b0 else segs

    def crossings(self, z: complex) -> np.ndarray:
        """Crossing counts per curve of the leftward horizontal probe from z."""
        y0, x0 = z.imag, z.real
        segs = self._candidates(y0, y0)
        y1, y2 = self.y1[segs], self.y2[segs]
        mask = (y1 > y0) != (y2 > y0)
        segs = segs[mask]
        y1, y2 = y1[mask], y2[mask]
        x1, x2 = self.x1[segs], self.x2[segs]
        xint = x1 + (y0 - y1) * (x2 - x1) / (y2 - y1)
        return np.bincount(self.rid[segs[xint < x0]], minlength=self.nrays)

    def distance(self, z: complex, exclude=None, bound: float | None = None) -> float:
        """Distance from z to the polylines, optionally ignoring the curves in ``exclude``.

        ``bound`` must be an upper bound for the answer when ``exclude`` is given.
        """
        if bound is None:
            r, _ = self.tree.query([z.real, z.imag])
        else:
            r = bound
        segs = self._candidates(z.imag - r, z.imag + r)
        if exclude is not None and len(segs):
            segs = segs[~np.isin(self.rid[segs], exclude)]
        if len(segs) == 0:
            return float(r)
        a = self.x1[segs] + 1j * self.y1[segs]
        b = self.x2[segs] + 1j * self.y2[segs]
        return float(min(r, _segment_distance(z, a, b).min()))


@dataclass(frozen=True)
class PuzzlePiece:
    level: int
    label: int | str
    bounding_addresses: tuple[Address, ...]
    witness: complex
    signature: tuple[int, ...] = field(compare=False, repr=False, default=())

    @property
    def is_branching(self) -> bool:
        return self.label == BRANCHING


@dataclass(frozen=True)
class Located:
    piece: PuzzlePiece
    margin: float


class PuzzleLevel:
    """All rays of A_n with their curves, co-landing classes and pieces."""

    def __init__(self, n: int, c: complex, curves: dict, k_max: int,
                 group_tol: float = GROUP_TOL, side_tol: float = SIDE_TOL):
        self.n = n
        self.c = complex(c)
        self.k_max = k_max
        self.side_tol = side_tol
        # the strips of the entries kept in the window
        self.band = TWO_PI * (k_max - 1) + math.pi
        self.addresses = tuple(sorted(curves))
        landing = {a: curves[a].landing for a in self.addresses}
        self.classes = tuple(_classes(self.addresses, landing, group_tol))
        # every member of a class shares the landing point of its first member
        fixed = {}
        for cl in self.classes:
            rep = curves[cl[0]].points[0]
            for a in cl:
                cv = curves[a]
                pts = cv.points.copy()
                pts[0] = rep
                fixed[a] = RayCurve(a, cv.potentials, pts)
        self.curves = fixed
        self._ray_id = {a: i for i, a in enumerate(self.addresses)}
        self._index = _CurveIndex([self.curves[a].points for a in self.addresses])
        self.separating = tuple(cl for cl in self.classes if len(cl) > 1)
        self._class_ids = [np.array([self._ray_id[a] for a in cl]) for cl in self.separating]
        # flattened class members, for vectorized sector computation
        if self._class_ids:
            self._flat_ids = np.concatenate(self._class_ids)
            owner = np.concatenate([np.full(len(ids), i) for i, ids in enumerate(self._class_ids)])
            pos = np.concatenate([np.arange(len(ids)) for ids in self._class_ids])
            self._pair_ok = owner[:-1] == owner[1:]
            self._pair_class = owner[:-1]
            self._pair_sector = pos[:-1] + 1
        else:
            self._flat_ids = np.zeros(0, dtype=np.int64)
        self._class_of = {a: i for i, cl in enumerate(self.separating) for a in cl}
        self._clear_cache: dict[Address, np.ndarray] = {}
        self.pieces = self._enumerate_pieces()
        self._by_signature = {p.signature: p for p in self.pieces}

    # signatures

    def _sectors(self, X: np.ndarray) -> np.ndarray:
        """Sector per separating class from crossing parities; -2 marks inconsistency."""
        nclass = len(self._class_ids)
        out = np.zeros(nclass, dtype=np.int64)
        if not nclass:
            return out
        par = X[self._flat_ids] & 1
        ones = np.nonzero(((par[:-1] ^ par[1:]) == 1) & self._pair_ok)[0]
        cls = self._pair_class[ones]
        out[cls] = self._pair_sector[ones]
        dup = np.bincount(cls, minlength=nclass) > 1
        out[dup] = -2
        return out

    def signature(self, z: complex) -> tuple[int, ...]:
        sec = self._sectors(self._index.crossings(complex(z)))
        if (sec < 0).any():
            raise AmbiguousCrossing(f"inconsistent side tests at {z!r}")
        return tuple(sec.tolist())

    def distance_to_boundary(self, z: complex) -> float:
        return self._index.distance(complex(z))

    def locate(self, z: complex) -> Located:
        z = complex(z)
        d = self.distance_to_boundary(z)
        if d < self.side_tol:
            raise OnBoundary(z, d)
        sig = self.signature(z)
        piece = self._by_signature.get(sig)
        if piece is None:
            raise AmbiguousCrossing(f"no piece with signature {sig} (at {z!r})")
        return Located(piece, d)

    def piece(self, label) -> PuzzlePiece:
        return next(p for p in self.pieces if p.label == label)

    @property
    def branching_piece(self) -> PuzzlePiece:
        return self.piece(BRANCHING)

    def singular_piece(self) -> PuzzlePiece:
        return self.locate(self.c).piece

    # piece enumeration

    def _clearances(self, a: Address):
        """Distance from each vertex of ray a to the nearest vertex of an unrelated ray."""
        cached = self._clear_cache.get(a)
        if cached is None:
            cached = self._clear_cache[a] = self._compute_clearances(a)
        return cached

    def _compute_clearances(self, a: Address):
        cv = self.curves[a]
        pts = np.column_stack([cv.points.real, cv.points.imag])
        k = min(12, self._index.tree.n)
        dist, idx = self._index.tree.query(pts, k=k)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        own = self._ray_id[a]
        cls = self._class_of.get(a)
        related = {own} if cls is None else set(self._class_ids[cls].tolist())
        rel = np.isin(self._index.vert_rid[np.minimum(idx, len(self._index.vert_rid) - 1)],
                      list(related))
        masked = np.where(rel, np.inf, dist)
        clear = masked.min(axis=1)
        clear = np.where(np.isinf(clear), dist[:, -1], clear)
        return clear

    def _ray_signature(self, a: Address) -> tuple[int, ...]:
        """Sector of the ray a with respect to every separating class (its own class gets -1)."""
        cv = self.curves[a]
        clear = self._clearances(a)
        usable = (cv.potentials > 0) & (cv.points.real < T_JOIN - 5)
        clear = np.where(usable, clear, -1.0)
        cls = self._class_of.get(a)
        related = [self._ray_id[a]] if cls is None else self._class_ids[cls]
        # vertex clearance only bounds the distance to other polylines from
        # above; rank a shortlist by the exact segment distance
        short = np.argsort(-clear)[:40]
        exact = np.array([self._index.distance(complex(cv.points[i]), related, clear[i])
                          if clear[i] > 0 else -1.0 for i in short])
        order = short[np.argsort(-exact)[:3]]
        votes = []
        for i in order:
            sec = self._sectors(self._index.crossings(complex(cv.points[i])))
            if cls is not None:
                sec[cls] = -1
            votes.append(tuple(sec.tolist()))
        best = max(set(votes), key=votes.count)
        if -2 in best:
            raise AmbiguousCrossing(f"cannot place ray {a} relative to the other classes")
        return best

    def _enumerate_pieces(self) -> list[PuzzlePiece]:
        nclass = len(self.separating)
        zero = (0,) * nclass
        faces: dict[tuple[int, ...], set[Address]] = {zero: set()}
        for a in self.addresses:
            base = self._ray_signature(a)
            cls = self._class_of.get(a)
            if cls is None:
                faces.setdefault(base, set()).add(a)
                continue
            members = self.separating[cls]
            j = members.index(a) + 1
            m = len(members)
            for sector in (j - 1, j % m):
                sig = base[:cls] + (sector,) + base[cls + 1:]
                faces.setdefault(sig, set()).add(a)
        xmin = min(float(cv.points.real.min()) for cv in self.curves.values())
        pieces = []
        keyed = []
        for sig, bounding in faces.items():
            bnd = tuple(sorted(bounding))
            keyed.append((sig != zero, tuple(str(b) for b in bnd), sig, bnd))
        keyed.sort()
        label = 0
        for nonzero, _, sig, bnd in keyed:
            if not nonzero:
                pieces.append(PuzzlePiece(self.n, BRANCHING, bnd, complex(xmin - 10.0, 0.0), sig))
                continue
            witness = self._find_witness(sig, bnd)
            pieces.append(PuzzlePiece(self.n, label, bnd, witness, sig))
            label += 1
        return pieces

    def _offset_points(self, a: Address, clear: np.ndarray, idx: np.ndarray, scale: float):
        cv = self.curves[a]
        pts = cv.points
        i0 = np.clip(idx - 1, 0, len(pts) - 1)
        i1 = np.clip(idx + 1, 0, len(pts) - 1)
        tangent = pts[i1] - pts[i0]
        normal = 1j * tangent / np.where(np.abs(tangent) > 0, np.abs(tangent), 1.0)
        delta = scale * clear[idx]
        return pts[idx] + delta * normal, pts[idx] - delta * normal

    def _find_witness(self, sig, bounding) -> complex:
        best, best_margin = None, -1.0
        band = self.band
        for a in bounding:
            cv = self.curves[a]
            clear = self._clearances(a)
            ok = (cv.potentials > 0) & (cv.points.real < T_JOIN - 5)
            inband = ok & (np.abs(cv.points.imag) <= band)
            cand = np.unique(np.concatenate([
                np.argsort(-np.where(inband, clear, -1.0))[:8],
                np.argsort(-np.where(ok, clear, -1.0))[:8]]))
            cand = cand[ok[cand]]
            for scale in (0.45, 0.2):
                for z in np.concatenate(self._offset_points(a, clear, cand, scale)):
                    z = complex(z)
                    try:
                        if self.signature(z) != sig:
                            continue
                    except AmbiguousCrossing:
                        continue
                    margin = self.distance_to_boundary(z)
                    if margin > best_margin:
                        best, best_margin = z, margin
            if best is not None and best_margin > 10 * self.side_tol:
                break
        if best is None:
            raise AmbiguousCrossing(f"no interior point found for piece bounded by "
                                    f"{[str(b) for b in bounding]}")
        return best

    def sample_piece(self, piece: PuzzlePiece, count: int, rng: np.random.Generator,
                     re_max: float | None = None, band: float | None = None,
                     attempts: int = 40, resolution: float = SAMPLE_RESOLUTION) -> list[complex]:
        """Interior points of ``piece`` inside the resolved window.

        Points are offsets from the bounding rays at random fractions of the
        local clearance, kept only when their signature matches and their
        margin exceeds the side tolerance.
        """
        band = self.band if band is None else band
        re_max = math.log(T_JOIN / 2) if re_max is None else re_max
        rays = list(piece.bounding_addresses)
        out: list[complex] = []
        if piece.is_branching:
            rays = rays or list(self.addresses)
        for _ in range(attempts):
            if len(out) >= count or not rays:
                break
            a = rays[int(rng.integers(len(rays)))]
            cv = self.curves[a]
            clear = self._clearances(a)
            ok = ((cv.potentials > 0) & (cv.points.real < re_max)
                  & (np.abs(cv.points.imag) <= band) & (clear > 4 * resolution))
            idx = np.nonzero(ok)[0]
            if len(idx) == 0:
                continue
            pick = rng.choice(idx, size=min(len(idx), 8), replace=False)
            scale = rng.uniform(0.1, 0.6)
            for z in np.concatenate(self._offset_points(a, clear, pick, scale)):
                z = complex(z)
                if z.real >= re_max or abs(z.imag) > band:
                    continue
                try:
                    if self.distance_to_boundary(z) < resolution:
                        continue
                    if self.signature(z) == piece.signature:
                        out.append(z)
                except AmbiguousCrossing:
                    continue
                if len(out) >= count:
                    break
        if piece.is_branching and len(out) < count:
            # the branching piece contains a left half plane
            xmin = min(float(cv.points.real.min()) for cv in self.curves.values())
            for _ in range(count - len(out)):
                out.append(complex(xmin - rng.uniform(1.0, 20.0), rng.uniform(-band, band)))
        return out[:count]

    def export(self) -> dict:
        return {
            "level": self.n,
            "pieces": [{"label": p.label,
                        "bounding_addresses": [str(a) for a in p.bounding_addresses],
                        "witness": {"re": p.witness.real, "im": p.witness.imag}}
                       for p in self.pieces],
            "colanding_classes": [[str(a) for a in cl] for cl in self.classes],
        }


class Puzzle:
    """Levels 0, 1, 2, ... of the puzzle generated by a ray graph, built on demand."""

    def __init__(self, graph: RayGraph, k_max: int = DEFAULT_KMAX, max_seg: float = 0.1,
                 group_tol: float = GROUP_TOL, side_tol: float = SIDE_TOL):
        if k_max < 1:
            raise ValueError("k_max must be at least 1")
        self.graph = graph
        self.c = graph.c
        self.k_max = k_max
        self.max_seg = max_seg
        self.group_tol = group_tol
        self.side_tol = side_tol
        self._curves = dict(graph.curves)
        self._sets = [frozenset(graph.addresses)]
        self._levels: dict[int, PuzzleLevel] = {}

    @property
    def window(self) -> range:
        return entry_window(self.k_max)

    def addresses(self, n: int) -> frozenset:
        while len(self._sets) <= n:
            prev = self._sets[-1]
            new = set(self.graph.addresses)
            for s in prev:
                for k in self.window:
                    new.add(s.prepend(k))
            self._sets.append(frozenset(new))
        return self._sets[n]

    def candidate_count(self, n: int) -> int:
        """|A_0| + (window size)·|A_{n-1}|: the number of generated addresses before dedup."""
        if n == 0:
            return len(self.graph.addresses)
        return len(self.graph.addresses) + len(self.window) * len(self.addresses(n - 1))

    def curve(self, s: Address) -> RayCurve:
        cv = self._curves.get(s)
        if cv is None:
            parent = shift(s, 1)
            cv = _preimage_curve(self.c, s, self.curve(parent), self.max_seg)
            self._curves[s] = cv
        return cv

    def level(self, n: int) -> PuzzleLevel:
        if n < 0:
            raise ValueError("level must be nonnegative")
        lvl = self._levels.get(n)
        if lvl is None:
            addrs = self.addresses(n)
            # parents first, so that every curve pulls back an existing one
            for j in range(n + 1):
                for s in sorted(self.addresses(j)):
                    self.curve(s)
            lvl = PuzzleLevel(n, self.c, {s: self._curves[s] for s in addrs}, self.k_max,
                              self.group_tol, self.side_tol)
            self._levels[n] = lvl
        return lvl


def build_puzzle(c: complex, addresses: Iterable[Address], n: int,
                 k_max: int = DEFAULT_KMAX, **kwargs) -> Puzzle:
    graph = build_graph(c, addresses, **kwargs)
    puzzle = Puzzle(graph, k_max)
    puzzle.level(n)
    return puzzle


def locate(z: complex, level: PuzzleLevel) -> PuzzlePiece:
    return level.locate(z).piece


@dataclass(frozen=True)
class NestingReport:
    level: int
    parents: dict           # child label -> set of parent labels met by its samples
    unsampled: tuple
    ok: bool


@dataclass(frozen=True)
class MarkovReport:
    level: int
    images: dict            # piece label -> set of level n-1 labels of the sampled images
    unsampled: tuple
    ok: bool


def piece_samples(puzzle: Puzzle, n: int, count: int = 20, seed: int = 0) -> dict:
    lvl = puzzle.level(n)
    rng = np.random.default_rng(seed + 7919 * n)
    return {p.label: lvl.sample_piece(p, count, rng) for p in lvl.pieces}


def nesting_check(puzzle: Puzzle, n: int, count: int = 20, seed: int = 0,
                  samples: dict | None = None) -> NestingReport:
    """Samples of each level-n piece must all locate in one level-(n-1) piece."""
    if n < 1:
        raise ValueError("nesting is checked from level 1 on")
    parent = puzzle.level(n - 1)
    samples = piece_samples(puzzle, n, count, seed) if samples is None else samples
    parents, unsampled = {}, []
    for label, pts in samples.items():
        if not pts:
            unsampled.append(label)
            continue
        labs = set()
        for z in pts:
            try:
                labs.add(parent.locate(z).piece.label)
            except (OnBoundary, AmbiguousCrossing):
                labs.add(None)
        parents[label] = labs
    ok = all(len(v) == 1 and None not in v for v in parents.values())
    return NestingReport(n, parents, tuple(unsampled), ok)


def markov_check(puzzle: Puzzle, n: int, count: int = 20, seed: int = 0,
                 samples: dict | None = None) -> MarkovReport:
    """f maps every non-branching level-n piece into a single level-(n-1) piece."""
    if n < 1:
        raise ValueError("the image check needs n >= 1")
    lower = puzzle.level(n - 1)
    samples = piece_samples(puzzle, n, count, seed) if samples is None else samples
    c = puzzle.c
    images, unsampled = {}, []
    for label, pts in samples.items():
        if label == BRANCHING:
            continue
        if not pts:
            unsampled.append(label)
            continue
        labs = set()
        for z in pts:
            w = cmath.exp(z) + c
            try:
                labs.add(lower.locate(w).piece.label)
            except (OnBoundary, AmbiguousCrossing):
                labs.add(None)
        images[label] = labs
    ok = all(len(v) == 1 and None not in v for v in images.values())
    return MarkovReport(n, images, tuple(unsampled), ok)


@dataclass(frozen=True)
class NonRecurrenceCertificate:
    level: int
    graph_id: str
    singular_piece: PuzzlePiece
    horizon: int
    min_margin: float
    orbit_pieces: tuple


@dataclass(frozen=True)
class Undecided:
    reason: str
    levels_tried: int = 0


def singular_orbit(c: complex, M: int, guard: float = ESCAPE_GUARD) -> list[complex]:
    """f^j(c) for j = 1..M; raises OrbitEscape past the overflow guard."""
    c = complex(c)
    out = []
    z = c
    for j in range(1, M + 1):
        if z.real > math.log(guard):
            raise OrbitEscape(j, complex(math.inf, 0))
        z = cmath.exp(z) + c
        if abs(z) > guard:
            raise OrbitEscape(j, z)
        out.append(z)
    return out


def nonrecurrence_certificate(c: complex, graph: RayGraph, n_max: int, M: int,
                              k_max: int = DEFAULT_KMAX, puzzle: Puzzle | None = None):
    """First level n <= n_max at which no sampled f^j(c) shares the piece of c."""
    if M < 1:
        raise ValueError("an empty orbit sample certifies nothing (M must be >= 1)")
    orbit = singular_orbit(c, M)
    puzzle = puzzle if puzzle is not None else Puzzle(graph, k_max)
    reason = "no level separated c from its orbit"
    for n in range(1, n_max + 1):
        lvl = puzzle.level(n)
        try:
            home = lvl.locate(c)
        except (OnBoundary, AmbiguousCrossing) as exc:
            reason = f"level {n}: {exc}"
            continue
        margins = [home.margin]
        labels = []
        ok = True
        for z in orbit:
            if z.real >= T_JOIN - 1:
                ok, reason = False, f"level {n}: orbit point {z!r} outside the resolved window"
                break
            try:
                loc = lvl.locate(z)
            except (OnBoundary, AmbiguousCrossing) as exc:
                ok, reason = False, f"level {n}: {exc}"
                break
            if loc.piece.label == home.piece.label:
                ok, reason = False, f"level {n}: orbit point {z!r} lies in the singular piece"
                break
            margins.append(loc.margin)
            labels.append(loc.piece.label)
        if ok:
            return NonRecurrenceCertificate(n, graph.graph_id, home.piece, M,
                                            min(margins), tuple(labels))
    return Undecided(reason, n_max)


@dataclass(frozen=True)
class Equivalent:
    levels: int


@dataclass(frozen=True)
class Distinguished:
    level: int
    witness: tuple


def _pattern(level: PuzzleLevel) -> frozenset:
    return frozenset(frozenset(cl) for cl in level.classes)


def _pattern_witness(p1: frozenset, p2: frozenset):
    for cl in sorted(p1 ^ p2, key=lambda s: sorted(s)):
        members = sorted(cl)
        if len(members) > 1:
            return (members[0], members[1])
    return ()


def combinatorial_equivalence_level(c1: complex, c2: complex, addresses: Iterable[Address],
                                    N: int, k_max: int = DEFAULT_KMAX):
    """Compare the puzzles of c1 and c2 level by level up to N."""
    addresses = list(addresses)
    try:
        p1 = Puzzle(build_graph(c1, addresses), k_max)
        p2 = Puzzle(build_graph(c2, addresses), k_max)
    except (LandingFailure, ParabolicVertex, SingularObstruction, ContinuationBreak) as exc:
        return Undecided(f"graph construction failed: {exc}")
    for n in range(N + 1):
        try:
            l1, l2 = p1.level(n), p2.level(n)
            pat1, pat2 = _pattern(l1), _pattern(l2)
            if pat1 != pat2:
                return Distinguished(n, _pattern_witness(pat1, pat2))
            s1, s2 = l1.singular_piece(), l2.singular_piece()
        except (OnBoundary, AmbiguousCrossing, SingularObstruction, ContinuationBreak) as exc:
            return Undecided(f"level {n}: {exc}", n)
        if s1.bounding_addresses != s2.bounding_addresses or s1.signature != s2.signature:
            diff = [cl for i, cl in enumerate(l1.separating)
                    if s1.signature[i] != s2.signature[i]]
            cl = diff[0] if diff else ()
            sector = s1.signature[l1.separating.index(cl)] if cl else 0
            if cl and sector:
                witness = (cl[sector - 1], cl[sector])
            elif cl:
                witness = (cl[0], cl[-1])
            else:
                witness = tuple(sorted(set(s1.bounding_addresses) ^ set(s2.bounding_addresses))[:2])
            return Distinguished(n, witness)
    return Equivalent(N)
