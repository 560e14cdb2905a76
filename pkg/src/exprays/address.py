"""Eventually periodic integer sequences: canonical form, shift, order, metric.

An address is stored as a finite preperiod followed by a repeating period.
Construction always canonicalizes (minimal period, then minimal preperiod),
so equal sequences compare equal and hash identically.

The growth model F(t) = e^t - 1 also lives here because both the
boundedness test and the ray seeds need its iterates.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Sequence

from .errors import Undecidable

# Above this the log-scale representation takes over in log_growth_iterate.
_LOG_SWITCH = 300.0
_EXP_MAX = 709.0


def growth_model(t: float) -> float:
    """F(t) = e^t - 1, returning inf instead of overflowing."""
    if t > _EXP_MAX:
        return math.inf
    return math.expm1(t)


def growth_iterate(t: float, n: int) -> float:
    """F^n(t) in plain floating point (inf once it overflows)."""
    for _ in range(n):
        t = growth_model(t)
        if math.isinf(t):
            break
    return t


def log_growth_iterate(t: float, n: int) -> float:
    """log F^n(t) for t > 0, exact up to rounding even when F^n(t) overflows.

    Switches to the recursion log F(x) = x + log1p(-e^{-x}) once x exceeds
    e^300, so only two more levels are representable before inf.
    """
    if t <= 0:
        raise ValueError("log_growth_iterate needs t > 0")
    x = t
    for k in range(n):
        if x > _LOG_SWITCH:
            # x = F^k(t) is huge; carry lx = log F^{k+1}(t) from here on
            lx = x + math.log1p(-math.exp(-x))
            for _ in range(n - k - 1):
                if lx > _EXP_MAX:
                    return math.inf
                x = math.exp(lx)
                lx = x + math.log1p(-math.exp(-x))
            return lx
        x = math.expm1(x)
    return math.log(x)


class Ordering(enum.Enum):
    LT = -1
    EQ = 0
    GT = 1


def _minimal_block(block: tuple[int, ...]) -> tuple[int, ...]:
    n = len(block)
    for d in range(1, n + 1):
        if n % d == 0 and block[:d] * (n // d) == block:
            return block[:d]
    return block


def _canonical(pre: tuple[int, ...], per: tuple[int, ...]):
    per = _minimal_block(per)
    while pre and pre[-1] == per[-1]:
        pre = pre[:-1]
        per = (per[-1],) + per[:-1]
    return pre, per


_WINDOW_RE = re.compile(r"~\s*(\d+)\s*$")


@total_ordering
@dataclass(frozen=True)
class Address:
    """Eventually periodic sequence ``preperiod`` then ``period`` repeated.

    ``exact=False`` marks a truncation of an unknown sequence: only the first
    ``window_len`` entries are trusted and the period acts as filler.
    """

    preperiod: tuple[int, ...] = ()
    period: tuple[int, ...] = (0,)
    exact: bool = True
    window_len: int | None = field(default=None, compare=True)

    def __post_init__(self):
        pre = tuple(int(v) for v in self.preperiod)
        per = tuple(int(v) for v in self.period)
        if not per:
            raise ValueError("period must be nonempty")
        pre, per = _canonical(pre, per)
        object.__setattr__(self, "preperiod", pre)
        object.__setattr__(self, "period", per)
        if self.exact:
            object.__setattr__(self, "window_len", None)
        elif self.window_len is None or self.window_len < 0:
            raise ValueError("inexact addresses need a nonnegative window_len")

    # construction helpers

    @classmethod
    def periodic(cls, *entries: int) -> "Address":
        return cls((), tuple(entries))

    @classmethod
    def parse(cls, text: str) -> "Address":
        """Parse ``"p1 p2 | q1 q2"``; a trailing ``~n`` marks a truncated window."""
        text = text.replace("−", "-").strip()
        window = None
        m = _WINDOW_RE.search(text)
        if m:
            window = int(m.group(1))
            text = text[: m.start()].strip()
        if text.count("|") != 1:
            raise ValueError(f"address needs exactly one '|': {text!r}")
        left, right = text.split("|")
        try:
            pre = tuple(int(tok) for tok in left.split())
            per = tuple(int(tok) for tok in right.split())
        except ValueError:
            raise ValueError(f"address entries must be integers: {text!r}") from None
        if not per:
            raise ValueError(f"empty period in {text!r}")
        if window is None:
            return cls(pre, per)
        return cls(pre, per, exact=False, window_len=window)

    def __str__(self) -> str:
        left = " ".join(str(v) for v in self.preperiod)
        right = " ".join(str(v) for v in self.period)
        text = f"{left} | {right}" if left else f"| {right}"
        if not self.exact:
            text += f" ~{self.window_len}"
        return text

    def __repr__(self) -> str:
        return f"Address({str(self)!r})"

    # sequence access

    @property
    def preperiod_len(self) -> int:
        return len(self.preperiod)

    @property
    def period_len(self) -> int:
        return len(self.period)

    @property
    def is_periodic(self) -> bool:
        return not self.preperiod

    @property
    def orbit_size(self) -> int:
        """Number of distinct addresses among sigma^k(self), k >= 0."""
        return len(self.preperiod) + len(self.period)

    def entry(self, i: int) -> int:
        if i < 0:
            raise IndexError(i)
        L = len(self.preperiod)
        if i < L:
            return self.preperiod[i]
        return self.period[(i - L) % len(self.period)]

    def entries(self, n: int) -> tuple[int, ...]:
        return tuple(self.entry(i) for i in range(n))

    def orbit_index(self, k: int) -> int:
        """Index in 0..orbit_size-1 of sigma^k(self) among its distinct shifts."""
        L = len(self.preperiod)
        if k < L:
            return k
        return L + (k - L) % len(self.period)

    @property
    def sup_norm(self) -> int:
        return max(abs(v) for v in self.preperiod + self.period)

    def shift(self, k: int = 1) -> "Address":
        return shift(self, k)

    def prepend(self, first: int) -> "Address":
        """The address ``first`` followed by this one (k·s in the usual notation)."""
        window = None if self.exact else self.window_len + 1
        return Address((first,) + self.preperiod, self.period, self.exact, window)

    def with_first(self, first: int) -> "Address":
        """Replace entry 0, keeping the tail sigma(self)."""
        return self.shift(1).prepend(first)

    def _trusted(self) -> float:
        return math.inf if self.exact else self.window_len

    def __lt__(self, other: "Address") -> bool:
        if not isinstance(other, Address):
            return NotImplemented
        return lex_compare(self, other) is Ordering.LT


def shift(s: Address, k: int) -> Address:
    """sigma^k(s) in canonical form."""
    if k < 0:
        raise ValueError("shift amount must be nonnegative")
    L = len(s.preperiod)
    if k <= L:
        pre, per = s.preperiod[k:], s.period
    else:
        r = (k - L) % len(s.period)
        pre, per = (), s.period[r:] + s.period[:r]
    window = None if s.exact else max(s.window_len - k, 0)
    return Address(pre, per, s.exact, window)


def _joint_span(s: Address, t: Address) -> tuple[int, int]:
    """(L, P) such that both sequences are P-periodic from index L on."""
    L = max(len(s.preperiod), len(t.preperiod))
    P = math.lcm(len(s.period), len(t.period))
    return L, P


@dataclass(frozen=True)
class MetricInterval:
    lower: Fraction
    upper: Fraction

    def __contains__(self, value) -> bool:
        return self.lower <= value <= self.upper


def metric_distance(s: Address, t: Address):
    """Sum of 2^-i over the indices where s and t differ.

    Exact addresses give a Fraction.  If either address is a truncation the
    result is a MetricInterval covering every completion of the unknown tail.
    """
    if s.exact and t.exact:
        L, P = _joint_span(s, t)
        head = sum((Fraction(1, 2 ** i) for i in range(L) if s.entry(i) != t.entry(i)),
                   Fraction(0))
        block = sum((Fraction(1, 2 ** (L + j)) for j in range(P)
                     if s.entry(L + j) != t.entry(L + j)), Fraction(0))
        return head + block / (1 - Fraction(1, 2 ** P))
    w = int(min(s._trusted(), t._trusted()))
    lower = sum((Fraction(1, 2 ** i) for i in range(w) if s.entry(i) != t.entry(i)),
                Fraction(0))
    return MetricInterval(lower, lower + Fraction(2, 2 ** w))


def lex_compare(s: Address, t: Address) -> Ordering:
    if s.exact and t.exact:
        L, P = _joint_span(s, t)
        n = L + P
    else:
        n = int(min(s._trusted(), t._trusted()))
    for i in range(n):
        a, b = s.entry(i), t.entry(i)
        if a != b:
            return Ordering.LT if a < b else Ordering.GT
    if s.exact and t.exact:
        return Ordering.EQ
    raise Undecidable(f"{s} and {t} agree on all {n} trusted entries")


@dataclass(frozen=True)
class BoundWitness:
    x: float
    sup_norm: float


def bound_witness(s: Address) -> BoundWitness:
    """A growth witness for s: x = ||s|| works since F(x) >= x for x >= 0."""
    norm = s.sup_norm
    return BoundWitness(x=float(norm), sup_norm=norm)


def is_exponentially_bounded(s: Address, x: float) -> bool:
    """True iff |s_i| <= F^i(x) for every i >= 0 (index 0 included)."""
    if not s.exact:
        raise ValueError("boundedness is only decided for exact addresses")
    norm = s.sup_norm
    L, P = len(s.preperiod), len(s.period)
    zero_tail = all(v == 0 for v in s.period)
    v = float(x)
    i = 0
    while True:
        if abs(s.entry(i)) > v:
            return False
        if i >= L and (v >= norm or zero_tail):
            return True
        if i >= L + P and v < 1.0:
            # some periodic entry is nonzero and F^i(x) stays below 1 for the
            # next P indices at least, so that entry fails there
            for j in range(i + 1, i + P + 1):
                v = growth_model(v)
                if abs(s.entry(j)) > v:
                    return False
            i += P
            continue
        v = growth_model(v)
        i += 1


@dataclass(frozen=True)
class RecurrenceGap:
    min_distance: Fraction
    distances: tuple[tuple[int, Fraction], ...]
    complete: bool          # k_max covers the whole (finite) shift orbit
    non_recurrent: bool     # s lies outside the closure of its own orbit


def orbit_recurrence_gap(s: Address, k_max: int) -> RecurrenceGap:
    if not s.exact:
        raise ValueError("recurrence gaps are only computed for exact addresses")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    distances = tuple((k, metric_distance(s, shift(s, k))) for k in range(1, k_max + 1))
    # the orbit {sigma^k s : k >= 1} is finite and closed; it is exhausted by
    # k = 1 .. orbit_size, so non-recurrence is decided exactly
    full = [metric_distance(s, shift(s, k)) for k in range(1, s.orbit_size + 1)]
    return RecurrenceGap(
        min_distance=min(d for _, d in distances),
        distances=distances,
        complete=k_max >= s.orbit_size,
        non_recurrent=min(full) > 0,
    )


def shift_orbit(s: Address) -> list[Address]:
    """The distinct addresses sigma^k(s), k = 0 .. orbit_size-1."""
    return [shift(s, k) for k in range(s.orbit_size)]


def shift_closure(addresses: Iterable[Address]) -> set[Address]:
    out: set[Address] = set()
    for a in addresses:
        out.update(shift_orbit(a))
    return out


def parse_addresses(lines: Sequence[str] | str) -> list[Address]:
    """Parse one address per line (or ';'-separated), skipping blanks and '#' comments."""
    if isinstance(lines, str):
        lines = re.split(r"[\n;]", lines)
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(Address.parse(line))
    return out
