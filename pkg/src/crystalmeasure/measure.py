"""Discrete measures with exact rational atom positions.

A measure here is a finite sum of periodic lattice measures

    s * sum_{n in Z} c_{n mod M^2} e^{-2 pi i w n/M} delta_{n/M + h}

plus a finite list of explicit atoms.  Positions are ``fractions.Fraction``
throughout; weights are complex doubles.  Nothing is ever enumerated over a
full period unless the query window asks for it: the lattice indices that
land in a window are found by exact floor/ceil.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce

import numpy as np

from .errors import NoDecayCertificate

Rational = Fraction

_INT64_SAFE = 2**62


def as_rational(x) -> Fraction:
    """Coerce ints, floats (exactly), Fractions and ``"p/q"`` strings."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    raise TypeError(f"cannot interpret {x!r} as a rational")


def unit_phase(theta: Fraction) -> complex:
    """exp(2 pi i theta), reducing theta mod 1 exactly first."""
    frac = theta - math.floor(theta)
    quarter = frac * 4
    if quarter.denominator == 1:
        return (1 + 0j, 1j, -1 + 0j, -1j)[int(quarter)]
    return cmath.exp(2j * math.pi * float(frac))


def _phases(num, den: int) -> np.ndarray:
    """exp(-2 pi i num/den) for an integer array ``num``; exact reduction."""
    if isinstance(num, np.ndarray) and num.dtype != object:
        r = np.mod(num, den)
        out = np.exp(-2j * np.pi * (r / den))
    else:
        r = [int(v) % den for v in num]
        out = np.exp(-2j * np.pi * np.array([v / den for v in r], dtype=float))
        r = np.array(r, dtype=object)
    # exact values at multiples of a quarter turn
    for q, val in ((0, 1 + 0j), (1, -1j), (2, -1 + 0j), (3, 1j)):
        if (q * den) % 4 == 0:
            out[r == (q * den) // 4] = val
    return out


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction
    lo_open: bool = False
    hi_open: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", as_rational(self.lo))
        object.__setattr__(self, "hi", as_rational(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"interval with lo > hi: {self}")

    @classmethod
    def closed(cls, lo, hi):
        return cls(lo, hi)

    @classmethod
    def open(cls, lo, hi):
        return cls(lo, hi, True, True)

    @classmethod
    def closed_open(cls, lo, hi):
        return cls(lo, hi, False, True)

    @classmethod
    def around(cls, center, radius):
        """Open interval (center - radius, center + radius)."""
        center, radius = as_rational(center), as_rational(radius)
        return cls(center - radius, center + radius, True, True)

    @property
    def is_empty(self) -> bool:
        return self.lo == self.hi and (self.lo_open or self.hi_open)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        x = as_rational(x)
        above = x > self.lo if self.lo_open else x >= self.lo
        below = x < self.hi if self.hi_open else x <= self.hi
        return above and below

    def contains_interval(self, other: "Interval") -> bool:
        if other.is_empty:
            return True
        if other.lo < self.lo or (other.lo == self.lo and self.lo_open and not other.lo_open):
            return False
        if other.hi > self.hi or (other.hi == self.hi and self.hi_open and not other.hi_open):
            return False
        return True

    def intersect(self, other: "Interval") -> "Interval | None":
        if self.lo > other.lo:
            lo, lo_open = self.lo, self.lo_open
        elif self.lo < other.lo:
            lo, lo_open = other.lo, other.lo_open
        else:
            lo, lo_open = self.lo, self.lo_open or other.lo_open
        if self.hi < other.hi:
            hi, hi_open = self.hi, self.hi_open
        elif self.hi > other.hi:
            hi, hi_open = other.hi, other.hi_open
        else:
            hi, hi_open = self.hi, self.hi_open or other.hi_open
        if lo > hi or (lo == hi and (lo_open or hi_open)):
            return None
        return Interval(lo, hi, lo_open, hi_open)

    def shifted(self, h) -> "Interval":
        h = as_rational(h)
        return Interval(self.lo + h, self.hi + h, self.lo_open, self.hi_open)

    def lattice_range(self, M: int, h: Fraction = Fraction(0)) -> tuple[int, int]:
        """Integers n with n/M + h inside the interval, as (n_lo, n_hi)."""
        a = (self.lo - h) * M
        b = (self.hi - h) * M
        n_lo = math.floor(a) + 1 if self.lo_open else math.ceil(a)
        n_hi = math.ceil(b) - 1 if self.hi_open else math.floor(b)
        return n_lo, n_hi

    def __str__(self):
        return f"{'(' if self.lo_open else '['}{self.lo}, {self.hi}{')' if self.hi_open else ']'}"


def parse_interval(text: str) -> Interval:
    """Parse ``"[a, b)"``-style text; endpoints may be ``p/q`` rationals."""
    text = text.strip()
    if text[0] not in "[(" or text[-1] not in "])":
        raise ValueError(f"bad interval {text!r}")
    lo, hi = text[1:-1].split(",")
    return Interval(Fraction(lo.strip()), Fraction(hi.strip()), text[0] == "(", text[-1] == ")")


@dataclass(frozen=True)
class Atom:
    position: Fraction
    weight: complex


@dataclass(frozen=True, eq=False)
class PeriodicLatticeMeasure:
    """s * sum_n c_{n mod M^2} e^{-2 pi i w n/M} delta_{n/M + h}, w = modulation."""

    M: int
    c: np.ndarray
    shift: Fraction = Fraction(0)
    scale: complex = 1 + 0j
    modulation: Fraction = Fraction(0)

    def __post_init__(self):
        c = self.c
        if not (isinstance(c, np.ndarray) and c.dtype == np.complex128 and not c.flags.writeable):
            c = np.array(c, dtype=np.complex128)
        if self.M < 1 or c.shape != (self.M * self.M,):
            raise ValueError(f"need {self.M * self.M} coefficients for period {self.M}, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "shift", as_rational(self.shift))
        object.__setattr__(self, "modulation", as_rational(self.modulation))
        object.__setattr__(self, "scale", complex(self.scale))

    @property
    def L(self) -> int:
        return self.M * self.M

    @cached_property
    def _prefix_abs(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(np.abs(self.c))))

    @property
    def period_variation(self) -> float:
        """|s| * sum_j |c_j|: the variation carried by one period."""
        return abs(self.scale) * float(self._prefix_abs[-1])

    def replace(self, **kw) -> "PeriodicLatticeMeasure":
        args = dict(M=self.M, c=self.c, shift=self.shift, scale=self.scale, modulation=self.modulation)
        args.update(kw)
        return PeriodicLatticeMeasure(**args)

    def weights_at(self, n) -> np.ndarray:
        n_idx = np.asarray([int(v) % self.L for v in n]) if _is_object(n) else np.mod(n, self.L)
        w = self.scale * self.c[n_idx]
        if self.modulation:
            p, q = self.modulation.numerator, self.modulation.denominator
            w = w * _phases(_mul(n, p), q * self.M)
        return w

    def abs_sum(self, n_lo: int, n_hi: int) -> float:
        """Closed-form sum of |c_{n mod L}| over n_lo <= n <= n_hi, times |s|."""
        if n_hi < n_lo:
            return 0.0
        P, L = self._prefix_abs, self.L

        def S(n):
            q, r = divmod(n, L)
            return q * P[-1] + P[r]

        q_lo, q_hi = n_lo // L, (n_hi + 1) // L
        if q_lo == q_hi:
            total = P[(n_hi + 1) % L] - P[n_lo % L]
        else:
            total = S(n_hi + 1) - S(n_lo)
        return abs(self.scale) * float(total)

    def lattice_contains(self, x: Fraction) -> bool:
        return ((x - self.shift) * self.M).denominator == 1


def _is_object(a) -> bool:
    return not isinstance(a, np.ndarray) or a.dtype == object


def _mul(n, p: int):
    if isinstance(n, np.ndarray) and n.dtype != object and abs(p) * max(1, int(np.abs(n).max(initial=0))) < _INT64_SAFE:
        return n * p
    return np.array([int(v) * p for v in n], dtype=object)


def lattices_intersect(a: PeriodicLatticeMeasure, b: PeriodicLatticeMeasure) -> bool:
    """Whether (1/M_a)Z + h_a and (1/M_b)Z + h_b share a point."""
    return ((a.shift - b.shift) * math.lcm(a.M, b.M)).denominator == 1


@dataclass(frozen=True)
class MeasureExpr:
    terms: tuple = ()
    extras: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(t for t in self.terms if t.scale != 0))
        object.__setattr__(self, "extras", tuple(a for a in self.extras if a.weight != 0))

    @property
    def is_zero_repr(self) -> bool:
        return not self.terms and not self.extras

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, other)

    def __neg__(self):
        return scale(self, -1)

    def __rmul__(self, s):
        return scale(self, s)


def zero() -> MeasureExpr:
    return MeasureExpr()


def dirac(x, weight=1.0) -> MeasureExpr:
    return MeasureExpr((), (Atom(as_rational(x), complex(weight)),))


def from_atoms(atoms) -> MeasureExpr:
    return MeasureExpr((), tuple(Atom(as_rational(a.position), complex(a.weight)) for a in atoms))


def lattice(M: int, c, shift=0, s=1.0, modulation=0) -> MeasureExpr:
    return MeasureExpr((PeriodicLatticeMeasure(M, c, as_rational(shift), s, as_rational(modulation)),))


def shift(m: MeasureExpr, h) -> MeasureExpr:
    h = as_rational(h)
    if h == 0:
        return m
    return MeasureExpr(
        tuple(t.replace(shift=t.shift + h) for t in m.terms),
        tuple(Atom(a.position + h, a.weight) for a in m.extras),
    )


def scale(m: MeasureExpr, s) -> MeasureExpr:
    s = complex(s)
    if s == 0:
        return zero()
    if s == 1:
        return m
    return MeasureExpr(
        tuple(t.replace(scale=t.scale * s) for t in m.terms),
        tuple(Atom(a.position, a.weight * s) for a in m.extras),
    )


def add(a: MeasureExpr, b: MeasureExpr) -> MeasureExpr:
    return MeasureExpr(a.terms + b.terms, a.extras + b.extras)


def subtract(a: MeasureExpr, b: MeasureExpr) -> MeasureExpr:
    return add(a, scale(b, -1))


def _common_denominator(m: MeasureExpr) -> int:
    dens = [t.M * t.shift.denominator for t in m.terms] + [a.position.denominator for a in m.extras]
    return reduce(math.lcm, dens, 1)


def collect(m: MeasureExpr, window: Interval, eps: float = 0.0):
    """Merged atoms of ``m`` in ``window`` as arrays.

    Returns ``(keys, D, weights)`` with positions ``keys / D`` strictly
    ascending; coincident atoms are summed and atoms with ``|w| <= eps`` are
    dropped (eps = 0 drops only exact zeros).
    """
    D = _common_denominator(m)
    big = (abs(window.lo) + abs(window.hi) + 2) * D >= _INT64_SAFE
    keys, weights = [], []
    for t in m.terms:
        n_lo, n_hi = window.lattice_range(t.M, t.shift)
        if n_hi < n_lo:
            continue
        if big:
            n = np.array(range(n_lo, n_hi + 1), dtype=object)
        else:
            n = np.arange(n_lo, n_hi + 1, dtype=np.int64)
        step = D // t.M
        off = int(t.shift * D)
        keys.append(n * step + off)
        weights.append(t.weights_at(n))
    ex = [a for a in m.extras if window.contains(a.position)]
    if ex:
        keys.append(np.array([int(a.position * D) for a in ex], dtype=object if big else np.int64))
        weights.append(np.array([a.weight for a in ex], dtype=np.complex128))
    if not keys:
        return np.zeros(0, dtype=np.int64), D, np.zeros(0, dtype=np.complex128)
    k = np.concatenate(keys)
    w = np.concatenate(weights)
    if len(keys) > 1 or ex:
        uk, inv = np.unique(k, return_inverse=True)
        acc = np.zeros(len(uk), dtype=np.complex128)
        np.add.at(acc, inv, w)
        k, w = uk, acc
    keep = np.abs(w) > eps
    return k[keep], D, w[keep]


def positions_float(keys, D: int) -> np.ndarray:
    if keys.dtype == object:
        return np.array([float(Fraction(int(v), D)) for v in keys], dtype=float)
    return keys / D


def atoms_in(m: MeasureExpr, window: Interval, eps: float = 0.0) -> list[Atom]:
    """Exactly the atoms of ``m`` in ``window``, merged and sorted by position."""
    keys, D, w = collect(m, window, eps)
    return [Atom(Fraction(int(k), D), complex(x)) for k, x in zip(keys, w)]


def restrict(m: MeasureExpr, window: Interval, eps: float = 0.0) -> list[Atom]:
    """The restriction of ``m`` to ``window`` (same atoms as :func:`atoms_in`)."""
    return atoms_in(m, window, eps)


def _separable(m: MeasureExpr) -> bool:
    ts = m.terms
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            if lattices_intersect(ts[i], ts[j]):
                return False
    return not any(t.lattice_contains(a.position) for t in ts for a in m.extras)


def variation(m: MeasureExpr, window: Interval) -> float:
    """|m|(window): sum of |weight| over merged atoms.

    Periodic terms whose lattices are pairwise disjoint are summed in closed
    form (complete periods times the per-period variation plus prefix sums);
    otherwise the atoms are merged and summed directly.
    """
    if not _separable(m):
        _, _, w = collect(m, window)
        return float(np.sum(np.abs(w)))
    total = 0.0
    for t in m.terms:
        total += t.abs_sum(*window.lattice_range(t.M, t.shift))
    if m.extras:
        _, _, w = collect(MeasureExpr((), m.extras), window)
        total += float(np.sum(np.abs(w)))
    return total


def variation_brute(m: MeasureExpr, window: Interval) -> float:
    _, _, w = collect(m, window)
    return float(np.sum(np.abs(w)))


@dataclass(frozen=True)
class PairResult:
    value: complex
    tail_bound: float


def pair(m: MeasureExpr, f, radius) -> PairResult:
    """Truncated pairing sum_{|x| <= radius} w_x f(x) with a tail estimate.

    ``f`` must be vectorised and expose ``tail_bound(R)`` bounding
    sup_{|x| > R} |f(x)| (1 + x^2); the tail of each periodic term is then
    at most 2 |s| V (1/(1+R^2) + (pi/2 - atan R)/M) times that bound, V the
    per-period variation.
    """
    R = as_rational(radius)
    if R <= 0:
        raise ValueError("radius must be positive")
    keys, D, w = collect(m, Interval.closed(-R, R))
    at = getattr(f, "at_lattice", None)
    vals = at(keys, D) if at is not None else f(positions_float(keys, D))
    value = complex(np.sum(w * vals)) if len(w) else 0j
    return PairResult(value, pair_tail(m, f, R))


def pair_tail(m: MeasureExpr, f, radius) -> float:
    """Bound on |sum_{|x| > radius} w_x f(x)| from f's decay certificate."""
    R = as_rational(radius)
    if m.is_zero_repr:
        return 0.0
    tb = getattr(f, "tail_bound", None)
    if tb is None:
        raise NoDecayCertificate(f"{f!r} carries no decay certificate; cannot bound the pairing tail")
    Rf = float(R)
    tail = 0.0
    for t in m.terms:
        tail += 2 * t.period_variation * (1 / (1 + Rf * Rf) + (math.pi / 2 - math.atan(Rf)) / t.M)
    tail += sum(abs(a.weight) / (1 + float(a.position) ** 2) for a in m.extras if abs(a.position) > R)
    return tail * tb(Rf)


def fourier_transform_term(t: PeriodicLatticeMeasure, c_hat=None) -> PeriodicLatticeMeasure:
    """Distributional Fourier transform of one periodic lattice term.

    With nu = sum_n c_n delta_{n/M}, Poisson summation gives
    nu^ = (1/M) sum_m dft(c)_m delta_{m/M}.  Shifting by h multiplies by
    e^{-2 pi i h y}; modulating by e^{-2 pi i w x} translates by -w.
    """
    if c_hat is None:
        c_hat = np.fft.fft(t.c)
    s = t.scale * unit_phase(t.shift * t.modulation)
    return PeriodicLatticeMeasure(t.M, np.asarray(c_hat) / t.M, -t.modulation, s, t.shift)


def fourier_transform(m: MeasureExpr) -> MeasureExpr:
    if m.extras:
        raise ValueError("finite atom lists have no discrete Fourier transform")
    return MeasureExpr(tuple(fourier_transform_term(t) for t in m.terms))
