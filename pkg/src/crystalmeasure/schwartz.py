"""Test functions: the plateau bump eta, the bump sum psi, Gaussians.

Fourier convention: f^(t) = int f(x) e^{-2 pi i x t} dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import NoDecayCertificate
from .measure import as_rational

K_MAX = 4


class SmoothFunction:
    """Pointwise-evaluable test function with optional decay certificates.

    Subclasses implement ``eval(x, k)`` (vectorised over x, derivative order
    k) and may override ``seminorm_bound`` / ``tail_bound`` with certified
    upper bounds, plus ``extent`` / ``features`` to steer grid searches.
    """

    k_max = K_MAX

    def __call__(self, x, k=0):
        return self.eval(np.asarray(x, dtype=float), k)

    def eval(self, x, k=0):
        raise NotImplementedError

    def seminorm_bound(self, n: int, m: int) -> float:
        raise NoDecayCertificate(f"{type(self).__name__} has no certified bound for N_{n},{m}")

    def tail_bound(self, R: float) -> float:
        """Upper bound on sup_{|x| > R} |f(x)| (1 + x^2)."""
        return self.seminorm_bound(2, 0)

    def at_lattice(self, keys, D: int):
        """f at the exact points keys / D."""
        if keys.dtype == object:
            return self(np.array([int(k) / D for k in keys], dtype=float))
        return self(keys / D)

    def extent(self) -> tuple[float, float]:
        return (-50.0, 50.0)

    def features(self) -> list[float]:
        return []


# -- eta ---------------------------------------------------------------------

def _logistic_derivs(v):
    """sigma(v) = 1/(1+e^{-v}) and its first four derivatives."""
    v = np.asarray(v, dtype=float)
    with np.errstate(over="ignore"):
        sig = np.where(v >= 0, 1 / (1 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1 + np.exp(-np.abs(v))))
    a = sig * (1 - sig)
    return (
        sig,
        a,
        a * (1 - 2 * sig),
        a * (1 - 6 * sig + 6 * sig**2),
        a * (1 - 2 * sig) * (1 - 12 * sig + 12 * sig**2),
    )


def _g_derivs(s, k):
    """k-th derivative of g(s) = f(s)/(f(s)+f(1-s)), f(s) = e^{-1/s}, for 0 < s < 1.

    g = sigma(v) with v = 1/(1-s) - 1/s; derivatives by Faa di Bruno.
    """
    s = np.asarray(s, dtype=float)
    u, w = 1 - s, s
    v = 1 / u - 1 / w
    sd = _logistic_derivs(v)
    if k == 0:
        return sd[0]
    dv = [None] + [math.factorial(i) * (1 / u ** (i + 1) - (-1) ** i / w ** (i + 1)) for i in range(1, 5)]
    s1, s2, s3, s4 = sd[1:]
    with np.errstate(invalid="ignore", over="ignore"):
        if k == 1:
            out = s1 * dv[1]
        elif k == 2:
            out = s2 * dv[1] ** 2 + s1 * dv[2]
        elif k == 3:
            out = s3 * dv[1] ** 3 + 3 * s2 * dv[1] * dv[2] + s1 * dv[3]
        elif k == 4:
            out = (
                s4 * dv[1] ** 4
                + 6 * s3 * dv[1] ** 2 * dv[2]
                + s2 * (3 * dv[2] ** 2 + 4 * dv[1] * dv[3])
                + s1 * dv[4]
            )
        else:
            raise ValueError("closed-form derivatives only up to order 4")
    # sigma' underflows to 0 well before the powers of v' overflow matter
    return np.where(sd[1] == 0, 0.0, out)


def eta_eval(x, k: int = 0):
    """Even C^infinity plateau bump: 1 on |x| <= 1/3, 0 on |x| >= 1/2.

    On the transition band eta(x) = g(3 - 6|x|).  Orders above 4 use nested
    central differences of the order-4 closed form.
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if k > K_MAX:
        h = 1e-3
        out = (eta_eval(x + h, k - 1) - eta_eval(x - h, k - 1)) / (2 * h)
        return float(out) if scalar else out
    ax = np.abs(x)
    band = (ax > 1 / 3) & (ax < 0.5)
    out = np.zeros_like(x)
    if k == 0:
        out[ax <= 1 / 3] = 1.0
    if band.any():
        s = 3 - 6 * ax[band]
        out[band] = (-6 * np.sign(x[band])) ** k * _g_derivs(s, k)
    return float(out) if scalar else out


def eta_exact(x: Fraction) -> float:
    """eta at an exact rational point (plateau and support decided exactly)."""
    x = abs(as_rational(x))
    if x <= Fraction(1, 3):
        return 1.0
    if x >= Fraction(1, 2):
        return 0.0
    return float(_g_derivs(float(3 - 6 * x), 0))


class BumpEta(SmoothFunction):
    def eval(self, x, k=0):
        return eta_eval(x, k)

    def extent(self):
        return (-0.5, 0.5)

    def features(self):
        return [0.0, -1 / 3, 1 / 3, -5 / 12, 5 / 12]


# -- psi ---------------------------------------------------------------------

@dataclass(frozen=True)
class PsiFunction(SmoothFunction):
    """psi(x) = sum_n tau_n^{1/3} eta(lambda_n (x - lambda_n)).

    Each summand lives on |x - lambda_n| <= 1/(2 lambda_n); the built levels
    keep these windows disjoint, so at most one summand is nonzero anywhere.
    """

    levels: tuple = ()  # ((tau, lam), ...) as Fractions

    def __post_init__(self):
        object.__setattr__(
            self, "levels", tuple((as_rational(t), as_rational(l)) for t, l in self.levels)
        )

    def eval(self, x, k=0):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for tau, lam in self.levels:
            lf = float(lam)
            arg = lf * (x - lf)
            near = np.abs(arg) < 0.5
            if near.any():
                out[near] += float(tau) ** (1 / 3) * lf**k * eta_eval(arg[near], k)
        return out

    def at_exact(self, x) -> float:
        """psi(x) with the bump argument lambda (x - lambda) formed exactly."""
        x = as_rational(x)
        total = 0.0
        for tau, lam in self.levels:
            arg = lam * (x - lam)
            if abs(arg) < Fraction(1, 2):
                total += float(tau) ** (1 / 3) * eta_exact(arg)
        return total

    def extent(self):
        if not self.levels:
            return (-1.0, 1.0)
        lams = [float(l) for _, l in self.levels]
        return (min(0.0, min(lams) - 1), max(lams) + 1)

    def features(self):
        out = []
        for _, lam in self.levels:
            lf = float(lam)
            out += [lf, lf - 1 / (3 * lf), lf + 1 / (3 * lf), lf - 5 / (12 * lf), lf + 5 / (12 * lf)]
        return out

    def windows(self):
        """Closed supports [lambda - 1/(2 lambda), lambda + 1/(2 lambda)]."""
        from .measure import Interval

        return [Interval.closed(lam - 1 / (2 * lam), lam + 1 / (2 * lam)) for _, lam in self.levels]


def psi_eval(p: PsiFunction, x, k: int = 0):
    return p.eval(np.asarray(x, dtype=float), k)


# -- Gaussians ---------------------------------------------------------------

def _envelope_sup(coeffs, a: float, n_grid: int = 4001) -> float:
    """Certified sup over v >= 0 of A(v) e^{-pi a v^2}.

    A is a polynomial with nonnegative coefficients and degree d, so
    v A'(v) <= d A(v) and the product decreases for v > sqrt(d/(2 pi a)).
    Below that point each grid cell [v_i, v_{i+1}] is bounded by
    A(v_{i+1}) e^{-pi a v_i^2}.
    """
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    d = len(coeffs) - 1
    if d <= 0:
        return float(coeffs[0]) if len(coeffs) else 0.0
    V = math.sqrt(d / (2 * math.pi * a))
    v = np.linspace(0.0, V, n_grid)
    upper = P.polyval(v[1:], coeffs) * np.exp(-math.pi * a * v[:-1] ** 2)
    return float(upper.max()) * (1 + 1e-12)


@dataclass(frozen=True)
class Gaussian(SmoothFunction):
    """amp * exp(-pi a (x - x0)^2) * exp(2 pi i xi x)."""

    a: float = 1.0
    x0: float = 0.0
    xi: float = 0.0
    amp: complex = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("Gaussian width parameter a must be positive")

    def eval(self, x, k=0):
        x = np.asarray(x, dtype=float)
        u = x - self.x0
        E = self.amp * np.exp(-math.pi * self.a * u * u) * np.exp(2j * math.pi * self.xi * x)
        D = -2 * math.pi * self.a * u + 2j * math.pi * self.xi
        b = -2 * math.pi * self.a
        if k == 0:
            poly = 1.0
        elif k == 1:
            poly = D
        elif k == 2:
            poly = D**2 + b
        elif k == 3:
            poly = D**3 + 3 * b * D
        elif k == 4:
            poly = D**4 + 6 * b * D**2 + 3 * b**2
        else:
            raise ValueError("Gaussian derivatives implemented up to order 4")
        return poly * E

    def at_lattice(self, keys, D: int):
        """Values at keys / D with offset and phase reduced in exact integers.

        Float positions lose ~|x| ulp, which swamps differences of nearby
        atoms once weights are large; here the only roundings are the final
        conversions of x - x0 and of xi x mod 1.
        """
        keys = np.asarray(keys)
        out = np.zeros(len(keys), dtype=np.complex128)
        approx = np.array([int(k) / D for k in keys]) if keys.dtype == object else keys / D
        near = np.flatnonzero(np.abs(approx - self.x0) * math.sqrt(self.a) < 30)
        if not len(near):
            return out
        x0, xi = Fraction(self.x0), Fraction(self.xi)
        u = np.empty(len(near))
        turns = np.empty(len(near))
        QD = xi.denominator * D
        for i, idx in enumerate(near):
            k = int(keys[idx])
            u[i] = (k * x0.denominator - x0.numerator * D) / (D * x0.denominator)
            turns[i] = (k * xi.numerator % QD) / QD
        out[near] = self.amp * np.exp(-math.pi * self.a * u * u) * np.exp(2j * math.pi * turns)
        return out

    def transform(self) -> "Gaussian":
        """Closed-form Fourier transform, again a Gaussian."""
        amp = self.amp / math.sqrt(self.a) * np.exp(2j * math.pi * self.x0 * self.xi)
        return Gaussian(1 / self.a, self.xi, -self.x0, complex(amp))

    def inverse_transform(self) -> "Gaussian":
        amp = self.amp / math.sqrt(self.a) * np.exp(2j * math.pi * self.x0 * self.xi)
        return Gaussian(1 / self.a, -self.xi, self.x0, complex(amp))

    def seminorm_bound(self, n: int, m: int) -> float:
        """Certified upper bound on N_{n,m}."""
        if m > K_MAX:
            raise NoDecayCertificate("Gaussian bounds implemented for m <= 4")
        beta = 2 * math.pi * self.a
        p = np.array([2 * math.pi * abs(self.xi), beta])  # bounds |D| by p(v), v = |x - x0|
        Q = [
            np.array([1.0]),
            p,
            P.polyadd(P.polypow(p, 2), [beta]),
            P.polyadd(P.polypow(p, 3), 3 * beta * p),
            P.polyadd(P.polyadd(P.polypow(p, 4), 6 * beta * P.polypow(p, 2)), [3 * beta**2]),
        ]
        weight = P.polyadd([1.0], P.polypow([abs(self.x0), 1.0], n))  # 1 + (|x0| + v)^n
        best = 0.0
        for k in range(m + 1):
            best = max(best, _envelope_sup(P.polymul(weight, Q[k]), self.a))
        return abs(self.amp) * best * (1 + 1e-12)

    def tail_bound(self, R: float) -> float:
        d = max(R - abs(self.x0), 0.0)
        uc = 1 / (2 * math.pi * self.a)
        return abs(self.amp) * (1 + (abs(self.x0) + max(d, uc)) ** 2) * math.exp(-math.pi * self.a * d * d)

    def default_radius(self) -> float:
        return abs(self.x0) + 8 / math.sqrt(self.a)

    def extent(self):
        r = 12 / math.sqrt(self.a)
        return (self.x0 - r, self.x0 + r)

    def features(self):
        return [self.x0, 0.0]


def gaussian(a=1.0, x0=0.0, xi=0.0, amp=1.0) -> Gaussian:
    return Gaussian(float(a), float(x0), float(xi), complex(amp))


# -- seminorms ---------------------------------------------------------------

@dataclass(frozen=True)
class SeminormSpec:
    n: int
    m: int
    grid_points: int = 20001
    refine_rounds: int = 4


@dataclass(frozen=True)
class SeminormResult:
    lower: float
    upper: float | None
    argmax: float


def seminorm(f: SmoothFunction, spec: SeminormSpec, require_upper: bool = False) -> SeminormResult:
    """N_{n,m}(f) = sup_x max_{k<=m} |(1+|x|^n) f^(k)(x)|.

    The grid maximum (over the function's extent, its feature points, and
    zoomed grids around the running maximiser) is a true lower bound; the
    upper bound comes from the function's decay certificate when it has one.
    """
    if spec.m > f.k_max:
        raise ValueError(f"derivatives up to order {spec.m} not supported")
    lo, hi = f.extent()
    xs = np.union1d(np.linspace(lo, hi, spec.grid_points), np.asarray(f.features(), dtype=float))

    def objective(x):
        w = 1 + np.abs(x) ** spec.n
        return np.max([np.abs(w * f(x, k)) for k in range(spec.m + 1)], axis=0)

    vals = objective(xs)
    i = int(np.argmax(vals))
    best, arg = float(vals[i]), float(xs[i])
    step = (hi - lo) / (spec.grid_points - 1)
    for _ in range(spec.refine_rounds):
        local = np.linspace(arg - step, arg + step, 201)
        lv = objective(local)
        j = int(np.argmax(lv))
        if lv[j] > best:
            best, arg = float(lv[j]), float(local[j])
        step /= 100
    try:
        upper = f.seminorm_bound(spec.n, spec.m)
    except NoDecayCertificate:
        if require_upper:
            raise
        upper = None
    return SeminormResult(best, upper, arg)


def psi_decay_report(p: PsiFunction, k_max: int = 2, n_max: int = 2) -> list[dict]:
    """Finite-level form of psi in S: tau^{1/3} lambda^k against lambda^{-N}.

    The inequality is asymptotic in the level index; at desk scale most
    rows fail, so this is report-only.  Also lists tau^{1/3}(1 + (2 lambda)^N).
    """
    rows = []
    for tau, lam in p.levels:
        t3, lf = float(tau) ** (1 / 3), float(lam)
        for k in range(k_max + 1):
            for N in range(n_max + 1):
                lhs, rhs = t3 * lf**k, lf ** (-N)
                rows.append({
                    "lambda": str(lam), "k": k, "N": N, "lhs": lhs, "rhs": rhs, "passed": lhs <= rhs,
                    "weighted_sup": t3 * (1 + (2 * lf) ** N),
                })
    return rows
