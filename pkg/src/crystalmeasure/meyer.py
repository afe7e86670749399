"""Periodic lattice measures with a spectral gap on both sides.

For a period M and gap fraction alpha we want coefficients c of length M^2
such that the measure sum_k sum_j c_j delta_{kM + j/M} has no atom in
[-alpha M, alpha M] and neither does its Fourier transform.  The transform
is (1/M) sum_m dft(c)_{m mod M^2} delta_{m/M}, so both conditions are index
windows on a length-M^2 vector: c vanishes on the time window and dft(c)
vanishes on the (identical) frequency window.  Two subspaces of dimension
M^2 - W each; they meet nontrivially as soon as 2W < M^2.

Two solvers are provided: an exact nullspace of the partial DFT matrix (small
M) and alternating projections between the two subspaces driven by FFTs
(any M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import CertificateFailure, InfeasibleWindow, NoSolution
from .measure import MeasureExpr, PeriodicLatticeMeasure, as_rational, fourier_transform_term

NULLSPACE_LIMIT = 4096  # largest M^2 handled by dense linear algebra
DEFAULT_TOL = 1e-9
MAX_ROUNDS = 100_000


@dataclass(frozen=True)
class WindowSpec:
    alpha: Fraction
    M: int

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_rational(self.alpha))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.M < 1:
            raise ValueError("M must be a positive integer")

    @property
    def L(self) -> int:
        return self.M * self.M

    @property
    def within_hypothesis(self) -> bool:
        """alpha < 1/6, the range in which the gap measures are known to exist."""
        return self.alpha < Fraction(1, 6)


def forbidden_mask(w: WindowSpec) -> np.ndarray:
    # j/M <= alpha M  or  j/M >= M - alpha M, i.e. j <= alpha L or L - j <= alpha L
    L = w.L
    p, q = w.alpha.numerator, w.alpha.denominator
    j = np.arange(L, dtype=object if L * q >= 2**62 else np.int64)
    return (j * q <= p * L) | ((L - j) * q <= p * L)


def forbidden_time_indices(w: WindowSpec) -> np.ndarray:
    """Indices j in [0, M^2) whose lattice point j/M lies within alpha M of kM."""
    return np.flatnonzero(forbidden_mask(w))


def forbidden_freq_indices(w: WindowSpec) -> np.ndarray:
    """Frequency indices m with m/M within alpha M of the frequency lattice period.

    Same set as the time window: the transform lives on the same lattice
    with the same period.
    """
    return forbidden_time_indices(w)


def dft(c) -> np.ndarray:
    """Unnormalised forward DFT, sum_j c_j e^{-2 pi i j m / L}."""
    c = np.asarray(c, dtype=np.complex128)
    if c.ndim != 1 or len(c) < 1:
        raise ValueError("dft needs a nonempty vector")
    return np.fft.fft(c)


def dft_direct(c) -> np.ndarray:
    """O(L^2) reference DFT."""
    c = np.asarray(c, dtype=np.complex128)
    L = len(c)
    jm = np.outer(np.arange(L), np.arange(L)) % L
    return np.exp(-2j * np.pi * jm / L) @ c


@dataclass(frozen=True, eq=False)
class MeyerCoefficients:
    M: int
    alpha: Fraction
    c: np.ndarray
    j_star: int
    certificate: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.array(self.c, dtype=np.complex128)
        c.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "alpha", as_rational(self.alpha))

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(self.alpha, self.M)

    @cached_property
    def c_hat(self) -> np.ndarray:
        """dft(c) with the certified-negligible forbidden entries set to zero."""
        chat = dft(self.c)
        chat[forbidden_mask(self.window)] = 0
        chat.flags.writeable = False
        return chat

    def term(self, h=0, s=1.0) -> PeriodicLatticeMeasure:
        return PeriodicLatticeMeasure(self.M, self.c, as_rational(h), s)

    def measure(self, h=0, s=1.0) -> MeasureExpr:
        return MeasureExpr((self.term(h, s),))


def _partial_dft(L: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.exp(-2j * np.pi * (np.outer(rows, cols) % L) / L)


def nullspace_dimension(w: WindowSpec) -> int:
    T = forbidden_mask(w)
    A = _partial_dft(w.L, np.flatnonzero(T), np.flatnonzero(~T))
    if A.shape[0] == 0:
        return A.shape[1]
    return A.shape[1] - int(np.linalg.matrix_rank(A))


def _check_feasible(w: WindowSpec, T: np.ndarray):
    W = int(T.sum())
    if 2 * W >= w.L:
        raise InfeasibleWindow(
            f"M={w.M}, alpha={w.alpha}: {W} forbidden time + {W} forbidden frequency indices "
            f"leave no guaranteed solution in dimension {w.L}"
        )


def _normalize(c: np.ndarray) -> tuple[np.ndarray, int]:
    j = int(np.argmax(np.abs(c)))
    if c[j] == 0:
        raise NoSolution("solver returned the zero vector")
    c = c / c[j]
    c[j] = 1.0
    over = np.abs(c) > 1.0
    c[over] /= np.abs(c[over])
    return c, j


def _freq_residual(c: np.ndarray, F: np.ndarray) -> float:
    X = np.fft.fft(c)
    top = np.abs(X).max()
    return float(np.abs(X[F]).max() / top) if F.any() and top > 0 else 0.0


def _solve_nullspace(w, T, rng):
    allowed = np.flatnonzero(~T)
    A = _partial_dft(w.L, np.flatnonzero(T), allowed)
    N = scipy.linalg.null_space(A) if A.shape[0] else np.eye(len(allowed))
    if N.shape[1] == 0:
        raise NoSolution(f"partial DFT for M={w.M} has trivial nullspace")
    coef = rng.standard_normal(N.shape[1]) + 1j * rng.standard_normal(N.shape[1])
    c = np.zeros(w.L, dtype=np.complex128)
    c[allowed] = N @ coef
    return c, {"nullspace_dim": int(N.shape[1])}


def _envelope(L: int, T: np.ndarray) -> np.ndarray:
    # Gaussian bump centred at L/2, the point farthest from both windows
    j = np.arange(L)
    bad = np.flatnonzero(T)
    if len(bad):
        d = np.abs(bad - L / 2)
        margin = float(np.minimum(d, L - d).min())
    else:
        margin = L / 2
    width = max(margin / 9, math.sqrt(L / (2 * math.pi)))
    return np.exp(-0.5 * ((j - L / 2) / width) ** 2)


def _solve_alternating(w, T, rng, tol, max_rounds, stall_rounds=2000):
    L = w.L
    F = T
    env = _envelope(L, T)
    x = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    x = np.fft.ifft(np.fft.fft(x * env) * env)
    x[T] = 0
    best, best_round, rounds = np.inf, 0, 0
    for rounds in range(1, max_rounds + 1):
        X = np.fft.fft(x)
        top = np.abs(X).max()
        if top == 0:
            raise NoSolution("iterate collapsed to zero; retry with another seed")
        r = float(np.abs(X[F]).max() / top) if F.any() else 0.0
        if r <= tol:
            break
        if r < best / 2:
            best, best_round = r, rounds
        elif rounds - best_round > stall_rounds:
            break
        X[F] = 0
        y = np.fft.ifft(X)
        y[T] = 0
        # Gearhart-Koshy line search along the projection step
        d = y - x
        dd = np.vdot(d, d).real
        if dd == 0:
            break
        x = x - (np.vdot(x, d).real / dd) * d
        x[T] = 0
    info = {"rounds": rounds, "polished": False}
    r = _freq_residual(x, F)
    if r > tol and L <= NULLSPACE_LIMIT:
        # near-degenerate principal angles stall the iteration on small
        # lattices; remove the leftover with a min-norm correction
        allowed = np.flatnonzero(~T)
        A = _partial_dft(L, np.flatnonzero(F), allowed)
        delta = np.linalg.lstsq(A, -np.fft.fft(x)[F], rcond=None)[0]
        x[allowed] += delta
        info["polished"] = True
    return x, info


def build_meyer(
    w: WindowSpec,
    method: str = "auto",
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_rounds: int = MAX_ROUNDS,
) -> MeyerCoefficients:
    """Coefficients of a gap measure for ``w``, normalised so max |c_j| = c[j_star] = 1."""
    T = forbidden_mask(w)
    _check_feasible(w, T)
    if method == "auto":
        method = "nullspace" if w.L <= NULLSPACE_LIMIT else "alternating_projection"
    rng = np.random.default_rng([seed, w.M])
    if method == "nullspace":
        if w.L > NULLSPACE_LIMIT:
            raise ValueError(f"nullspace method limited to M^2 <= {NULLSPACE_LIMIT}")
        c, info = _solve_nullspace(w, T, rng)
    elif method == "alternating_projection":
        c, info = _solve_alternating(w, T, rng, tol, max_rounds)
    else:
        raise ValueError(f"unknown method {method!r}")
    c[T] = 0
    c, j_star = _normalize(c)
    cert = {
        "method": method,
        "seed": seed,
        "tol": tol,
        "time_residual": float(np.abs(c[T]).max()) if T.any() else 0.0,
        "freq_residual": _freq_residual(c, T),
        **info,
    }
    if cert["freq_residual"] > tol:
        raise NoSolution(f"M={w.M}: frequency residual {cert['freq_residual']:.3g} above tol {tol:g}")
    return MeyerCoefficients(w.M, w.alpha, c, j_star, cert)


def verify_meyer(mc: MeyerCoefficients, w: WindowSpec | None = None, tol: float = DEFAULT_TOL) -> dict:
    """Check the gap certificate; raise CertificateFailure at the first violation."""
    w = w or mc.window
    if mc.M != w.M or len(mc.c) != w.L:
        raise CertificateFailure(f"coefficients for M={mc.M} checked against M={w.M}")
    T = forbidden_mask(w)
    c = mc.c
    bad = np.flatnonzero(T & (c != 0))
    if len(bad):
        j = int(bad[0])
        raise CertificateFailure(f"c[{j}] = {c[j]} is nonzero on the forbidden time window", index=j)
    X = np.abs(dft(c))
    top = X.max()
    rel = X / top if top > 0 else X
    over = np.flatnonzero(T & (rel > tol))
    if len(over):
        m = int(over[np.argmax(rel[over])])
        raise CertificateFailure(
            f"|dft(c)[{m}]|/max = {rel[m]:.3g} exceeds tol {tol:g} on the forbidden frequency window", index=m
        )
    if c[mc.j_star] != 1:
        raise CertificateFailure(f"c[j_star={mc.j_star}] = {c[mc.j_star]} != 1", index=mc.j_star)
    big = np.flatnonzero(np.abs(c) > 1)
    if len(big):
        raise CertificateFailure(f"|c[{int(big[0])}]| exceeds 1", index=int(big[0]))
    return {
        "M": w.M,
        "alpha": str(w.alpha),
        "time_residual": float(np.abs(c[T]).max()) if T.any() else 0.0,
        "freq_residual": float(rel[T].max()) if T.any() else 0.0,
        "j_star": mc.j_star,
        "tol": tol,
        "passed": True,
    }


def fourier_side_measure(mc: MeyerCoefficients, h=0, s=1.0) -> PeriodicLatticeMeasure:
    """The transform of s * sigma^h: (s/M) sum_m c_hat_m e^{-2 pi i h m/M} delta_{m/M}.

    The phase is carried as a modulation so it stays exact for any rational h.
    """
    return fourier_transform_term(mc.term(h, s), c_hat=mc.c_hat)
