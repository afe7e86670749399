"""Certificates for the assembled measure.

The two sides of the verdict:

* crystalline: mu pairs boundedly with Schwartz functions (checked against
  an explicit seminorm bound), and mu, mu^ are both locally finite atomic
  measures whose transforms agree under Poisson summation;
* not a Fourier quasicrystal: the convolution of mu^ with psi^ blows up
  along t_n = 1/(2 tau_n), which is impossible if |mu| were tempered, and
  the variation of mu outgrows every fixed polynomial rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import measure as ms
from .construction import CrystallineMeasure, tau_power
from .errors import CertificateFailure, MismatchedLevels
from .measure import Interval, MeasureExpr, as_rational, unit_phase
from .meyer import MeyerCoefficients
from .schwartz import Gaussian, PsiFunction, eta_exact, gaussian

TWO_PATH_TOL = 1e-12


def _phase_minus(x: Fraction, t) -> complex:
    """e^{-2 pi i x t}; exact reduction when t is rational."""
    if isinstance(t, (int, Fraction)):
        return unit_phase(-x * t)
    return complex(np.exp(-2j * math.pi * float(x) * float(t)))


def _check_psi(fm: CrystallineMeasure, p: PsiFunction):
    want = tuple((lv.params.tau, lv.placement.lam) for lv in fm.levels)
    if tuple(p.levels) != want:
        raise MismatchedLevels("psi was built for different (tau_n, lambda_n) than the measure")


# -- blow-up -----------------------------------------------------------------

def hat_convolution_at(fm: CrystallineMeasure, p: PsiFunction, t) -> complex:
    """(mu^ * psi^)(t) = sum_x w_x psi(x) e^{-2 pi i x t}.

    Only the two atoms of each level inside its psi bump contribute, giving
    sum_n tau_n^{-1/3} [eta(tau_n lambda_n) e(-(lambda_n + tau_n) t) - e(-lambda_n t)].
    """
    _check_psi(fm, p)
    total = 0j
    for lv in fm.levels:
        tau, lam = lv.params.tau, lv.placement.lam
        amp = tau_power(tau, Fraction(-1, 3))
        total += amp * (eta_exact(tau * lam) * _phase_minus(lam + tau, t) - _phase_minus(lam, t))
    return total


def hat_convolution_enumerated(fm: CrystallineMeasure, p: PsiFunction, t) -> complex:
    """Same quantity by enumerating every atom of mu under the bumps of psi."""
    _check_psi(fm, p)
    total = 0j
    for W in p.windows():
        for a in ms.atoms_in(fm.mu, W):
            total += a.weight * p.at_exact(a.position) * _phase_minus(a.position, t)
    return total


@dataclass(frozen=True)
class BlowupRow:
    n: int
    t: int
    value: complex
    abs_value: float
    lower: float
    threshold: float
    two_path_rel: float

    @property
    def margin(self) -> float:
        return self.abs_value - self.lower

    @property
    def passed(self) -> bool:
        return self.abs_value >= self.lower >= self.threshold and self.two_path_rel <= TWO_PATH_TOL


@dataclass(frozen=True)
class BlowupReport:
    rows: tuple

    @property
    def passed(self) -> bool:
        return bool(self.rows) and all(r.passed for r in self.rows)


def blowup_series(fm: CrystallineMeasure, raise_on_fail: bool = True) -> BlowupReport:
    """|F(t_n)| against the explicit lower bound at every level.

    L_n = 2 tau_n^{-1/3} - 2 sum_{p<n} tau_p^{-1/3}
          - sum_{p>n} tau_p^{-1/3} min(2, pi tau_p / tau_n).
    """
    if not fm.levels:
        raise ValueError("blow-up needs at least one level")
    p = fm.psi()
    rows = []
    for lv in fm.levels:
        tau = lv.params.tau
        t = 1 / (2 * tau)
        if t.denominator != 1:
            raise ValueError(f"t_{lv.n} = {t} is not an integer; tau must be dyadic")
        t = int(t)
        F = hat_convolution_at(fm, p, t)
        G = hat_convolution_enumerated(fm, p, t)
        rel = abs(F - G) / max(abs(F), 1e-300)
        lower = 2 * tau_power(tau, Fraction(-1, 3))
        for o in fm.levels:
            to = o.params.tau
            if o.n < lv.n:
                lower -= 2 * tau_power(to, Fraction(-1, 3))
            elif o.n > lv.n:
                lower -= tau_power(to, Fraction(-1, 3)) * min(2.0, math.pi * float(to / tau))
        row = BlowupRow(lv.n, t, F, abs(F), lower, 2 / 3 * tau_power(tau, Fraction(-1, 3)), rel)
        if raise_on_fail and not row.passed:
            raise CertificateFailure(
                f"level {lv.n}: |F(t)| = {row.abs_value:.6g}, L = {row.lower:.6g}, "
                f"threshold {row.threshold:.6g}, two-path diff {rel:.3g}",
                level=lv.n,
            )
        rows.append(row)
    return BlowupReport(tuple(rows))


def convolution_grid(fm: CrystallineMeasure, ts) -> np.ndarray:
    """|mu^ * psi^| on a float t grid (plot data)."""
    p = fm.psi()
    return np.array([abs(hat_convolution_at(fm, p, float(t))) for t in ts])


# -- boundedness contrast ----------------------------------------------------

def _modulated(g: Gaussian, t: float) -> Gaussian:
    # g(x) e^{-2 pi i t x}
    return Gaussian(g.a, g.x0, g.xi - t, g.amp)


def _stieltjes_bound(m: MeasureExpr, f: Gaussian, R) -> float:
    """int |f| d|m| over [-R, R] plus the certified tail: bounds |(m, f e(-t .))| for every t."""
    keys, D, w = ms.collect(m, Interval.closed(-R, R))
    inside = float(np.sum(np.abs(w) * np.abs(f(ms.positions_float(keys, D))))) if len(w) else 0.0
    absf = Gaussian(f.a, f.x0, 0.0, abs(f.amp))
    return inside + ms.pair_tail(m, absf, R)


def boundedness_contrast(fm: CrystallineMeasure, g: Gaussian | None = None, ts=None) -> dict:
    """sup_t |(mu^ * g)(t)| per single level against its t-independent bound.

    (mu^ * g)(t) = (mu, g-check e(-t .)), bounded by int |g-check| d|mu|,
    a finite Stieltjes sum against the variation.  Each single level obeys
    its bound; the blow-up values show the bump family psi_n has no uniform
    bound as levels are added.
    """
    g = g or gaussian()
    gv = g.inverse_transform()
    R = Fraction(math.ceil(gv.default_radius()))
    if ts is None:
        ts = [0.0] + [float(1 / (2 * lv.params.tau)) for lv in fm.levels]
    ts = [float(t) for t in ts]
    levels = []
    for lv in fm.levels:
        m = lv.measure()
        vals = [abs(ms.pair(m, _modulated(gv, t), R).value) for t in ts]
        bound = _stieltjes_bound(m, gv, R)
        levels.append({"n": lv.n, "sup": max(vals), "bound": bound, "passed": max(vals) <= bound})
    full = [abs(ms.pair(fm.mu, _modulated(gv, t), R).value) for t in ts] if fm.levels else [0.0 for _ in ts]
    blow = [r.abs_value for r in blowup_series(fm, raise_on_fail=False).rows] if fm.levels else []
    return {
        "levels": levels,
        "full_sup": max(full) if full else 0.0,
        "blowup": blow,
        "passed": all(r["passed"] for r in levels),
    }


# -- temperedness ------------------------------------------------------------

def shift_difference_constant(M: int) -> float:
    return 5 * M * M + math.pi**2 / 3


def shift_difference_check(sigma: MeyerCoefficients, phi: Gaussian, tau, h=0) -> dict:
    """|(sigma^{h+tau} - sigma^h, phi)| <= (5M^2 + pi^2/3) max|c| N_{2,1}(phi) tau."""
    tau, h = as_rational(tau), as_rational(h)
    M = sigma.M
    if not (0 < tau < 1 and abs(h) < Fraction(M, 3) and M > 2):
        raise ValueError("needs 0 < tau < 1, |h| < M/3 and M > 2")
    m = MeasureExpr((sigma.term(h + tau, 1.0), sigma.term(h, -1.0)))
    R = Fraction(math.ceil(phi.default_radius()))
    pr = ms.pair(m, phi, R)
    lhs = abs(pr.value) + pr.tail_bound
    rhs = shift_difference_constant(M) * float(np.abs(sigma.c).max()) * phi.seminorm_bound(2, 1) * float(tau)
    out = {"M": M, "tau": str(tau), "h": str(h), "lhs": lhs, "rhs": rhs, "passed": lhs <= rhs}
    if not out["passed"]:
        raise CertificateFailure(f"M={M}: pairing {lhs:.6g} exceeds bound {rhs:.6g}", M=M)
    return out


def temperedness_certificate(fm: CrystallineMeasure, phi: Gaussian) -> dict:
    """|(mu, phi)| <= sum_n (5 M_n^2 + pi^2/3) tau_n^{1/3} max|c| N_{2,1}(phi)."""
    N21 = phi.seminorm_bound(2, 1)
    bound, series = 0.0, []
    for lv in fm.levels:
        tau, M = lv.params.tau, lv.params.M
        third = tau_power(tau, Fraction(1, 3))
        bound += shift_difference_constant(M) * third * float(np.abs(lv.meyer.c).max()) * N21
        series.append({"n": lv.n, "tau^(1/3) M^2": third * M * M})
    if fm.levels:
        R = Fraction(math.ceil(phi.default_radius()))
        pr = ms.pair(fm.mu, phi, R)
        direct = abs(pr.value) + pr.tail_bound
    else:
        direct = 0.0
    cfg = fm.config
    # tau_{n+1}^{1/3} M_{n+1}^2 < tau_n^{1/3} M_n^2  iff  q (2n+1)/3 > 2 log2 B
    cross = math.floor((6 * math.log2(cfg.base) / cfg.q - 1) / 2) + 1
    out = {
        "direct": direct,
        "bound": bound,
        "series": series,
        "decreasing_from": max(cross, 1),
        "passed": direct <= bound,
    }
    if not out["passed"]:
        raise CertificateFailure(f"|(mu, phi)| = {direct:.6g} exceeds {bound:.6g}")
    return out


# -- variation growth --------------------------------------------------------

@dataclass(frozen=True)
class GrowthRow:
    r: Fraction
    mass: float
    exponent: float | None  # None when M(r) = 0 or r <= 1


@dataclass(frozen=True)
class GrowthReport:
    rows: tuple

    @property
    def escalating(self) -> bool:
        """Exponents strictly increase by at least 1 from row to row."""
        e = [r.exponent for r in self.rows]
        if any(x is None for x in e):
            return False
        return all(b >= a + 1 for a, b in zip(e, e[1:]))


def variation_growth(m, radii=None) -> GrowthReport:
    """M(r) = |mu|(-r, r) in closed form, with exponents log M(r)/log r."""
    if isinstance(m, CrystallineMeasure):
        if radii is None:
            radii = [2 * lv.placement.lam for lv in m.levels]
        m = m.mu
    if radii is None:
        raise ValueError("radii required for a bare measure")
    radii = [as_rational(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must increase")
    rows = []
    for r in radii:
        V = ms.variation(m, Interval.open(-r, r))
        e = math.log(V) / math.log(float(r)) if V > 0 and r > 1 else None
        rows.append(GrowthRow(r, V, e))
    return GrowthReport(tuple(rows))


# -- Poisson summation -------------------------------------------------------

def _radius_for(g: Gaussian, m: MeasureExpr, tol: float) -> Fraction:
    R = Fraction(math.ceil(g.default_radius()))
    while ms.pair_tail(m, g, R) >= tol / 10:
        R *= 2
    return R


def poisson_check(m: MeasureExpr, m_hat: MeasureExpr, g: Gaussian, radius=None, tol: float = 1e-8) -> dict:
    """(m, g^) against (m^, g) with certified tails below tol/10."""
    gh = g.transform()
    R1 = as_rational(radius) if radius is not None else _radius_for(gh, m, tol)
    R2 = as_rational(radius) if radius is not None else _radius_for(g, m_hat, tol)
    a, b = ms.pair(m, gh, R1), ms.pair(m_hat, g, R2)
    diff = abs(a.value - b.value)
    allowed = tol * (1 + abs(b.value))
    out = {
        "lhs": a.value,
        "rhs": b.value,
        "diff": diff,
        "allowed": allowed,
        "tails": (a.tail_bound, b.tail_bound),
        "passed": diff <= allowed and max(a.tail_bound, b.tail_bound) < tol / 10,
    }
    if not out["passed"]:
        raise CertificateFailure(f"Poisson residual {diff:.3g} above {allowed:.3g}")
    return out


# -- verdict -----------------------------------------------------------------

def default_gaussians(k: int = 5, seed: int = 0) -> list[Gaussian]:
    rng = np.random.default_rng(seed)
    out = [gaussian()]
    while len(out) < k:
        out.append(gaussian(rng.uniform(0.25, 4), rng.uniform(-16, 16), rng.uniform(-2, 2)))
    return out


def probe_gaussians(lv, k: int = 2, seed: int = 0) -> list[Gaussian]:
    """Gaussians g whose g^ sits on the bulk of sigma and g on the bulk of sigma^.

    Pairings against them are far from zero on both sides, so the Poisson
    comparison is informative.
    """
    mc = lv.meyer
    M = mc.M
    x_mass = float(int(np.argmax(np.abs(mc.c))) / M + lv.placement.h)
    y_mass = float(int(np.argmax(np.abs(mc.c_hat))) / M)
    rng = np.random.default_rng([seed, M])
    out = [gaussian(1.0, y_mass, x_mass)]
    while len(out) < k:
        out.append(gaussian(rng.uniform(0.25, 4), y_mass + rng.uniform(-1, 1), x_mass + rng.uniform(-1, 1)))
    return out


def discreteness_check(m: MeasureExpr, windows) -> dict:
    """Atom counts on bounded windows are finite and respect the lattice spacing."""
    counts = []
    for W in windows:
        atoms = ms.atoms_in(m, W)
        cap = sum(int(W.length * t.M) + 1 for t in m.terms) + len(m.extras)
        counts.append(len(atoms))
        if len(atoms) > cap:
            return {"counts": counts, "passed": False}
    return {"counts": counts, "passed": True}


def _run(fn, *args):
    try:
        return fn(*args)
    except CertificateFailure as exc:
        return {"passed": False, "error": str(exc)}


def headline_report(fm: CrystallineMeasure, gaussians=None) -> dict:
    """Machine-readable verdict with every sub-certificate."""
    gaussians = gaussians or default_gaussians()
    windows = [Interval.closed(Fraction(k) - Fraction(1, 3), Fraction(k) + Fraction(5, 7)) for k in (0, 3, 50, 1000)]
    temper = [_run(temperedness_certificate, fm, g) for g in gaussians]
    disc_mu = discreteness_check(fm.mu, windows)
    disc_hat = discreteness_check(fm.mu_hat, windows)
    poisson = [_run(poisson_check, lv.measure(), lv.hat(), g) for lv in fm.levels for g in probe_gaussians(lv)]
    construction_ok = fm.passed
    crystalline = (
        construction_ok
        and all(t["passed"] for t in temper)
        and disc_mu["passed"]
        and disc_hat["passed"]
        and all(p["passed"] for p in poisson)
    )
    try:
        blow = blowup_series(fm)
        blow_ok, blow_rows = blow.passed, [_blowup_dict(r) for r in blow.rows]
    except (CertificateFailure, ValueError) as exc:
        blow_ok, blow_rows = False, [{"error": str(exc)}]
    growth = variation_growth(fm) if fm.levels else GrowthReport(())
    # a bounded mu^ * phi for all Schwartz phi is necessary for |mu| tempered
    quasicrystal = not blow_ok
    return {
        "verdict": f"crystalline: {'pass' if crystalline else 'fail'}, quasicrystal: {'pass' if quasicrystal else 'fail'}",
        "crystalline": crystalline,
        "quasicrystal": quasicrystal,
        "construction_certificates": construction_ok,
        "temperedness": temper,
        "discreteness": {"mu": disc_mu, "mu_hat": disc_hat},
        "poisson": poisson,
        "blowup": blow_rows,
        "growth": [{"r": str(r.r), "M": r.mass, "exponent": r.exponent} for r in growth.rows],
        "growth_escalating": growth.escalating,
    }


def _blowup_dict(r: BlowupRow) -> dict:
    return {
        "n": r.n,
        "t": r.t,
        "abs_F": r.abs_value,
        "lower": r.lower,
        "threshold": r.threshold,
        "margin": r.margin,
        "two_path_rel": r.two_path_rel,
        "passed": r.passed,
    }
