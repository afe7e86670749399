"""Assembly of mu = sum_n tau_n^{-2/3} (sigma_{M_n}^{h_n + tau_n} - sigma_{M_n}^{h_n}).

Each level n uses a gap measure sigma for period M_n = B^n, a dyadic step
tau_n, and a shift h_n chosen so that one atom pair of the level sits alone
in a tiny window around lambda_n.  All placement geometry is exact.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from . import measure as ms
from .errors import (
    CertificateFailure,
    EmptyInterval,
    NoAdmissibleSubinterval,
    ScheduleInfeasible,
)
from .measure import Interval, MeasureExpr, as_rational
from .meyer import DEFAULT_TOL, MeyerCoefficients, WindowSpec, build_meyer, fourier_side_measure, verify_meyer
from .schwartz import PsiFunction

THIN_SAFETY = 1 - 1e-9


@dataclass(frozen=True)
class BuildConfig:
    base: int = 32
    alpha: Fraction = Fraction(1, 8)
    n_lo: int = 1
    n_hi: int = 2
    q: int = 8
    seed: int = 0
    tol: float = DEFAULT_TOL
    # one solver for every level keeps the levels comparable; the nullspace
    # solver returns spread-out vectors with much larger l1 norm at M=32
    method: str = "alternating_projection"
    precision: str = "double"

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_rational(self.alpha))
        if self.base < 2:
            raise ValueError("base must be at least 2")
        if self.precision != "double":
            raise ValueError("only double-precision weights are supported")

    @property
    def levels(self) -> range:
        return range(self.n_lo, self.n_hi + 1)

    def period(self, n: int) -> int:
        return self.base**n


@dataclass(frozen=True)
class LevelParams:
    n: int
    M: int
    tau: Fraction

    @property
    def t(self) -> Fraction:
        """Probe time 1/(2 tau)."""
        return 1 / (2 * self.tau)

    @property
    def weight(self) -> float:
        """tau^{-2/3}."""
        return tau_power(self.tau, Fraction(-2, 3))


def tau_power(tau: Fraction, p: Fraction) -> float:
    """tau**p in floating point, exact in the exponent for dyadic tau."""
    if tau.numerator == 1 and tau.denominator & (tau.denominator - 1) == 0:
        e = tau.denominator.bit_length() - 1
        return 2.0 ** float(-e * p)
    return float(tau) ** float(p)


@dataclass(frozen=True)
class LevelPlacement:
    n: int
    j_star: int
    j_dd: int
    h: Fraction
    lam: Fraction

    @property
    def window(self) -> Interval:
        """(lambda - 1/(2 lambda), lambda + 1/(2 lambda))."""
        return Interval.around(self.lam, 1 / (2 * self.lam))


@dataclass(frozen=True, eq=False)
class Level:
    params: LevelParams
    meyer: MeyerCoefficients
    placement: LevelPlacement

    @property
    def n(self) -> int:
        return self.params.n

    def terms(self):
        """(tau^{-2/3} sigma^{h+tau}, -tau^{-2/3} sigma^h)."""
        s = self.params.weight
        h, tau = self.placement.h, self.params.tau
        return (self.meyer.term(h + tau, s), self.meyer.term(h, -s))

    def measure(self) -> MeasureExpr:
        return MeasureExpr(self.terms())

    def hat(self) -> MeasureExpr:
        s = self.params.weight
        h, tau = self.placement.h, self.params.tau
        return MeasureExpr((fourier_side_measure(self.meyer, h + tau, s), fourier_side_measure(self.meyer, h, -s)))


@dataclass(frozen=True, eq=False)
class CrystallineMeasure:
    config: BuildConfig
    levels: tuple
    mu: MeasureExpr
    mu_hat: MeasureExpr
    certificates: dict = field(default_factory=dict)

    def level(self, n: int) -> Level:
        for lv in self.levels:
            if lv.n == n:
                return lv
        raise KeyError(f"level {n} not built")

    def psi(self) -> PsiFunction:
        return PsiFunction(tuple((lv.params.tau, lv.placement.lam) for lv in self.levels))

    @property
    def passed(self) -> bool:
        return all(c.get("passed", False) for c in _flatten_certs(self.certificates))


def _flatten_certs(certs):
    for v in certs.values():
        if isinstance(v, dict) and "passed" in v:
            yield v
        elif isinstance(v, dict):
            yield from _flatten_certs(v)
        elif isinstance(v, list):
            for item in v:
                if isinstance(item, dict):
                    yield item


# -- tau schedule ------------------------------------------------------------

def default_taus(cfg: BuildConfig) -> list[LevelParams]:
    """tau_n = 2^{-q n^2}, each required to satisfy tau_n < 1/(4 M_n)."""
    out = []
    for n in cfg.levels:
        M = cfg.period(n)
        tau = Fraction(1, 2 ** (cfg.q * n * n))
        if not tau < Fraction(1, 4 * M):
            smallest = None
            for k in range(1, 10_000):
                if Fraction(1, 2 ** (cfg.q * k * k)) < Fraction(1, 4 * cfg.period(k)):
                    smallest = k
                    break
            raise ScheduleInfeasible(
                f"tau_{n} = {tau} is not below 1/(4 M_{n}) = {Fraction(1, 4 * M)} for q={cfg.q}, B={cfg.base}",
                smallest_valid_n=smallest,
            )
        out.append(LevelParams(n, M, tau))
    return out


def _s1(kept_taus, tau) -> tuple[float, float]:
    lhs = sum(tau_power(t, Fraction(-1, 3)) for t in kept_taus)
    return lhs, tau_power(tau, Fraction(-1, 3)) / 3 * THIN_SAFETY


def _s2(later_taus, tau) -> tuple[float, float]:
    lhs = sum(tau_power(t, Fraction(2, 3)) for t in later_taus)
    return lhs, 2 * tau_power(tau, Fraction(2, 3)) / (3 * math.pi) * THIN_SAFETY


def thin_taus(taus: list[LevelParams]) -> list[LevelParams]:
    """Greedy subsequence on which both separation inequalities hold.

    A candidate is kept when sum_{p<n} tau_p^{-1/3} < tau_n^{-1/3}/3 and
    adding it keeps sum_{p>k} tau_p^{2/3} < 2 tau_k^{2/3}/(3 pi) for every
    already kept k.
    """
    for a, b in zip(taus, taus[1:]):
        if not b.tau < a.tau:
            raise ValueError("taus must be strictly decreasing")
    kept: list[LevelParams] = []
    for cand in taus:
        lhs, rhs = _s1([k.tau for k in kept], cand.tau)
        if not lhs < rhs:
            continue
        trial = kept + [cand]
        ok = True
        for i, k in enumerate(trial):
            l2, r2 = _s2([t.tau for t in trial[i + 1:]], k.tau)
            if not l2 < r2:
                ok = False
                break
        if ok:
            kept.append(cand)
    return kept


# -- placement ---------------------------------------------------------------

def candidate_interval(n: int, j_star: int, cfg: BuildConfig) -> Interval:
    """I_n = [M, 2M) intersected with (M + j'/M - M/32, M + j'/M + M/32)."""
    M = cfg.period(n)
    if not 0 <= j_star < M * M:
        raise ValueError("j_star out of range")
    c = M + Fraction(j_star, M)
    I = Interval.closed_open(M, 2 * M).intersect(Interval.open(c - Fraction(M, 32), c + Fraction(M, 32)))
    if I is None:
        raise EmptyInterval(f"I_{n} is empty for j'={j_star}")
    return I


def subinterval(n: int, j: int, cfg: BuildConfig) -> Interval:
    """I_{n,j} = [M + j/M, M + (j+1)/M)."""
    M = cfg.period(n)
    return Interval.closed_open(M + Fraction(j, M), M + Fraction(j + 1, M))


def full_subintervals(n: int, I: Interval, cfg: BuildConfig) -> range:
    """Indices j with I_{n,j} contained in I."""
    M = cfg.period(n)
    a = (I.lo - M) * M
    j_lo = math.floor(a) + 1 if I.lo_open else math.ceil(a)
    j_hi = math.floor((I.hi - M) * M) - 1
    j_lo, j_hi = max(j_lo, 0), min(j_hi, M * M - 1)
    return range(j_lo, j_hi + 1)


def occupied_subintervals(n: int, I: Interval, prior: list[Level], cfg: BuildConfig) -> set[int]:
    """j such that I_{n,j} meets the support of a prior level's shifted copies."""
    M = cfg.period(n)
    occ = set()
    for lv in prior:
        for t in lv.terms():
            for a in ms.atoms_in(MeasureExpr((t,)), I):
                occ.add(math.floor((a.position - M) * M))
    return occ


def choose_placement(n: int, prior: list[Level], mc: MeyerCoefficients, cfg: BuildConfig) -> LevelPlacement:
    """Smallest free subinterval I_{n,j''} inside I_n, and the resulting h_n, lambda_n."""
    M = cfg.period(n)
    j1 = mc.j_star
    I = candidate_interval(n, j1, cfg)
    occ = occupied_subintervals(n, I, prior, cfg)
    for j in full_subintervals(n, I, cfg):
        if j not in occ:
            break
    else:
        raise NoAdmissibleSubinterval(f"level {n}: every subinterval of I_{n} = {I} is occupied", level=n)
    h = Fraction(j - j1, M) + Fraction(1, 2 * M)
    lam = M + Fraction(j, M) + Fraction(1, 2 * M)
    return LevelPlacement(n, j1, j, h, lam)


def placement_checks(lv: Level, cfg: BuildConfig) -> list[dict]:
    p, M = lv.placement, lv.params.M
    I = candidate_interval(lv.n, p.j_star, cfg)
    sub = subinterval(lv.n, p.j_dd, cfg)
    h_want = Fraction(p.j_dd - p.j_star, M) + Fraction(1, 2 * M)
    lam_want = M + Fraction(p.j_dd, M) + Fraction(1, 2 * M)
    rows = [
        _row("h_n = (j''-j')/M_n + 1/(2M_n)", lv.n, p.h, h_want, p.h == h_want),
        _row("lambda_n = M_n + j''/M_n + 1/(2M_n)", lv.n, p.lam, lam_want, p.lam == lam_want),
        _row("|h_n| < M_n/32", lv.n, abs(p.h), Fraction(M, 32), abs(p.h) < Fraction(M, 32)),
        _row(
            "|j'-j''|/M_n <= M_n/32 - 1/M_n",
            lv.n,
            Fraction(abs(p.j_star - p.j_dd), M),
            Fraction(M, 32) - Fraction(1, M),
            Fraction(abs(p.j_star - p.j_dd), M) <= Fraction(M, 32) - Fraction(1, M),
        ),
        _row("I_{n,j''} inside I_n", lv.n, str(sub), str(I), I.contains_interval(sub)),
        _row("lambda window inside I_{n,j''}", lv.n, str(p.window), str(sub), sub.contains_interval(p.window)),
        _row("lambda_n >= M_n", lv.n, p.lam, M, p.lam >= M),
    ]
    return rows


def _row(name, n, lhs, rhs, passed) -> dict:
    return {"name": name, "n": n, "lhs": _fmt(lhs), "rhs": _fmt(rhs), "passed": bool(passed)}


def _fmt(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return float(f"{v:.17g}")
    return v


# -- certificates ------------------------------------------------------------

def check_restriction_identity(fm: CrystallineMeasure, n: int, window: Interval | None = None) -> dict:
    """The restriction of mu to the lambda_n window is tau^{-2/3}(delta_{lambda+tau} - delta_lambda)."""
    lv = fm.level(n)
    exact = lv.placement.window
    if window is not None and window != exact:
        raise ValueError("the identity is certified only on (lambda_n - 1/(2 lambda_n), lambda_n + 1/(2 lambda_n))")
    lam, tau, s = lv.placement.lam, lv.params.tau, lv.params.weight
    got = ms.restrict(fm.mu, exact)
    want = {lam: -s, lam + tau: s}
    positions = {a.position for a in got}
    extra = sorted(str(p) for p in positions - set(want))
    missing = sorted(str(p) for p in set(want) - positions)
    if extra or missing:
        raise CertificateFailure(f"level {n}: restriction has extra atoms {extra}, missing {missing}", level=n)
    for a in got:
        if abs(a.weight - want[a.position]) > 1e-12 * abs(want[a.position]):
            raise CertificateFailure(f"level {n}: weight {a.weight} at {a.position}, expected {want[a.position]}", level=n)
    return {"name": "restriction identity", "n": n, "window": str(exact), "atoms": len(got), "passed": True}


def check_disjointness(fm: CrystallineMeasure, n: int) -> dict:
    """No atom of any other level's shifted copies lies in the lambda_n window."""
    lv = fm.level(n)
    W = lv.placement.window
    for other in fm.levels:
        if other.n == n:
            continue
        for t in other.terms():
            hit = ms.atoms_in(MeasureExpr((t,)), W)
            if hit:
                raise CertificateFailure(
                    f"level {other.n} has an atom at {hit[0].position} inside the level-{n} window",
                    level=n,
                    position=str(hit[0].position),
                )
    seps = [
        (o.n, 2 * lv.params.M <= Fraction(o.params.M, 16)) for o in fm.levels if o.n > n
    ]
    return {"name": "disjointness", "n": n, "window": str(W), "separation_later_levels": seps, "passed": True}


def schedule_hypotheses(cfg: BuildConfig, taus: list[LevelParams] | None = None) -> list[dict]:
    """Inequalities that depend only on the configuration and tau schedule."""
    if taus is None:
        taus = [LevelParams(n, cfg.period(n), Fraction(1, 2 ** (cfg.q * n * n))) for n in cfg.levels]
    rows = []
    for lp in taus:
        rows.append(_row("tau_n < 1/(4 M_n)", lp.n, lp.tau, Fraction(1, 4 * lp.M), lp.tau < Fraction(1, 4 * lp.M)))
    for a, b in zip(taus, taus[1:]):
        va = Fraction(-(lp_log2(a.tau)), a.n)
        vb = Fraction(-(lp_log2(b.tau)), b.n)
        rows.append(_row("-log2(tau_n)/n increasing", b.n, va, vb, va < vb))
    for i, lp in enumerate(taus):
        l1, r1 = _s1([t.tau for t in taus[:i]], lp.tau)
        l2, r2 = _s2([t.tau for t in taus[i + 1:]], lp.tau)
        rows.append(_row("sum_{p<n} tau_p^{-1/3} < tau_n^{-1/3}/3", lp.n, l1, r1, l1 < r1))
        rows.append(_row("sum_{p>n} tau_p^{2/3} < 2 tau_n^{2/3}/(3 pi)", lp.n, l2, r2, l2 < r2))
    for a in taus:
        for b in taus:
            if b.n > a.n:
                rows.append(_row("2 M_n <= M_p/16", a.n, 2 * a.M, Fraction(b.M, 16), 2 * a.M <= Fraction(b.M, 16)))
    for i, lp in enumerate(taus):
        bound = sum(2 * Fraction(p.M * lp.M, 8) for p in taus[:i])
        rows.append(_row("sum_{p<n} 2 M_p M_n/8 < M_n^2/124", lp.n, bound, Fraction(lp.M**2, 124), bound < Fraction(lp.M**2, 124)))
    return rows


def lp_log2(tau: Fraction) -> int:
    """log2 of a dyadic tau."""
    if tau.numerator != 1 or tau.denominator & (tau.denominator - 1):
        return math.log2(tau)
    return -(tau.denominator.bit_length() - 1)


def check_hypotheses(fm: CrystallineMeasure) -> list[dict]:
    """Every finite-level inequality the argument relies on, each pass/fail with both sides."""
    cfg = fm.config
    rows = schedule_hypotheses(cfg, [lv.params for lv in fm.levels])
    lv_list = list(fm.levels)
    for a, b in zip(lv_list, lv_list[1:]):
        ga = lp_log2(a.params.tau) / math.log2(a.placement.lam)
        gb = lp_log2(b.params.tau) / math.log2(b.placement.lam)
        rows.append(_row("log tau_n / log lambda_n decreasing", b.n, ga, gb, gb < ga))
    for i, lv in enumerate(lv_list):
        p = lv.placement
        rows.append(_row("tau_n lambda_n < 1/3", lv.n, lv.params.tau * p.lam, Fraction(1, 3), lv.params.tau * p.lam < Fraction(1, 3)))
        I = candidate_interval(lv.n, p.j_star, cfg)
        avail = len(full_subintervals(lv.n, I, cfg))
        M = lv.params.M
        rows.append(_row("#{j: I_{n,j} in I_n} >= M_n^2/32 - 1", lv.n, avail, Fraction(M * M, 32) - 1, avail >= Fraction(M * M, 32) - 1))
        rows.append(_row("#{j: I_{n,j} in I_n} > M_n^2/124", lv.n, avail, Fraction(M * M, 124), avail > Fraction(M * M, 124)))
        occ = len(occupied_subintervals(lv.n, I, lv_list[:i], cfg) & set(full_subintervals(lv.n, I, cfg)))
        bound = sum(2 * Fraction(q.params.M * M, 8) for q in lv_list[:i])
        rows.append(_row("occupied subintervals <= counting bound", lv.n, occ, bound, occ <= bound))
        rows.extend(placement_checks(lv, cfg))
    return rows


def check_support_gaps(fm: CrystallineMeasure) -> dict:
    rows = []
    if fm.levels:
        M_lo = min(lv.params.M for lv in fm.levels)
        W = Interval.closed(-Fraction(M_lo, 16), Fraction(M_lo, 16))
        got = ms.atoms_in(fm.mu, W)
        rows.append({"name": "mu gap", "window": str(W), "atoms": len(got), "passed": not got})
    for lv in fm.levels:
        W = Interval.open(-Fraction(lv.params.M, 8), Fraction(lv.params.M, 8))
        got = ms.atoms_in(lv.hat(), W)
        rows.append({"name": "mu_hat level gap", "n": lv.n, "window": str(W), "atoms": len(got), "passed": not got})
    return {"rows": rows, "passed": all(r["passed"] for r in rows)}


def _guarded(fn, *args) -> dict:
    try:
        return fn(*args)
    except CertificateFailure as exc:
        return {"name": fn.__name__, "passed": False, "error": str(exc)}


def _certify(fm: CrystallineMeasure) -> dict:
    hyp = check_hypotheses(fm)
    return {
        "meyer": [dict(_guarded(verify_meyer, lv.meyer, None, fm.config.tol), n=lv.n) for lv in fm.levels],
        "restriction": [_guarded(check_restriction_identity, fm, lv.n) for lv in fm.levels],
        "disjointness": [_guarded(check_disjointness, fm, lv.n) for lv in fm.levels],
        "hypotheses": {"rows": hyp, "passed": all(r["passed"] for r in hyp)},
        "support_gaps": check_support_gaps(fm),
    }


def from_levels(cfg: BuildConfig, levels, certify: bool = True) -> CrystallineMeasure:
    levels = tuple(levels)
    mu, mu_hat = ms.zero(), ms.zero()
    for lv in levels:
        mu = mu + lv.measure()
        mu_hat = mu_hat + lv.hat()
    fm = CrystallineMeasure(cfg, levels, mu, mu_hat)
    if certify:
        object.__setattr__(fm, "certificates", _certify(fm))
    return fm


def qf_threads() -> int:
    try:
        return max(1, int(os.environ.get("QF_THREADS", "1")))
    except ValueError:
        return 1


def assemble(cfg: BuildConfig, threads: int | None = None) -> CrystallineMeasure:
    """Schedule taus, build the gap measures, place each level, certify."""
    taus = thin_taus(default_taus(cfg))
    windows = [WindowSpec(cfg.alpha, lp.M) for lp in taus]

    def solve(w):
        return build_meyer(w, cfg.method, cfg.seed, cfg.tol)

    with ThreadPoolExecutor(max_workers=threads or qf_threads()) as pool:
        meyers = list(pool.map(solve, windows))
    levels: list[Level] = []
    for lp, mc in zip(taus, meyers):
        placement = choose_placement(lp.n, levels, mc, cfg)
        levels.append(Level(lp, mc, placement))
    return from_levels(cfg, levels)
