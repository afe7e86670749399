import math
from fractions import Fraction

import numpy as np
import pytest

from crystalmeasure import measure as ms
from crystalmeasure.construction import BuildConfig, CrystallineMeasure, assemble
from crystalmeasure.errors import CertificateFailure, MismatchedLevels
from crystalmeasure.measure import Interval, MeasureExpr
from crystalmeasure.meyer import fourier_side_measure
from crystalmeasure.schwartz import PsiFunction, gaussian
from crystalmeasure.verify import (
    blowup_series,
    boundedness_contrast,
    default_gaussians,
    hat_convolution_at,
    hat_convolution_enumerated,
    headline_report,
    poisson_check,
    probe_gaussians,
    shift_difference_check,
    temperedness_certificate,
    variation_growth,
)


def test_convolution_vanishes_at_zero(default_build):
    assert hat_convolution_at(default_build, default_build.psi(), 0) == 0


def test_level_one_pair_has_modulus_two_at_t1(default_build):
    lv = default_build.levels[0]
    lam, tau = lv.placement.lam, lv.params.tau
    t1 = 128
    d = ms.unit_phase(-(lam + tau) * t1) - ms.unit_phase(-lam * t1)
    assert abs(abs(d) - 2) <= 1e-14


def test_two_paths_agree_on_random_times(default_build):
    rng = np.random.default_rng(4)
    p = default_build.psi()
    for t in rng.integers(1, 2**40, 10):
        t = int(t)
        a = hat_convolution_at(default_build, p, t)
        b = hat_convolution_enumerated(default_build, p, t)
        assert abs(a - b) <= 1e-12 * max(abs(a), 1e-300)


def test_two_paths_agree_on_float_times(default_build):
    p = default_build.psi()
    for t in (0.37, 12.5, 1e3 + 0.1):
        a = hat_convolution_at(default_build, p, t)
        b = hat_convolution_enumerated(default_build, p, t)
        assert abs(a - b) <= 1e-9 * max(abs(a), 1e-300)


def test_mismatched_psi(default_build):
    with pytest.raises(MismatchedLevels):
        hat_convolution_at(default_build, PsiFunction(((Fraction(1, 256), Fraction(40)),)), 0)


def test_blowup_default(default_build):
    rep = blowup_series(default_build)
    r1, r2 = rep.rows
    assert r1.t == 128 and r2.t == 2**31
    assert r1.abs_value >= r1.lower >= r1.threshold
    assert r1.threshold == pytest.approx(2 / 3 * 2 ** (8 / 3)) and r1.threshold > 4.23
    assert r2.threshold == pytest.approx(2 / 3 * 2 ** (32 / 3)) and r2.threshold > 1075
    assert r2.abs_value >= 4 * r1.abs_value


def test_blowup_lower_bound_formula(default_build):
    r1, r2 = blowup_series(default_build).rows
    a, b = 2 ** (8 / 3), 2 ** (32 / 3)
    assert r1.lower == pytest.approx(2 * a - b * math.pi * 2**-32 / 2**-8, rel=1e-12)
    assert r2.lower == pytest.approx(2 * b - 2 * a, rel=1e-12)


def test_blowup_single_level(single_level_build):
    (row,) = blowup_series(single_level_build).rows
    assert row.lower == 2 * 2 ** (8 / 3)
    assert row.passed


def test_blowup_needs_levels():
    with pytest.raises(ValueError):
        blowup_series(assemble(BuildConfig(n_lo=1, n_hi=0)))


def test_boundedness_contrast(default_build):
    rep = boundedness_contrast(default_build, gaussian(1.0, 0.0, 20.0))
    assert rep["passed"]
    assert rep["blowup"][1] > rep["blowup"][0]
    for r in rep["levels"]:
        assert r["sup"] <= r["bound"]


def test_boundedness_contrast_zero_measure():
    rep = boundedness_contrast(assemble(BuildConfig(n_lo=1, n_hi=0)))
    assert rep["full_sup"] == 0 and rep["levels"] == []


def test_shift_difference_basic(sigma32):
    rep = shift_difference_check(sigma32, gaussian(), Fraction(1, 256), 0)
    assert rep["passed"] and rep["lhs"] <= rep["rhs"]


def test_shift_difference_informative(sigma32):
    # an unmodulated probe only sees the spectral gap, so modulate onto the mass
    rep = shift_difference_check(sigma32, probe_like(sigma32, swap=True), Fraction(1, 256), 0)
    assert rep["lhs"] > 1e-3
    assert rep["passed"]


def test_shift_difference_shrinks_with_tau(sigma32):
    g = probe_like(sigma32, swap=True)
    lhs = [shift_difference_check(sigma32, g, Fraction(1, 2**e), 0)["lhs"] for e in (8, 12, 16)]
    assert lhs[0] > lhs[1] > lhs[2]
    assert lhs[1] / lhs[2] == pytest.approx(16, rel=0.05)


def test_shift_difference_random_gaussians(default_build):
    rng = np.random.default_rng(7)
    for lv in default_build.levels:
        for _ in range(20):
            g = gaussian(rng.uniform(0.25, 4), rng.uniform(-16, 16), rng.uniform(-2, 2))
            assert shift_difference_check(lv.meyer, g, lv.params.tau, lv.placement.h)["passed"]


def test_shift_difference_preconditions(sigma32, sigma4):
    with pytest.raises(ValueError):
        shift_difference_check(sigma32, gaussian(), 1, 0)
    with pytest.raises(ValueError):
        shift_difference_check(sigma32, gaussian(), Fraction(1, 2), 11)
    with pytest.raises(ValueError):
        shift_difference_check(build_m2(), gaussian(), Fraction(1, 2), 0)
    assert shift_difference_check(sigma4, gaussian(), Fraction(1, 2), 1)["passed"]


def build_m2():
    from crystalmeasure.meyer import WindowSpec, build_meyer

    return build_meyer(WindowSpec("1/8", 2))


def test_temperedness_default(default_build):
    for g in default_gaussians(5):
        rep = temperedness_certificate(default_build, g)
        assert rep["direct"] <= rep["bound"]
    s = [r["tau^(1/3) M^2"] for r in rep["series"]]
    assert s[0] == pytest.approx(2 ** (-8 / 3) * 1024)
    assert s[1] == pytest.approx(2 ** (-32 / 3) * 2**20)
    assert s[0] == pytest.approx(161.27, abs=0.01) and s[1] == pytest.approx(645.08, abs=0.01)
    # increments 2^{10 - 8(2n+1)/3} drop below 1 from n = 2
    assert rep["decreasing_from"] == 2


def test_temperedness_zero_measure():
    rep = temperedness_certificate(assemble(BuildConfig(n_lo=1, n_hi=0)), gaussian())
    assert rep["direct"] == 0 and rep["bound"] == 0 and rep["passed"]


def test_temperedness_sees_mass(default_build):
    lv = default_build.levels[0]
    y = int(np.argmax(np.abs(lv.meyer.c_hat))) / lv.params.M
    g = gaussian(1.0, float(lv.placement.lam), y)
    rep = temperedness_certificate(default_build, g)
    assert rep["direct"] > 1e-3 and rep["passed"]


def test_growth_below_support():
    rep = variation_growth(ms.dirac(5), [Fraction(2)])
    assert rep.rows[0].mass == 0 and rep.rows[0].exponent is None
    assert not rep.escalating


def test_growth_single_atom():
    rep = variation_growth(ms.dirac(1), [Fraction(2), Fraction(10**6)])
    assert [r.mass for r in rep.rows] == [1, 1]
    assert rep.rows[1].exponent == 0


def test_growth_default_escalates(default_build):
    rep = variation_growth(default_build)
    e1, e2 = (r.exponent for r in rep.rows)
    assert [r.r for r in rep.rows] == [2 * lv.placement.lam for lv in default_build.levels]
    assert e2 >= e1 + 1
    assert rep.escalating


def test_growth_needs_increasing_radii():
    with pytest.raises(ValueError):
        variation_growth(ms.dirac(1), [Fraction(3), Fraction(2)])


def test_poisson_unit_comb():
    comb = ms.lattice(1, [1.0])
    rep = poisson_check(comb, ms.fourier_transform(comb), gaussian(), tol=1e-12)
    assert rep["diff"] <= 1e-12 * abs(rep["rhs"])
    assert rep["rhs"].real == pytest.approx(sum(math.exp(-math.pi * k * k) for k in range(-10, 11)), rel=1e-14)


def test_poisson_sigma32(sigma32):
    m = sigma32.measure()
    m_hat = MeasureExpr((fourier_side_measure(sigma32),))
    x = int(np.argmax(np.abs(sigma32.c))) / 32
    y = int(np.argmax(np.abs(sigma32.c_hat))) / 32
    rng = np.random.default_rng(1)
    for _ in range(5):
        g = gaussian(rng.uniform(0.25, 4), y + rng.uniform(-1, 1), x + rng.uniform(-1, 1))
        rep = poisson_check(m, m_hat, g, radius=1000, tol=1e-8)
        assert abs(rep["rhs"]) > 1e-3
        assert rep["diff"] <= 1e-8 * abs(rep["rhs"])


def test_poisson_catches_misscaling(sigma32):
    m = sigma32.measure()
    m_hat = MeasureExpr((fourier_side_measure(sigma32, 0, 2.0),))
    g = probe_like(sigma32)
    with pytest.raises(CertificateFailure):
        poisson_check(m, m_hat, g)


def probe_like(mc, swap=False):
    x = int(np.argmax(np.abs(mc.c))) / mc.M
    y = int(np.argmax(np.abs(mc.c_hat))) / mc.M
    return gaussian(1.0, x, y) if swap else gaussian(1.0, y, x)


def test_poisson_per_level(default_build):
    for lv in default_build.levels:
        for g in probe_gaussians(lv, 2):
            rep = poisson_check(lv.measure(), lv.hat(), g)
            assert abs(rep["rhs"]) > 1
            assert rep["passed"]


def test_headline(default_build):
    rep = headline_report(default_build)
    assert rep["verdict"] == "crystalline: pass, quasicrystal: fail"
    assert rep["growth_escalating"]
    assert all(b["passed"] for b in rep["blowup"])


def test_headline_wiring_without_blowup(default_build):
    # a measure whose psi pairs do not blow up cannot be declared non-quasicrystal
    fm = assemble(BuildConfig(n_lo=1, n_hi=0))
    rep = headline_report(fm)
    assert rep["quasicrystal"] and not rep["blowup"][0].get("passed", False)
    assert isinstance(default_build, CrystallineMeasure)
