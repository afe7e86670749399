import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crystalmeasure import measure as ms
from crystalmeasure.errors import NoDecayCertificate
from crystalmeasure.measure import Atom, Interval, MeasureExpr, PeriodicLatticeMeasure
from crystalmeasure.schwartz import gaussian

fractions = st.fractions(min_value=-40, max_value=40, max_denominator=200)


def random_measure(seed, M=3):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(M * M) + 1j * rng.standard_normal(M * M)
    c[rng.random(M * M) < 0.3] = 0
    h = Fraction(int(rng.integers(-50, 50)), int(rng.integers(1, 12)))
    return ms.lattice(M, c, h, complex(rng.standard_normal()))


def test_dirac_in_open_window():
    assert ms.atoms_in(ms.dirac(0), Interval.open(-1, 1)) == [Atom(Fraction(0), 1 + 0j)]


def test_unit_lattice_half_spacing():
    got = ms.atoms_in(ms.lattice(2, np.ones(4)), Interval.closed(0, 1))
    assert [a.position for a in got] == [0, Fraction(1, 2), 1]


def test_sigma4_has_no_atoms_near_zero(sigma4):
    assert ms.atoms_in(sigma4.measure(), Interval.closed(Fraction(-1, 2), Fraction(1, 2))) == []


def test_interval_endpoints_respected():
    m = ms.lattice(1, [1.0])
    assert len(ms.atoms_in(m, Interval.open(0, 3))) == 2
    assert len(ms.atoms_in(m, Interval.closed_open(0, 3))) == 3
    assert len(ms.atoms_in(m, Interval.closed(0, 3))) == 4
    assert ms.atoms_in(m, Interval.open(0, 1)) == []


def test_parse_interval():
    assert ms.parse_interval("[-1, 1/2)") == Interval(Fraction(-1), Fraction(1, 2), False, True)
    with pytest.raises(ValueError):
        ms.parse_interval("-1, 1")


def test_shift_identity_and_dirac():
    m = ms.dirac(Fraction(1, 3), 2.0)
    assert ms.atoms_in(ms.shift(m, 0), Interval.closed(-5, 5)) == ms.atoms_in(m, Interval.closed(-5, 5))
    assert ms.atoms_in(ms.shift(ms.dirac(0), Fraction(3, 2)), Interval.closed(-5, 5)) == [Atom(Fraction(3, 2), 1 + 0j)]


@pytest.mark.parametrize("lo", [32, 44])
def test_shift_covariance_sigma32(sigma32, lo):
    # [32, 33] lies in the gap around 32Z; [44, 45] carries atoms
    m, h = sigma32.measure(), Fraction(5, 64)
    W = Interval.closed(lo, lo + 1)
    left = ms.atoms_in(ms.shift(m, h), W)
    right = [Atom(a.position + h, a.weight) for a in ms.atoms_in(m, W.shifted(-h))]
    assert left == right
    assert (len(left) > 0) == (lo == 44)


def test_scale():
    m = ms.dirac(1) - ms.dirac(2)
    W = Interval.open(0, 3)
    assert ms.atoms_in(ms.scale(m, 1), W) == ms.atoms_in(m, W)
    assert ms.atoms_in(ms.scale(ms.dirac(0), 0), W.shifted(-1)) == []
    s = 2 ** (16 / 3)
    assert ms.variation(ms.scale(m, s), W) == pytest.approx(2 * s, rel=1e-15)


def test_subtract_self_and_pair():
    m = ms.dirac(1)
    assert ms.atoms_in(ms.subtract(m, m), Interval.closed(-9, 9)) == []
    tau = Fraction(1, 256)
    got = ms.atoms_in(ms.subtract(ms.dirac(1 + tau), ms.dirac(1)), Interval.closed(0, 2))
    assert [(a.position, a.weight) for a in got] == [(Fraction(1), -1), (1 + tau, 1)]


def test_shift_difference_atom_count(sigma32):
    tau = Fraction(1, 256)
    d = ms.subtract(ms.shift(sigma32.measure(), tau), sigma32.measure())
    got = ms.atoms_in(d, Interval.closed_open(0, 32))
    assert len(got) == 2 * int(np.count_nonzero(sigma32.c))


def test_variation_examples(sigma32):
    assert ms.variation(ms.dirac(1) - ms.dirac(2), Interval.open(0, 3)) == 2
    assert ms.variation(ms.zero(), Interval.closed(-5, 5)) == 0
    m = sigma32.measure()
    one = ms.variation(m, Interval.closed_open(0, 32))
    assert one == pytest.approx(float(np.sum(np.abs(sigma32.c))), rel=1e-13)
    assert ms.variation(m, Interval.closed_open(0, 64)) == 2 * one


@pytest.mark.parametrize("periods", [1, 2, 3, 5])
def test_variation_closed_form_matches_brute(sigma32, periods):
    m = sigma32.measure(h=Fraction(3, 7))
    W = Interval.closed(Fraction(-5, 3), Fraction(-5, 3) + 32 * periods)
    assert ms.variation(m, W) == pytest.approx(ms.variation_brute(m, W), rel=1e-12)


def test_variation_closed_form_level_difference(default_build):
    W = Interval.open(-700, 700)
    lv = default_build.levels[0]
    assert ms.variation(lv.measure(), W) == pytest.approx(ms.variation_brute(lv.measure(), W), rel=1e-12)


def test_variation_overlapping_terms_merge():
    # coincident lattices must cancel before |.| is taken
    m = ms.lattice(2, np.ones(4)) - ms.lattice(2, np.ones(4))
    assert ms.variation(m, Interval.closed(-3, 3)) == 0


def test_pair_examples():
    g = gaussian()
    assert ms.pair(ms.dirac(0), g, 1).value == 1
    assert ms.pair(ms.dirac(1) - ms.dirac(1), g, 5).value == 0


def test_pair_requires_decay_certificate():
    with pytest.raises(NoDecayCertificate):
        ms.pair(ms.dirac(0), lambda x: np.ones_like(x), 1)


def test_pair_tail_is_a_bound():
    m = ms.lattice(1, [1.0])
    g = gaussian(0.05)
    near = ms.pair(m, g, 3)
    far = ms.pair(m, g, 60)
    assert abs(far.value - near.value) <= near.tail_bound


def test_lattice_term_validation():
    with pytest.raises(ValueError):
        PeriodicLatticeMeasure(3, np.ones(8))


def test_unit_phase_exact_quarters():
    assert ms.unit_phase(Fraction(1, 4)) == 1j
    assert ms.unit_phase(Fraction(-7, 2)) == -1
    assert ms.unit_phase(Fraction(123456789, 1)) == 1


def test_fourier_transform_of_unit_comb_is_unit_comb():
    comb = ms.lattice(1, [1.0])
    hat = ms.fourier_transform(comb)
    W = Interval.closed(-3, 3)
    assert ms.atoms_in(hat, W) == ms.atoms_in(comb, W)


def test_fourier_transform_rejects_extras():
    with pytest.raises(ValueError):
        ms.fourier_transform(ms.dirac(0))


# -- properties -------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), h=fractions, lo=fractions, width=st.fractions(0, 10, max_denominator=50))
def test_shift_covariance_property(seed, h, lo, width):
    m = random_measure(seed)
    W = Interval.closed(lo, lo + width)
    left = ms.atoms_in(ms.shift(m, h), W)
    right = [Atom(a.position + h, a.weight) for a in ms.atoms_in(m, W.shifted(-h))]
    assert left == right


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), a=fractions, w1=st.fractions(0, 12, max_denominator=30), w2=st.fractions(0, 12, max_denominator=30))
def test_variation_additivity_property(seed, a, w1, w2):
    m = random_measure(seed) + random_measure(seed + 1, M=2)
    b, c = a + w1, a + w1 + w2
    whole = ms.variation(m, Interval.closed(a, c))
    parts = ms.variation(m, Interval.closed_open(a, b)) + ms.variation(m, Interval.closed(b, c))
    assert parts == pytest.approx(whole, rel=1e-12, abs=1e-300)
    left = ms.atoms_in(m, Interval.closed_open(a, b))
    right = ms.atoms_in(m, Interval.closed(b, c))
    assert left + right == ms.atoms_in(m, Interval.closed(a, c))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), lo=fractions, width=st.fractions(0, 20, max_denominator=30))
def test_subtract_self_cancels_property(seed, lo, width):
    m = random_measure(seed)
    assert ms.atoms_in(ms.subtract(m, m), Interval.closed(lo, lo + width)) == []


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), s=st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3), lo=fractions)
def test_scale_linearity_property(seed, s, lo):
    m = random_measure(seed)
    W = Interval.closed(lo, lo + 9)
    assert ms.variation(ms.scale(m, s), W) == pytest.approx(abs(s) * ms.variation(m, W), rel=1e-12, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), lo=fractions, width=st.fractions(0, 30, max_denominator=7))
def test_closed_form_matches_brute_property(seed, lo, width):
    m = random_measure(seed, M=4)
    W = Interval.closed(lo, lo + width)
    assert ms.variation(m, W) == pytest.approx(ms.variation_brute(m, W), rel=1e-12, abs=1e-300)


def test_huge_window_uses_exact_keys():
    # keys beyond int64 fall back to Python integers
    m = ms.lattice(4, np.ones(16), Fraction(1, 3**30))
    W = Interval.closed(10**9, 10**9 + 1)
    got = ms.atoms_in(m, W)
    assert len(got) == 4
    assert all(W.contains(a.position) for a in got)
    assert math.isclose(ms.variation(m, W), 4.0)
