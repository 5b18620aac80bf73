import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from elmd.errors import InsufficientMass, InvalidMeasure
from elmd.jump_measure import JumpMeasure

INF = math.inf


def _quad(f, lo, hi):
    return integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def test_atoms_merge_and_sort():
    k = JumpMeasure.atomic([(0.5, 1.0), (-0.2, 2.0), (0.5, 0.5)])
    assert list(k.atoms_x) == [-0.2, 0.5]
    assert list(k.atoms_w) == [2.0, 1.5]
    assert k.total_mass() == 3.5


@pytest.mark.parametrize("atoms", [[(0.0, 1.0)], [(0.3, -1.0)], [(0.3, 0.0)], [(INF, 1.0)]])
def test_bad_atoms_rejected(atoms):
    with pytest.raises(InvalidMeasure):
        JumpMeasure.atomic(atoms)


def test_density_straddling_zero_rejected():
    with pytest.raises(InvalidMeasure):
        JumpMeasure.density("uniform", (-1.0, 1.0))


def test_interval_closedness_for_atoms():
    k = JumpMeasure.atomic([(-0.5, 1.0), (0.5, 2.0)])
    assert k.interval_mass(-0.5, 0.5) == 3.0
    assert k.interval_mass(-0.5, 0.5, (False, True)) == 2.0
    assert k.interval_mass(-0.5, 0.5, (False, False)) == 0.0


@pytest.mark.parametrize("scale,rate,lo,hi", [(2.0, 1.5, 0.0, INF), (0.7, 3.0, 0.1, 2.0)])
def test_exponential_against_quad(scale, rate, lo, hi):
    k = JumpMeasure.density("exponential", (lo, hi), scale=scale, rate=rate)
    pdf = lambda x: scale * math.exp(-rate * x)
    assert k.total_mass() == pytest.approx(_quad(pdf, lo, hi), rel=1e-12)
    for f in (lambda x: x, lambda x: x * x, lambda x: math.log1p(0.4 * x)):
        got = k.integrate(lambda x: np.vectorize(f)(x))
        assert got == pytest.approx(_quad(lambda x: f(x) * pdf(x), lo, hi), rel=1e-10)


def test_negative_exponential_mirror():
    k = JumpMeasure.density("exponential", (-INF, 0.0), scale=1.2, rate=2.0)
    pdf = lambda x: 1.2 * math.exp(2.0 * x)
    assert k.integrate(lambda x: x) == pytest.approx(_quad(lambda x: x * pdf(x), -INF, 0), rel=1e-10)
    assert k.interval_mass(-1.0, -0.25) == pytest.approx(_quad(pdf, -1.0, -0.25), rel=1e-12)


def test_uniform_closed_forms():
    k = JumpMeasure.density("uniform", (-0.8, -0.2), height=2.5)
    assert k.total_mass() == pytest.approx(1.5, rel=1e-14)
    assert k.integrate(lambda x: x) == pytest.approx(2.5 * (0.04 - 0.64) / 2, rel=1e-12)
    assert k.integrate(lambda x: x ** 3) == pytest.approx(2.5 * (0.2 ** 4 - 0.8 ** 4) / 4, rel=1e-12)


def test_power_density_infinite_activity():
    k = JumpMeasure.density("power", (0.0, 1.0), scale=0.3, alpha=1.5)
    assert k.total_mass() == INF
    assert not k.finite_activity
    assert k.is_special()
    assert k.integrate(lambda x: x * x) == pytest.approx(0.3 / 1.5, rel=1e-10)
    assert k.interval_mass(0.2, 0.5) == pytest.approx(0.6 * (0.2 ** -0.5 - 0.5 ** -0.5), rel=1e-12)
    assert k.lower_quantile("positive", 1.0) == 0.0


def test_power_tail_moments():
    k = JumpMeasure.density("power", (1.0, INF), scale=1.0, alpha=2.5)
    assert k.abs_moment_finite(1)
    assert not k.abs_moment_finite(2)
    assert k.integrate(lambda x: x) == pytest.approx(_quad(lambda x: x ** -1.5, 1, INF), rel=1e-9)


def test_table_density_against_trapezoid():
    x = np.linspace(0.1, 1.0, 10)
    f = 1.0 + x ** 2
    k = JumpMeasure.density("table", (0.1, 1.0), x=x, f=f)
    assert k.total_mass() == pytest.approx(integrate.trapezoid(f, x), rel=1e-10)


def test_support_bounds_and_sides():
    k = JumpMeasure.atomic([(-0.3, 1.0)]) + JumpMeasure.density("exponential", (0.0, INF))
    assert k.support_bounds() == (-0.3, INF)
    assert k.has_side("negative") and k.has_side("positive")
    assert k.side_mass("negative") == 1.0
    assert JumpMeasure.empty().support_bounds() == (INF, -INF)


def test_reflect_involution():
    k = JumpMeasure.atomic([(-0.3, 1.0), (0.7, 0.4)]) + JumpMeasure.density("uniform", (0.1, 0.6), height=2.0)
    kk = k.reflect().reflect()
    np.testing.assert_array_equal(kk.atoms_x, k.atoms_x)
    for f in (lambda x: x, lambda x: np.exp(x)):
        assert kk.integrate(f) == pytest.approx(k.integrate(f), rel=1e-14)
    assert k.reflect().integrate(lambda x: x) == pytest.approx(-k.integrate(lambda x: x), rel=1e-14)


def test_lower_quantile():
    k = JumpMeasure.atomic([(0.2, 1.0), (0.5, 1.0)])
    assert k.lower_quantile("positive", 1.0) == 0.2
    assert k.lower_quantile("positive", 1.5) == 0.5
    u = JumpMeasure.density("uniform", (0.0, 2.0), height=1.0)
    assert u.lower_quantile("positive", 0.5) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(InsufficientMass):
        u.lower_quantile("positive", 3.0)


def test_spec_round_trip():
    k = JumpMeasure.atomic([(-0.5, 1.0)]) + JumpMeasure.density("exponential", (0.0, INF), scale=2.0)
    k2 = JumpMeasure.from_spec(k.to_spec())
    assert k2.total_mass() == pytest.approx(k.total_mass(), rel=1e-15)
    assert k2.integrate(lambda x: x) == pytest.approx(k.integrate(lambda x: x), rel=1e-15)


def test_sampling_matches_law():
    k = JumpMeasure.density("exponential", (0.0, INF), scale=1.0, rate=2.0)
    x = k.sample(20000, np.random.default_rng(3))
    assert stats.kstest(x, stats.expon(scale=0.5).cdf).pvalue > 1e-3


def test_sampling_mixture_weights():
    k = JumpMeasure.atomic([(-0.5, 1.0)]) + JumpMeasure.density("uniform", (0.0, 1.0), height=3.0)
    x = k.sample(40000, np.random.default_rng(1))
    frac = np.mean(x == -0.5)
    assert abs(frac - 0.25) < 4 * math.sqrt(0.25 * 0.75 / x.size)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.2, 4.0), st.floats(0.0, 1.0), st.floats(0.05, 2.0))
def test_exponential_interval_mass_additive(scale, rate, a, w):
    k = JumpMeasure.density("exponential", (0.0, INF), scale=scale, rate=rate)
    m = (a + w + 1.0)
    whole = k.interval_mass(a, m)
    split = k.interval_mass(a, a + w) + k.interval_mass(a + w, m)
    assert whole == pytest.approx(split, rel=1e-12)
    assert whole == pytest.approx(scale / rate * (math.exp(-rate * a) - math.exp(-rate * m)), rel=1e-10)


def test_total_mass_examples():
    assert JumpMeasure.atomic([(-0.5, 1.0)]).total_mass() == 1.0
    assert JumpMeasure.density("exponential", (0.0, INF)).total_mass() == pytest.approx(1.0, rel=1e-14)
    assert JumpMeasure.density("power", (0.0, 1.0), alpha=2.0).total_mass() == INF


def test_small_jump_functional():
    f = lambda x: np.minimum(np.abs(x), x * x)
    assert JumpMeasure.atomic([(2.0, 0.5)]).integrate(f) == 1.0
    exp = JumpMeasure.density("exponential", (0.0, INF))
    assert exp.integrate(f, breaks=(1.0,)) == pytest.approx(2.0 - 3.0 / math.e, rel=1e-12)
    assert JumpMeasure.empty().integrate(f) == 0.0


def test_far_tail_mass():
    exp = JumpMeasure.density("exponential", (0.0, INF))
    b = 114.3424
    assert exp.interval_mass(b, INF, (False, True)) == pytest.approx(math.exp(-b), rel=1e-12)
    assert exp.log_interval_mass(b, INF, (False, True)) == pytest.approx(-b, rel=1e-14)


def test_atom_interval_examples():
    k = JumpMeasure.atomic([(-0.5, 1.0)])
    assert k.interval_mass(-0.5, 0.0, (True, False)) == 1.0
    assert k.interval_mass(-0.5, 0.0, (False, False)) == 0.0
    assert k.support_bounds() == (-0.5, -0.5)


def test_quantile_examples():
    assert JumpMeasure.density("exponential", (0.0, INF)).lower_quantile("positive", 0.5) == \
        pytest.approx(math.log(2.0), rel=1e-12)
    assert JumpMeasure.atomic([(2.0, 1.0)]).lower_quantile("positive", 0.5) == 2.0
    u = JumpMeasure.density("uniform", (-0.5, 0.0), height=2.0)
    assert u.lower_quantile("negative", 0.5) == pytest.approx(-0.25, rel=1e-12)


def test_special_examples():
    assert JumpMeasure.atomic([(-0.5, 1.0)]).is_special()
    assert JumpMeasure.density("exponential", (0.0, INF)).is_special()
    # x**-2 near 0 has infinite mass but a finite |x| ^ x**2 integral; x**-3 does not
    assert JumpMeasure.density("power", (0.0, 1.0), alpha=2.0).is_special()
    assert not JumpMeasure.density("power", (0.0, 1.0), alpha=3.0).is_special()
