import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.stats import kstwobign

from slepian_lab import densities as d

unit = st.floats(1e-3, 1 - 1e-3)


def test_first_passage_density_examples():
    assert d.first_passage_density(0.5) == pytest.approx(math.sqrt(3) / math.pi, abs=1e-12)
    assert d.first_passage_density(1 - 1e-12) == pytest.approx(1 / math.pi, abs=1e-9)
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            d.first_passage_density(bad)


def test_first_passage_mass_and_cdf():
    mass, _ = integrate.quad(d.first_passage_density, 0, 1)
    assert mass == pytest.approx(0.5 + 1 / math.pi, abs=1e-8)
    assert float(d.first_passage_cdf(1.0)) == pytest.approx(0.5 + 1 / math.pi, abs=1e-14)
    a = np.linspace(0.05, 0.95, 10)
    num = [integrate.quad(d.first_passage_density, 0, x)[0] for x in a]
    assert np.allclose(d.first_passage_cdf(a), num, atol=1e-8)


def test_quadruple_density_domain():
    with pytest.raises(ValueError):
        d.quadruple_density(1, 1, 0.5, 0.4)
    with pytest.raises(ValueError):
        d.quadruple_density(1, 1, 0.0, 0.4)
    assert d.quadruple_density(0.0, 1.0, 0.2, 0.6) == 0.0


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-5, 5), y=st.floats(-5, 5), a=unit, b=unit)
def test_quadruple_density_symmetries(x, y, a, b):
    a, b = min(a, b), max(a, b)
    if not a < b:
        return
    q = d.quadruple_density(x, y, a, b)
    assert q >= 0
    assert q == pytest.approx(d.quadruple_density(-x, -y, a, b), rel=1e-12)
    assert q == pytest.approx(d.quadruple_density(y, x, 1 - b, 1 - a), rel=1e-9, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(a=unit, b=unit)
def test_fg_density_reversal_symmetry(a, b):
    a, b = min(a, b), max(a, b)
    if not b - a > 1e-6:
        return
    assert d.fg_density(a, b) == pytest.approx(d.fg_density(1 - b, 1 - a), rel=1e-10)


def test_fg_constant_against_direct_integration():
    for a, b in d.FG_CHECK_POINTS:
        f = lambda y, x: d.quadruple_density(x, y, a, b)
        direct = sum(integrate.dblquad(f, lx, hx, ly, hy, epsabs=1e-12)[0]
                     for lx, hx in ((-12, 0), (0, 12)) for ly, hy in ((-12, 0), (0, 12)))
        assert direct == pytest.approx(d.FG_CONSTANT * d.fg_density(a, b), rel=1e-6)
    assert np.allclose(d.fg_verification_constants(), 1 / math.pi, rtol=1e-6)


def test_fg_marginal_integrates_to_first_passage_density():
    for a in (0.2, 0.5, 0.8):
        val, _ = integrate.quad(lambda b: d.FG_CONSTANT * d.fg_density(a, b), a, 1, limit=200)
        # the mass of {F in da, G < 1} misses P(F in da, G = F), which is zero
        assert val == pytest.approx(float(d.first_passage_density(a)), abs=1e-4)


def test_fg_cell_masses_total():
    edges = np.linspace(0, 1, 11)
    m = d.fg_cell_masses(edges)
    assert np.all(np.tril(m, -1) == 0)
    assert m.sum() == pytest.approx(0.5 + 1 / math.pi, abs=1e-5)


def test_shepp_t1():
    assert d.shepp_integrand_t1(0.0) == pytest.approx(0.0, abs=1e-15)
    x = np.linspace(-4, 4, 17)
    assert np.array_equal(d.shepp_integrand_t1(x), d.shepp_integrand_t1(-x))
    assert d.shepp_survival_t1() == pytest.approx(0.5 - 1 / math.pi, abs=1e-8)
    assert d.shepp_survival_integer(1) == pytest.approx(0.5 - 1 / math.pi, abs=1e-4)


def test_shepp_determinant_singular_and_scalar():
    y = np.array([0.0, 0.7, 0.7, 1.5])
    assert d.shepp_determinant(y) == pytest.approx(0.0, abs=1e-15)
    assert d.shepp_determinant([0.0, 0.5, 0.2]) == pytest.approx(
        d.phi(-0.5) * d.phi(0.3) - d.phi(-0.2) * d.phi(0.0), abs=1e-15)


def test_shepp_integer_methods_agree_and_errors():
    tensor = d.shepp_survival_integer(2)
    qmc = d.shepp_survival_integer(2, d.QuadratureSpec(method="qmc", points=64))
    assert tensor == pytest.approx(0.036346, abs=2e-6)
    assert qmc == pytest.approx(tensor, abs=1e-4)
    assert 0 < d.shepp_survival_integer(3) < tensor
    with pytest.raises(NotImplementedError):
        d.shepp_survival_integer(4)
    for bad in (dict(method="mc"), dict(points=4), dict(radius=2.0)):
        with pytest.raises(ValueError):
            d.QuadratureSpec(**bad)


def test_rn_examples_and_domain():
    assert d.rn_derivative_slepian(0, 0, 1) == pytest.approx(2.0)
    assert d.rn_derivative_shifted(0, 0, 1) == pytest.approx(2 * math.sqrt(2))
    w0, w1 = np.linspace(-3, 3, 7), np.linspace(2, -1, 7)
    assert np.allclose(d.rn_derivative_shifted(w0, w1, 0), d.rn_derivative_slepian(w0, w1, 1))
    for f, t in ((d.rn_derivative_slepian, 0.0), (d.rn_derivative_slepian, 1.5),
                 (d.rn_derivative_shifted, -0.1), (d.rn_derivative_shifted, 1.5)):
        with pytest.raises(ValueError):
            f(0.0, 0.0, t)


def _modified_bm(rng, m, t0, t1):
    xi = rng.standard_normal(m)
    b0 = rng.standard_normal(m) * math.sqrt(t0)
    b1 = b0 + rng.standard_normal(m) * math.sqrt(t1 - t0)
    return math.sqrt(2) * (xi + b0), math.sqrt(2) * (xi + b1)


@pytest.mark.parametrize("t", [0.25, 1.0])
def test_rn_slepian_reweights_to_slepian_moments(t):
    w0, wt = _modified_bm(np.random.default_rng(1), 10**5, 0.0, t)
    r = d.rn_derivative_slepian(w0, wt, t)
    assert r.min() > 0
    assert r.mean() == pytest.approx(1.0, abs=0.01)
    # Var S = 1 and Cov(S_0, S_t) = 1 - t
    assert np.mean(r * w0 * w0) == pytest.approx(1.0, abs=0.03)
    assert np.mean(r * w0 * wt) == pytest.approx(1 - t, abs=0.03)


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0])
def test_rn_shifted_reweights_to_slepian_moments(t):
    w0, w1 = _modified_bm(np.random.default_rng(2), 10**5, t, t + 1)
    r = d.rn_derivative_shifted(w0, w1, t)
    assert r.mean() == pytest.approx(1.0, abs=0.01)
    assert np.mean(r * w0 * w0) == pytest.approx(1.0, abs=0.03)
    assert np.mean(r * w0 * w1) == pytest.approx(0.0, abs=0.03)


def test_rn_reweighted_no_zero_fraction():
    w0, w1 = _modified_bm(np.random.default_rng(3), 10**5, 0.0, 1.0)
    # probability that the variance-2 bridge from w0 to w1 on [0, 1] avoids 0
    avoid = np.where(w0 * w1 > 0, -np.expm1(-w0 * w1), 0.0)
    est = np.mean(d.rn_derivative_slepian(w0, w1, 1.0) * avoid)
    assert est == pytest.approx(0.5 - 1 / math.pi, abs=0.01)


def test_palm_levy_and_ito():
    a = np.random.default_rng(4).uniform(0.01, 0.99, 20)
    assert np.array_equal(d.palm_levy_tail(a), d.first_passage_density(a))
    assert d.palm_levy_tail(0.5) == pytest.approx(0.5513289, abs=1e-7)
    assert d.palm_levy_tail(1e-12) / d.ito_tail(1e-12) == pytest.approx(1 / math.sqrt(math.pi), abs=1e-6)
    with pytest.raises(ValueError):
        d.ito_tail(0.0)


def test_ks_cdf_against_scipy():
    xs = np.concatenate([np.linspace(0.1, 3.5, 69), [0.999999, 1.0, 1.000001]])
    assert max(abs(d.ks_cdf(x) - kstwobign.cdf(x)) for x in xs) < 1e-10
    assert d.ks_cdf(1.3) == pytest.approx(0.931908, abs=1e-6)
    assert d.ks_cdf(0.0) == 0.0 and d.ks_cdf(6.0) == pytest.approx(1.0, abs=1e-15)
    assert d.ks_sf(4.0) == pytest.approx(kstwobign.sf(4.0), rel=1e-10)
    with pytest.raises(ValueError):
        d.ks_cdf(-0.1)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(0.05, 4.0), h=st.floats(1e-3, 1.0))
def test_ks_cdf_monotone(x, h):
    assert d.ks_cdf(x) <= d.ks_cdf(x + h)
