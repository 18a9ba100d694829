import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from coalclust.errors import DomainError
from coalclust.special_math import (
    GigParams,
    gig_log_density,
    gig_log_integral_above,
    gig_log_normalizer,
    gig_log_tail_mass,
    gig_mean,
    gig_mode,
    gig_slice_sample,
    gig_slice_sample_batch,
    log_bessel_k,
    slice_sample,
)

from oracles import log_bessel_k_integral, truncated_gig_delta_cdf, truncated_gig_moments


def test_half_order_closed_form():
    assert log_bessel_k(0.5, 1.0) == pytest.approx(0.5 * math.log(math.pi / 2) - 1.0, abs=1e-14)


@pytest.mark.parametrize("z", [1.0, 10.0, 100.0, 1e4])
def test_half_order_matches_asymptote(z):
    exact = 0.5 * math.log(math.pi / (2 * z)) - z
    assert log_bessel_k(0.5, z) == pytest.approx(exact, rel=1e-13, abs=1e-13)


def test_order_ten_at_five_matches_integral():
    assert log_bessel_k(10.0, 5.0) == pytest.approx(log_bessel_k_integral(10.0, 5.0), rel=1e-8)


@pytest.mark.parametrize("nu", [0.0, 0.5, 3.3, 15.5, 64.0])
@pytest.mark.parametrize("z", [1e-3, 0.7, 25.0, 500.0])
def test_matches_integral_representation(nu, z):
    oracle = log_bessel_k_integral(nu, z)
    assert abs(log_bessel_k(nu, z) - oracle) <= 1e-8 * max(1.0, abs(oracle))


def test_switch_over_is_continuous():
    for nu in (0.0, 2.0, 15.5):
        z0 = 50.0 * max(1.0, nu)
        below, above = log_bessel_k(nu, z0 * (1 - 1e-12)), log_bessel_k(nu, z0 * (1 + 1e-12))
        assert abs(below - above) < 1e-9 * abs(below)


def test_overflow_region_is_finite():
    # K_64(1e-3) overflows double precision; the log must not
    val = log_bessel_k(64.0, 1e-3)
    assert math.isfinite(val) and val > 500


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_rejects_bad_argument(bad):
    with pytest.raises(DomainError):
        log_bessel_k(1.0, bad)


def test_rejects_non_finite_order():
    with pytest.raises(DomainError):
        log_bessel_k(math.inf, 1.0)


def test_vectorized_shape():
    out = log_bessel_k(np.array([0.5, 1.5, 30.0]), np.array([[1.0], [2.0]]))
    assert out.shape == (2, 3)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 80), st.floats(1e-3, 1e3))
def test_symmetric_in_order(nu, z):
    assert log_bessel_k(nu, z) == log_bessel_k(-nu, z)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 80), st.floats(1e-3, 1e3), st.floats(1.001, 3.0))
def test_strictly_decreasing_in_argument(nu, z, factor):
    assert log_bessel_k(nu, z * factor) < log_bessel_k(nu, z)


def test_subnormal_order_matches_order_zero():
    assert log_bessel_k(2.225073858507e-311, 1.0) == log_bessel_k(0.0, 1.0)


# GIG helpers


def test_normalizer_matches_quadrature():
    from scipy import integrate

    val = integrate.quad(lambda v: v ** (-1.5) * math.exp(-0.5 / v - 0.5 * v), 0, np.inf)[0]
    assert gig_log_normalizer(-0.5, 1.0, 1.0) == pytest.approx(math.log(val), rel=1e-10)


def test_density_integrates_to_one():
    from scipy import integrate

    params = GigParams(-0.5, 1.0, 1.0)
    total = integrate.quad(lambda v: math.exp(gig_log_density(params, v)), 0, np.inf, epsabs=1e-13)[0]
    assert total == pytest.approx(1.0, abs=1e-8)


def test_truncated_density_integrates_to_one():
    from scipy import integrate

    params = GigParams(-1.0, 2.0, 3.0, lower_bound=1.5)
    total = integrate.quad(lambda v: math.exp(gig_log_density(params, v)), 1.5, np.inf, epsabs=1e-13)[0]
    assert total == pytest.approx(1.0, abs=1e-8)


def test_density_outside_support():
    assert gig_log_density(GigParams(0.5, 1.0, 1.0, lower_bound=2.0), 1.0) == -math.inf


def test_mode_matches_grid_maximization():
    grid = np.linspace(0.01, 5, 200001)
    params = GigParams(0.5, 1.0, 1.0)
    dens = [gig_log_density(params, v) for v in grid[::100]]
    coarse = grid[::100][int(np.argmax(dens))]
    assert gig_mode(0.5, 1.0, 1.0) == pytest.approx((-0.5 + math.sqrt(1.25)), rel=1e-14)
    assert abs(coarse - gig_mode(0.5, 1.0, 1.0)) < 3e-3


@pytest.mark.parametrize("order, chi, psi", [(-15.0, 4.0, 10.0), (0.5, 1.0, 1.0), (-0.5, 1e-4, 300.0)])
def test_mean_matches_quadrature(order, chi, psi):
    mean, _ = truncated_gig_moments(order, chi, psi, 0.0)
    # truncated_gig_moments reports delta = v / 2 when the bound is zero
    assert gig_mean(order, chi, psi) == pytest.approx(2 * mean, rel=1e-8)


def test_invalid_params():
    for args in [(1.0, 0.0, 1.0), (1.0, 1.0, -1.0), (math.nan, 1.0, 1.0)]:
        with pytest.raises(DomainError):
            GigParams(*args)
    with pytest.raises(DomainError):
        GigParams(1.0, 1.0, 1.0, lower_bound=-1.0)


# truncated integral


def test_integral_above_zero_is_normalizer():
    assert gig_log_integral_above(-15.0, 3.0, 7.0, 0.0) == pytest.approx(gig_log_normalizer(-15.0, 3.0, 7.0), rel=1e-13)


@pytest.mark.parametrize(
    "order, chi, psi, lower",
    [(-15.0, 4.0, 10.0, 0.3), (0.0, 0.5, 2.0, 1.0), (-0.5, 1e-6, 50.0, 1e-3), (-63.0, 200.0, 500.0, 2.0),
     (0.5, 1.0, 1.0, 25.0)],
)
def test_integral_above_matches_quadrature(order, chi, psi, lower):
    from scipy import integrate

    peak = max(gig_mode(order, chi, psi), lower)
    shift = (order - 1) * math.log(peak) - chi / (2 * peak) - psi * peak / 2

    def f(v):
        return math.exp((order - 1) * math.log(v) - chi / (2 * v) - psi * v / 2 - shift)

    pts = sorted({lower, peak, peak * 2 + 1e-9})
    total = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-13, limit=400)[0] for a, b in zip(pts[:-1], pts[1:]))
    total += integrate.quad(f, pts[-1], np.inf, epsabs=0, epsrel=1e-13, limit=400)[0]
    expect = shift + math.log(total)
    got = gig_log_integral_above(order, chi, psi, lower)
    assert abs(got - expect) <= 1e-10 * max(1.0, abs(expect))


def test_integral_above_deep_tail_is_finite():
    # far beyond the mode the mass underflows doubles; the log must stay accurate
    got = gig_log_integral_above(0.0, 9673.6, 41.33, 1.785e6)
    assert math.isfinite(got) and got < -3e7


@settings(max_examples=100, deadline=None)
@given(st.floats(-60, 1), st.floats(1e-6, 1e3), st.floats(0.1, 1e4), st.floats(0, 10), st.floats(1.01, 3))
def test_integral_above_decreases_with_bound(order, chi, psi, lower, factor):
    a = gig_log_integral_above(order, chi, psi, lower)
    b = gig_log_integral_above(order, chi, psi, lower * factor + 1e-3)
    assert b <= a + 1e-12 * max(1.0, abs(a))


def test_tail_mass_is_log_probability():
    assert gig_log_tail_mass(GigParams(-2.0, 1.0, 1.0)) == 0.0
    lm = gig_log_tail_mass(GigParams(-2.0, 1.0, 1.0, lower_bound=0.4))
    assert -math.inf < lm < 0


# slice sampling


def test_slice_sampler_on_standard_normal():
    rng = np.random.default_rng(0)
    x = slice_sample(lambda x, idx: -0.5 * x * x, np.zeros(20000), 2.0, -np.inf, np.inf, rng, n_steps=5)
    assert abs(x.mean()) < 0.03 and abs(x.var() - 1.0) < 0.05


def test_slice_sampler_respects_bounds():
    rng = np.random.default_rng(1)
    x = slice_sample(lambda x, idx: -x, np.full(5000, 0.5), 1.0, 0.0, 2.0, rng, n_steps=3)
    assert x.min() >= 0.0 and x.max() <= 2.0


def test_single_draw_api():
    rng = np.random.default_rng(2)
    delta = gig_slice_sample(GigParams(-1.0, 1.0, 3.0, 0.0), rng)
    assert delta > 0


@pytest.mark.parametrize(
    "order, chi, psi, lower",
    [(-15.5, 4.0, 10.0, 0.3), (-0.5, 1.0, 1.0, 0.0), (0.0, 2.0, 0.5, 1.0)],
)
def test_sampler_variance_matches_quadrature(order, chi, psi, lower):
    rng = np.random.default_rng(11)
    draws = gig_slice_sample_batch(order, np.full(100000, chi), psi, lower, rng)
    mean, var = truncated_gig_moments(order, chi, psi, lower)
    assert abs(draws.mean() - mean) <= 0.02 * mean
    assert abs(draws.var() - var) <= 0.05 * var


def test_zero_bound_draws_positive():
    rng = np.random.default_rng(3)
    draws = gig_slice_sample_batch(-3.0, np.full(20000, 0.5), 2.0, 0.0, rng)
    assert np.all(draws > 0)


@pytest.mark.parametrize(
    "order, chi, psi, lower",
    [(-15.5, 4.0, 10.0, 0.3), (-0.5, 1.0, 1.0, 0.0), (0.0, 2.0, 0.5, 1.0), (-7.0, 0.05, 40.0, 0.02),
     (-31.0, 30.0, 3.0, 0.0)],
)
def test_sampler_ks_against_quadrature_cdf(order, chi, psi, lower):
    rng = np.random.default_rng(5)
    draws = gig_slice_sample_batch(order, np.full(100000, chi), psi, lower, rng)
    cdf = truncated_gig_delta_cdf(order, chi, psi, lower)
    stat = stats.kstest(draws, cdf).statistic
    assert stat < 1.63 / math.sqrt(draws.size)
