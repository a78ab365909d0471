import math

import numba
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from exactfpt import oracle
from exactfpt import randkit as rk
from exactfpt.randkit import RngStream


@numba.njit
def _many(gen, which, n, a, b):
    out = np.empty(n)
    for i in range(n):
        if which == 0:
            out[i] = rk.exponential(gen, a)
        elif which == 1:
            out[i] = rk.uniform(gen, a, b)
        elif which == 2:
            g1, g2, g3 = rk.gaussian3(gen)
            out[i] = g1 * g1 + g2 * g2 + g3 * g3
        elif which == 3:
            out[i] = rk.brownian_fpt(gen, a)
        elif which == 4:
            out[i] = rk.gaussian_below(gen, a, b)
        elif which == 5:
            out[i] = rk.std_gaussian(gen)
    return out


@numba.njit
def _cbm_many(gen, n, T, L):
    out = np.empty(n)
    attempts = 0
    for i in range(n):
        x, k = rk.cbm_sample_counted(gen, T, L, 10**6)
        out[i] = x
        attempts += k
    return out, attempts


def draws(which, n=10**6, a=1.0, b=0.0, seed=1):
    return _many(RngStream(seed).generator, which, n, a, b)


def test_exponential_mean():
    x = draws(0)
    assert 0.997 <= x.mean() <= 1.003
    assert x.min() > 0


def test_exponential_law():
    x = draws(0, n=10**5, a=0.2)
    assert stats.kstest(x, stats.expon(scale=0.2).cdf).pvalue > 1e-3


def test_uniform_variance():
    x = draws(1, a=0.0, b=1.0)
    assert abs(x.var() - 1 / 12) < 0.001
    y = draws(1, n=1000, a=-2.0, b=3.0)
    assert y.min() >= -2.0 and y.max() < 3.0


def test_gaussian3_norm():
    assert abs(draws(2).mean() - 3.0) < 0.01


def test_brownian_fpt_law():
    x = draws(3, n=10**5, a=2.0)
    assert oracle.ks_statistic(x, lambda t: oracle.bm_fpt_cdf(t, 2.0)) < 0.006


def test_brownian_fpt_hooks():
    assert rk.brownian_fpt_from_gaussian(1.7, 1.0) == pytest.approx(1.7 ** 2)
    a = draws(3, n=100, a=1.0, seed=9)
    b = draws(3, n=100, a=2.0, seed=9)
    np.testing.assert_allclose(b, 4 * a, rtol=1e-14)


def test_gaussian_below_vacuous_bound():
    x = draws(4, n=10**5, a=2.0, b=10 * math.sqrt(2.0))
    assert abs(x.mean()) < 4 * math.sqrt(2.0 / 1e5)
    assert abs(x.var() - 2.0) < 0.05


def test_gaussian_below_half_normal():
    x = draws(4, a=1.0, b=0.0)
    assert abs(x.mean() + math.sqrt(2 / math.pi)) < 0.005
    assert x.max() <= 0.0


@pytest.mark.parametrize("bound", [-1.0, -2.5, -6.0])
def test_gaussian_below_tail_law(bound):
    # bound -2.5 and -6 use the exponential tail sampler
    x = draws(4, n=50000, a=4.0, b=2 * bound)
    assert x.max() <= 2 * bound
    ref = stats.truncnorm(-np.inf, bound, scale=2.0)
    assert stats.kstest(x, ref.cdf).pvalue > 1e-3


@given(st.floats(0.01, 100), st.floats(-20, 20), st.integers(0, 2**32))
def test_gaussian_below_support(var, bound, seed):
    x = _many(RngStream(seed).generator, 4, 50, var, bound)
    assert (x <= bound).all()


def test_cbm_law_and_acceptance():
    x, attempts = _cbm_many(RngStream(3).generator, 10**5, 1.0, 1.0)
    assert x.max() < 1.0
    assert oracle.ks_statistic(x, lambda u: oracle.cbm_cdf(1.0, 1.0, u)) < 0.006
    rate = 10**5 / attempts
    want = oracle.cbm_acceptance_probability(1.0, 1.0)
    assert abs(rate / want - 1) < 0.01


def test_cbm_far_level_is_gaussian():
    x, _ = _cbm_many(RngStream(4).generator, 10**5, 1.0, 8.0)
    assert abs(x.mean()) < 0.005 * 3
    assert abs(x.var() - 1.0) < 0.02


@given(st.floats(0.01, 10), st.floats(0.01, 5), st.integers(0, 2**32))
def test_cbm_support(T, L, seed):
    x, _ = _cbm_many(RngStream(seed).generator, 20, T, L)
    assert (x < L).all()


def test_cbm_cap_reports():
    s = RngStream(1)
    with pytest.raises(RuntimeError):
        s.cbm_sample(1.0, 1e-9, max_iter=3)


def test_bridge_pins_endpoint():
    s = RngStream(5)
    assert s.brownian_bridge_increment(0.3, 1.7, 0.5, 0.5) == 1.7
    assert s.brownian_bridge_increment(0.3, 1.7, 0.5, 2.0) == 1.7
    assert rk.brownian_bridge_step(0.0, 1.0, 1.0, 0.25, 0.0) == 0.25


@numba.njit
def _bridge_mid(gen, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = rk.brownian_bridge_increment(gen, 0.0, 0.0, 1.0, 0.5)
    return out


@numba.njit
def _bridge_paths(gen, n, T, times):
    out = np.empty((n, times.size))
    for i in range(n):
        z = 0.0
        t = 0.0
        for k in range(times.size):
            z = rk.brownian_bridge_increment(gen, z, 0.0, T - t, times[k] - t)
            t = times[k]
            out[i, k] = z
    return out


def test_bridge_variance():
    x = _bridge_mid(RngStream(6).generator, 10**6)
    assert abs(x.var() - 0.25) < 0.002


def test_bridge_covariance():
    times = np.array([0.3, 0.5, 1.1, 1.6])
    T = 2.0
    paths = _bridge_paths(RngStream(7).generator, 10**5, T, times)
    emp = paths.T @ paths / paths.shape[0]
    s, u = np.meshgrid(times, times)
    want = np.minimum(s, u) - s * u / T
    assert np.abs(emp - want).max() < 0.003
    assert np.abs(paths.mean(axis=0)).max() < 3 * math.sqrt(want.diagonal().max() / 1e5)


@numba.njit
def _bessel(gen, n, duration, d, t_next, level):
    out = np.empty((n, 4))
    for i in range(n):
        delta = np.zeros(3)
        pos = rk.bessel3_bridge_point(gen, duration, d, 0.0, t_next, delta, level)
        out[i, :3] = delta
        out[i, 3] = pos
    return out


def test_bessel_bridge_endpoint():
    s = RngStream(8)
    delta, pos = s.bessel3_bridge_point(2.0, 1.5, 0.7, 2.0, [0.3, -0.2, 0.1], 1.0)
    np.testing.assert_array_equal(delta, 0.0)
    assert pos == 1.0
    # at time 0 the position is the start L - d
    _, pos0 = s.bessel3_bridge_point(2.0, 1.5, 0.0, 1e-300, [0.0, 0.0, 0.0], 1.0)
    assert pos0 == pytest.approx(-0.5)


def test_bessel_bridge_variance_and_support():
    out = _bessel(RngStream(9).generator, 10**5, 1.0, 2.0, 0.5, 1.0)
    assert np.abs(out[:, :3].var(axis=0) - 0.25).max() < 0.006
    assert (out[:, 3] <= 1.0).all()
    # radius = |(1/2) d e1 + delta| has mean computable from the noncentral chi law
    r = 1.0 - out[:, 3]
    assert abs((r * r).mean() - (1.0 + 3 * 0.25)) < 0.01


def test_streams_reproducible_and_distinct():
    a = draws(5, n=1000, seed=42)
    b = draws(5, n=1000, seed=42)
    np.testing.assert_array_equal(a, b)
    c = _many(RngStream(42, 1).generator, 5, 1000, 0.0, 0.0)
    assert not np.array_equal(a, c)
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.15


def test_stream_validation():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(1, 2**64)


def test_stream_methods():
    s = RngStream(11)
    assert s.exponential(2.0) > 0
    assert 0 <= s.uniform() < 1
    assert len(s.gaussian3()) == 3
    assert s.brownian_fpt(1.0) > 0
    assert s.gaussian_below(1.0, 0.5) <= 0.5
    assert s.cbm_sample(1.0, 1.0) < 1.0
    assert isinstance(s.std_gaussian(), float)
