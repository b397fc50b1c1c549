import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochmdn.mixture import (
    MixtureParams,
    cdf,
    erf,
    gnll_batch,
    gnll_gradients,
    gnll_point,
    pdf,
)

import oracles

# Frozen oracle outputs (tests/oracles.py, mpmath at 40 digits).
PHI_AT_1 = 0.24197072451914337
ERF_1 = 0.8427007929497149
CDF_TWO_COMPONENT_AT_0 = 0.4134784550356288
HALF_LOG_2PI = 0.9189385332046727


def random_params(rng, K=None):
    K = K or int(rng.integers(1, 5))
    a = rng.random(K) + 0.05
    return MixtureParams(rng.normal(0, 2, K), rng.uniform(0.2, 2.0, K), a / a.sum())


def test_frozen_values_match_oracles():
    assert oracles.erf_series(1.0) == pytest.approx(ERF_1, abs=1e-15)
    assert float(oracles.mixture_pdf_mp([-1, 1], [1, 1], [0.5, 0.5], 0)) == pytest.approx(PHI_AT_1, abs=1e-15)
    assert oracles.mixture_cdf_quad([-1, 1], [0.3, 0.5], [0.4, 0.6], 0.0) == pytest.approx(
        CDF_TWO_COMPONENT_AT_0, abs=1e-14)


def test_params_validation():
    with pytest.raises(ValueError):
        MixtureParams([0.0], [0.0], [1.0])
    with pytest.raises(ValueError):
        MixtureParams([0.0, 1.0], [1.0, 1.0], [0.5, 0.4])
    with pytest.raises(ValueError):
        MixtureParams([0.0, 1.0], [1.0], [1.0])
    with pytest.raises(ValueError):
        MixtureParams([], [], [])
    with pytest.raises(ValueError):
        MixtureParams([np.nan], [1.0], [1.0])


def test_pdf_examples():
    assert pdf(MixtureParams([0.0], [1.0], [1.0]), 0.0) == pytest.approx(0.398942280, abs=1e-9)
    p2 = MixtureParams([-1.0, 1.0], [1.0, 1.0], [0.5, 0.5])
    assert pdf(p2, 0.0) == pytest.approx(PHI_AT_1, abs=1e-9)
    far = pdf(MixtureParams([0.0], [1.0], [1.0]), 100.0)
    assert far < 1e-300 and not math.isnan(far)


def test_cdf_examples():
    assert cdf(MixtureParams([0.0], [1.0], [1.0]), 0.0) == pytest.approx(0.5, abs=1e-12)
    p = MixtureParams([-1.0, 1.0], [0.3, 0.5], [0.4, 0.6])
    assert cdf(p, 0.0) == pytest.approx(CDF_TWO_COMPONENT_AT_0, abs=1e-8)
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = random_params(rng)
        assert cdf(p, p.means.max() + 12 * p.sigmas.max()) >= 1 - 1e-12


def test_erf_examples():
    assert erf(0.0) == 0.0
    assert erf(1.0) == pytest.approx(ERF_1, abs=1e-9)
    xs = np.linspace(-7, 7, 301)
    assert np.array_equal(erf(-xs), -erf(xs))
    assert erf(7.0) == 1.0 and erf(-30.0) == -1.0


def test_erf_accuracy_against_series():
    rng = np.random.default_rng(2)
    xs = np.concatenate([rng.uniform(-6, 6, 300), [1e-30, 2**-28, 0.84375, 1.25, 1 / 0.35, 5.999]])
    worst = max(abs(erf(x) - oracles.erf_series(x)) for x in xs)
    assert worst <= 1e-12


def test_gnll_point_examples():
    assert gnll_point(MixtureParams([0.3], [1.0], [1.0]), 0.3) == pytest.approx(HALF_LOG_2PI, abs=1e-9)
    far = gnll_point(MixtureParams([0.0], [1.0], [1.0]), 50.0)
    assert far == pytest.approx(0.5 * 50**2 + 0.5 * math.log(2 * math.pi), rel=1e-12)
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = random_params(rng)
        x = rng.normal(0, 3)
        d = pdf(p, x)
        if d > 1e-300:
            assert gnll_point(p, x) == pytest.approx(-math.log(d), rel=1e-12, abs=1e-12)


def test_gnll_batch():
    rng = np.random.default_rng(4)
    p = random_params(rng)
    assert gnll_batch([p], [0.2]) == gnll_point(p, 0.2)
    assert gnll_batch([p, p], [0.2, 0.2]) == pytest.approx(gnll_point(p, 0.2), abs=1e-15)
    ps = [random_params(rng) for _ in range(10)]
    xs = rng.normal(0, 2, 10)
    assert gnll_batch(ps, xs) == pytest.approx(sum(gnll_point(q, x) for q, x in zip(ps, xs)) / 10, abs=1e-12)
    with pytest.raises(ValueError):
        gnll_batch([], [])
    with pytest.raises(ValueError):
        gnll_batch([p], [0.1, 0.2])


def _fd(fun, value, h=1e-6):
    return (fun(value + h) - fun(value - h)) / (2 * h)


def test_gnll_gradients_finite_difference():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = random_params(rng)
        x = float(rng.normal(0, 2))
        d_mu, d_sigma, d_alpha = gnll_gradients(p, x)
        for k in range(p.K):
            def loss(m=None, s=None, a=None, k=k):
                means, sigmas, alphas = p.means.copy(), p.sigmas.copy(), p.alphas.copy()
                if m is not None:
                    means[k] = m
                if s is not None:
                    sigmas[k] = s
                if a is not None:
                    alphas[k] = a
                # alpha is perturbed without renormalizing: the gradient is w.r.t. the raw weight
                lc = -0.5 * ((x - means) / sigmas) ** 2 - np.log(sigmas) - 0.5 * math.log(2 * math.pi)
                return -math.log(np.sum(alphas * np.exp(lc)))
            for analytic, fd in ((d_mu[k], _fd(lambda v: loss(m=v), p.means[k])),
                                 (d_sigma[k], _fd(lambda v: loss(s=v), p.sigmas[k])),
                                 (d_alpha[k], _fd(lambda v: loss(a=v), p.alphas[k]))):
                assert analytic == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_gnll_gradient_symmetries():
    d_mu, _, _ = gnll_gradients(MixtureParams([0.7], [1.3], [1.0]), 0.7)
    assert d_mu[0] == 0.0
    d_mu, _, _ = gnll_gradients(MixtureParams([-1.0, 1.0], [0.5, 0.5], [0.5, 0.5]), 0.0)
    assert d_mu[0] == pytest.approx(-d_mu[1], abs=1e-15)


def test_gnll_finite_for_far_targets():
    p = MixtureParams([0.0, 1.0], [0.5, 0.5], [0.5, 0.5])
    loss = gnll_point(p, 1e4)
    assert np.isfinite(loss)
    assert all(np.all(np.isfinite(g)) for g in gnll_gradients(p, 1e4))


def test_pdf_integrates_to_one():
    rng = np.random.default_rng(6)
    for _ in range(5):
        p = random_params(rng)
        lo = float(np.min(p.means - 10 * p.sigmas))
        hi = float(np.max(p.means + 10 * p.sigmas))
        mass = oracles.mixture_mass_quad(p.means, p.sigmas, p.alphas, lo, hi)
        assert abs(mass - 1) <= 1e-6


def test_cdf_derivative_is_pdf():
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = random_params(rng)
        x = float(rng.normal(0, 2))
        h = 1e-5
        fd = (cdf(p, x + h) - cdf(p, x - h)) / (2 * h)
        d = pdf(p, x)
        if d > 1e-3:
            assert fd == pytest.approx(d, rel=1e-6)


mixtures = st.integers(1, 4).flatmap(lambda K: st.tuples(
    st.lists(st.floats(-5, 5), min_size=K, max_size=K),
    st.lists(st.floats(0.05, 3), min_size=K, max_size=K),
    st.lists(st.floats(0.01, 1), min_size=K, max_size=K),
))


def _build(t):
    m, s, a = (np.asarray(v, dtype=float) for v in t)
    return MixtureParams(m, s, a / a.sum())


@settings(max_examples=100, deadline=None)
@given(mixtures, st.lists(st.floats(-30, 30), min_size=2, max_size=50))
def test_cdf_monotone_and_bounded(t, xs):
    p = _build(t)
    c = cdf(p, np.sort(np.asarray(xs)))
    assert np.all(np.diff(c) >= -1e-14)
    assert np.all((c >= 0) & (c <= 1))


@settings(max_examples=100, deadline=None)
@given(mixtures, st.floats(-50, 50))
def test_gnll_log_domain_consistent(t, x):
    p = _build(t)
    loss = gnll_point(p, x)
    assert np.isfinite(loss)
    d = pdf(p, x)
    if d > 1e-300:
        assert loss == pytest.approx(-math.log(d), rel=1e-10, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10))
def test_erf_odd_and_bounded(x):
    assert erf(-x) == -erf(x)
    assert -1.0 <= erf(x) <= 1.0
