import math

import mpmath
import numpy as np
import pytest
from scipy.stats import norm

from statverify import gp, verify
from statverify.gp import PredictiveDist
from statverify.kernel import KernelHyperparams


def test_true_p_sat_examples():
    assert verify.true_p_sat(0.0, 0.3) == 0.5
    assert verify.true_p_sat(0.3, 0.3) == pytest.approx(norm.cdf(1.0), abs=1e-14)
    assert verify.true_p_sat(0.3, 0.3) == pytest.approx(0.84134, abs=1e-5)
    assert verify.true_p_sat(-1e6, 0.3) == 0.0
    with pytest.raises(ValueError):
        verify.true_p_sat(0.0, 0.0)


def test_erf_accuracy_against_arbitrary_precision():
    xs = np.linspace(-6, 6, 241)
    ref = np.array([float(mpmath.erf(mpmath.mpf(float(x)))) for x in xs])
    got = 2 * verify.true_p_sat(xs, 1 / math.sqrt(2)) - 1
    assert np.max(np.abs(got - ref)) <= 1e-12


def test_predicted_p_sat_examples():
    assert verify.predicted_p_sat(PredictiveDist(0.0, 0.7), 0.2) == 0.5
    for mu in (-0.3, 0.05, 0.4):
        assert verify.predicted_p_sat(PredictiveDist(mu, 0.0), 0.1) == verify.true_p_sat(mu, 0.1)


def test_predicted_p_sat_monte_carlo():
    rng = np.random.default_rng(0)
    ybar = rng.normal(0.1, math.sqrt(0.03), size=10 ** 6)
    mc = norm.cdf(ybar / 0.1).mean()
    assert verify.predicted_p_sat(PredictiveDist(0.1, 0.03), 0.1) == pytest.approx(mc, abs=3e-3)


def test_cdf_variance_examples():
    e = 0.2
    assert verify.cdf_variance(PredictiveDist(0.0, e ** 2), e) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert verify.cdf_variance(PredictiveDist(0.0, e ** 2), e) == pytest.approx(0.159155, abs=1e-6)
    assert verify.cdf_variance(PredictiveDist(0.4, 0.0), e) == 0.0
    assert verify.cdf_variance(PredictiveDist(e, e ** 2), e) == pytest.approx(math.exp(-1) / (2 * math.pi), rel=1e-14)
    assert verify.cdf_variance(PredictiveDist(e, e ** 2), e) == pytest.approx(0.058550, abs=1e-6)


def test_posterior_variance_after_sample_examples():
    e = 0.3
    assert verify.posterior_variance_after_sample(PredictiveDist(1.0, e ** 2), e) == pytest.approx(e ** 2 / 2)
    assert verify.posterior_variance_after_sample(PredictiveDist(1.0, 0.0), e) == 0.0


def test_variance_reduction_examples():
    e = 0.25
    assert verify.variance_reduction(PredictiveDist(0.0, e ** 2), e) == pytest.approx(1 / (4 * math.pi), rel=1e-14)
    assert verify.variance_reduction(PredictiveDist(0.0, e ** 2), e) == pytest.approx(0.0795775, abs=1e-7)
    assert verify.variance_reduction(PredictiveDist(0.1, 0.0), e) == 0.0


def test_variance_reduction_identity():
    rng = np.random.default_rng(1)
    mu = rng.normal(0, 0.5, 10 ** 4)
    var = rng.uniform(0, 1, 10 ** 4)
    e = rng.uniform(0.01, 1, 10 ** 4)
    red = verify.variance_reduction((mu, var), e)
    after = verify.posterior_variance_after_sample((mu, var), e)
    diff = verify.cdf_variance((mu, var), e) - verify.cdf_variance((mu, after), e)
    assert np.max(np.abs(red - diff)) <= 1e-12 * np.maximum(1.0, np.abs(red)).max()
    assert np.all(red <= verify.cdf_variance((mu, var), e))


def test_chebyshev_bound():
    assert verify.chebyshev_bound(0.0, 0.3) == 0.0
    assert verify.chebyshev_bound(0.04, 0.2) == pytest.approx(1.0, abs=1e-15)
    assert verify.chebyshev_bound(0.5, 0.2) == 1.0
    assert verify.chebyshev_bound(0.01, 0.5) == pytest.approx(0.04)
    with pytest.raises(ValueError):
        verify.chebyshev_bound(0.1, 0.0)


def woodbury_instance(rng):
    n = int(rng.integers(1, 21))
    p = int(rng.integers(1, 4))
    X = rng.uniform(-2, 2, size=(n, p))
    y = rng.normal(size=n)
    kh = KernelHyperparams(np.exp(rng.uniform(-1, 1)), np.exp(rng.uniform(-1, 1, p)))
    lh = gp.LikelihoodHyperparams(np.exp(rng.uniform(-3, 0)), False)
    q = rng.uniform(-2.5, 2.5, size=p)
    return gp.TrainingSet(X, y), kh, lh, q


def test_woodbury_matches_retrain():
    rng = np.random.default_rng(2)
    for _ in range(100):
        train, kh, lh, q = woodbury_instance(rng)
        d = gp.predict(gp.fit(train, kh, lh), q)
        retrained = gp.fit(train.append(q.reshape(1, -1), [d.mean]), kh, lh)
        d_plus = gp.predict(retrained, q)
        assert verify.posterior_variance_after_sample(d, lh.noise_std) == pytest.approx(d_plus.variance, abs=1e-8)
        assert d_plus.mean == pytest.approx(d.mean, abs=1e-8)


def test_field_evaluate():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(6, 2))
    y = np.array([0.5, -0.4, 0.3, -0.7, 0.9, -0.2])
    m = gp.fit(gp.TrainingSet(X, y), KernelHyperparams(1.0, [0.3, 0.3]),
               gp.LikelihoodHyperparams(0.02, False))
    assert len(verify.field_evaluate(m, np.zeros((0, 2)))) == 0
    f = verify.field_evaluate(m, X)
    np.testing.assert_array_equal(f.p_sat_hat > 0.5, y > 0)
    assert np.all((f.p_sat_hat < 1e-6) | (f.p_sat_hat > 1 - 1e-6))

    lattice = rng.uniform(-1, 1, size=(20, 2))
    f = verify.field_evaluate(m, lattice)
    for i, q in enumerate(lattice):
        d = gp.predict(m, q)
        assert f.mean[i] == pytest.approx(d.mean, rel=1e-12, abs=1e-14)
        assert f.variance[i] == pytest.approx(d.variance, rel=1e-12, abs=1e-14)
        composed = PredictiveDist(f.mean[i], f.variance[i])
        est = f[i]
        assert est.p_sat_hat == verify.predicted_p_sat(composed, 0.02)
        assert est.cdf_variance == verify.cdf_variance(composed, 0.02)
        assert 0 <= est.p_sat_hat <= 1
        assert 0 <= est.cdf_variance <= 1.0 / (2 * math.pi * 0.02 ** 2)


def test_monotonicity_properties():
    mus = np.linspace(-0.5, 0.5, 201)
    for var in (0.0, 0.01, 0.1, 1.0):
        p = verify.predicted_p_sat((mus, np.full_like(mus, var)), 0.1)
        assert np.all(np.diff(p) > 0)
    vars_ = np.linspace(0, 5, 100)
    p = verify.predicted_p_sat((np.full_like(vars_, 0.3), vars_), 0.1)
    assert np.all(np.diff(p) < 0) and np.all(p > 0.5)
    p = verify.predicted_p_sat((np.full_like(vars_, -0.3), vars_), 0.1)
    assert np.all(np.diff(p) > 0) and np.all(p < 0.5)
    v = verify.cdf_variance((mus, np.full_like(mus, 0.2)), 0.1)
    assert np.argmax(v) == 100
