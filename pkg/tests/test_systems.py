import numpy as np
import pytest
from scipy.stats import norm

from statverify import stl, systems


def test_lattice_examples():
    lat = systems.build_lattice([(0.0, 1.0)], 3)
    np.testing.assert_array_equal(lat.points.ravel(), [0.0, 0.5, 1.0])
    big = systems.build_lattice([(-10, 10), (-10, 10)], 201)
    assert len(big) == 40401
    lat = systems.build_lattice([(0, 1), (0, 2), (5, 6)], (2, 3, 4))
    assert len(lat) == 24
    # row-major, last dimension fastest
    np.testing.assert_array_equal(lat.points[:4, 2], np.linspace(5, 6, 4))
    assert np.all(lat.points[:4, 0] == 0) and np.all(lat.points[:4, 1] == 0)
    assert len(np.unique(lat.points, axis=0)) == len(lat)


def test_lattice_errors():
    with pytest.raises(ValueError):
        systems.build_lattice([(0, 1)], 1)
    with pytest.raises(ValueError):
        systems.build_lattice([(1, 0)], 3)
    with pytest.raises(ValueError):
        systems.build_lattice([(0, 1), (0, 1)], 2000)


def test_derive_seed_mixes_all_keys():
    a = systems.derive_seed(1, 2, 0)
    assert a == systems.derive_seed(1, 2, 0)
    assert len({a, systems.derive_seed(1, 3, 0), systems.derive_seed(2, 2, 0),
                systems.derive_seed(1, 2, 1)}) == 4
    assert 0 <= a < 2 ** 64


def test_analytic_noise_free_and_determinism():
    s = systems.AnalyticField(noise_std=0.0)
    theta = [1.3, -2.0]
    ybar = np.sin(1.3) * np.cos(-2.0) + 0.3 * 1.3 / 10
    for seed in (0, 1, 99):
        assert systems.simulate_measure(s, theta, seed).y == ybar
    s = systems.AnalyticField()
    assert systems.simulate_measure(s, theta, 5).y == systems.simulate_measure(s, theta, 5).y
    with pytest.raises(ValueError):
        systems.simulate_measure(s, [11.0, 0.0], 0)


def test_analytic_noise_moments():
    s = systems.AnalyticField()
    theta = np.array([2.0, 0.5])
    y = np.array([systems.simulate_measure(s, theta, seed).y for seed in range(10 ** 4)])
    assert np.var(y, ddof=1) == pytest.approx(s.noise_std ** 2, rel=0.05)
    z = (y - s.latent_mean(theta)) / s.noise_std
    n = len(z)
    skew, kurt = np.mean(z ** 3), np.mean(z ** 4) - 3
    assert abs(skew) < 3 * np.sqrt(6 / n)
    assert abs(kurt) < 3 * np.sqrt(24 / n)


def test_ground_truth_analytic():
    s = systems.AnalyticField()
    eps = s.noise_std
    # theta_1 = 0 gives ybar = 0; choose theta with ybar = eps by solving along theta_2 = 0
    from scipy.optimize import brentq

    t1 = brentq(lambda t: s.latent_mean(np.array([t, 0.0])) - eps, 0.0, 0.5)
    pts = np.array([[0.0, 3.0], [t1, 0.0]])
    gt = systems.ground_truth(s, pts)
    assert gt.p_sat_true[0] == pytest.approx(0.5, abs=1e-15)
    assert gt.p_sat_true[1] == pytest.approx(norm.cdf(1.0), abs=1e-12)


def test_ground_truth_monte_carlo_converges_for_analytic():
    s = systems.AnalyticField()
    pts = systems.build_lattice(s.theta_bounds, 5).points
    exact = systems.ground_truth(s, pts).p_sat_true
    mc = systems.monte_carlo_p_sat(s, pts, 10 ** 5, seed=3)
    assert np.max(np.abs(mc - exact)) < 0.005


def test_linear_sde_simulation():
    s = systems.LinearSde()
    theta = [4.0, 1.0]
    a = systems.simulate_measure(s, theta, 11)
    assert a.y == systems.simulate_measure(s, theta, 11).y
    assert a.y != systems.simulate_measure(s, theta, 12).y
    # robustness agrees with an explicit Euler-Maruyama loop + direct scan
    rng = np.random.default_rng(11)
    w = rng.standard_normal((s.n_steps, 2))
    x, v = s.x_init, s.v_init
    xs = [x]
    for i in range(s.n_steps):
        x, v = x + v * s.dt + s.noise_gain * np.sqrt(s.dt) * w[i, 0], \
            v + (-4.0 * x - 1.0 * v) * s.dt + s.noise_gain * np.sqrt(s.dt) * w[i, 1]
        xs.append(x)
    assert a.y == pytest.approx(min(1 - abs(q) for q in xs), abs=1e-12)


def test_linear_sde_trajectory_channels():
    s = systems.LinearSde(spec_text="G[0,10](3 - abs(x - x0) >= 0)")
    states = s.integrate([2.0, 0.5], np.zeros((s.n_steps, 2)))
    tr = s.trajectory(states)
    assert set(tr.signals) == {"x", "v", "x0", "v0"}
    assert tr.times[-1] == pytest.approx(10.0)
    assert stl.robustness(s.spec, tr) > 0


def test_linear_sde_ground_truth_properties():
    s = systems.LinearSde()
    pts = np.array([[9.0, 4.0], [1.0, 0.1]])
    gt = systems.ground_truth(s, pts, mc_draws=2000, seed=1)
    assert gt.p_sat_true[0] > 0.9
    assert gt.p_sat_true[1] < 0.1
    assert 0.5 / np.sqrt(2000) <= 0.012
    again = systems.ground_truth(s, pts, mc_draws=2000, seed=1)
    np.testing.assert_array_equal(gt.p_sat_true, again.p_sat_true)


def test_noise_estimation_unweighted_mean():
    s = systems.AnalyticField()
    pts = systems.build_lattice(s.theta_bounds, 4).points
    est = systems.estimate_noise_std(s, pts, 4000, seed=2)
    assert est == pytest.approx(0.0372, rel=0.02)


def test_make_system():
    s = systems.make_system("analytic_field", noise_std=0.1, theta_bounds=[[-1, 1], [-2, 2]])
    assert s.theta_bounds == ((-1.0, 1.0), (-2.0, 2.0))
    assert systems.make_system("linear_sde").kind == "linear_sde"
    with pytest.raises(ValueError):
        systems.make_system("pendulum")
