"""Benchmark stochastic systems, parameter lattices and seed derivation.

Two benchmarks are provided:

``AnalyticField``
    ``y = ybar(theta) + noise_std * eta`` with a closed-form latent surface,
    so the true satisfaction probability is known exactly.
``LinearSde``
    A damped oscillator driven by additive Gaussian process noise, integrated
    with Euler-Maruyama; ``y`` is the STL robustness of the trajectory.

Every measurement is a pure function of ``(system, theta, seed)``.  Seeds for
individual samples are derived from ``(run seed, lattice index, draw counter)``
with :func:`derive_seed`, so parallel evaluation never changes results.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import stl
from .verify import GroundTruthField, true_p_sat

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
DEFAULT_LATTICE_CAP = 10 ** 6
GROUND_TRUTH_STREAM = 0x67726F756E64  # distinct draw-counter namespace for ground-truth sampling


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*keys: int) -> int:
    """Mix integer keys into one 64-bit seed by chained splitmix64 steps."""
    h = 0
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK64))
    return h


# -- lattice ----------------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    """Regular grid, row-major with the last dimension varying fastest."""

    points: np.ndarray
    bounds: tuple
    resolution: tuple

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def build_lattice(bounds, resolution, cap: int = DEFAULT_LATTICE_CAP) -> Lattice:
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    resolution = tuple(int(r) for r in np.broadcast_to(resolution, (len(bounds),)))
    for (lo, hi), r in zip(bounds, resolution):
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError(f"invalid bounds [{lo}, {hi}]")
        if r < 2:
            raise ValueError(f"resolution must be >= 2 per dimension, got {r}")
    total = int(np.prod(resolution, dtype=object))
    if total > cap:
        raise ValueError(f"lattice of {total} points exceeds cap {cap}")
    axes = [np.linspace(lo, hi, r) for (lo, hi), r in zip(bounds, resolution)]
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    points.setflags(write=False)
    return Lattice(points, bounds, resolution)


# -- systems ----------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementSample:
    theta: np.ndarray
    y: float
    seed: int


def sin_cos_surface(theta: np.ndarray) -> np.ndarray:
    return np.sin(theta[..., 0]) * np.cos(theta[..., 1]) + 0.3 * theta[..., 0] / 10.0


@dataclass(frozen=True)
class AnalyticField:
    noise_std: float = 0.0372
    theta_bounds: tuple = ((-10.0, 10.0), (-10.0, 10.0))
    surface: Callable[[np.ndarray], np.ndarray] = field(default=sin_cos_surface, compare=False)

    kind = "analytic_field"

    @property
    def dim_theta(self) -> int:
        return len(self.theta_bounds)

    def latent_mean(self, theta) -> np.ndarray:
        return self.surface(np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class LinearSde:
    """``dx = v dt + g dW1``, ``dv = (-stiffness x - damping v) dt + g dW2``.

    ``theta = (stiffness, damping)``; the initial state is ``(x_init, v_init)``.
    The trajectory exposes channels ``x``, ``v`` and their initial values
    ``x0``, ``v0`` as constant channels.
    """

    spec_text: str = "G[0,10](1 - abs(x) >= 0)"
    theta_bounds: tuple = ((1.0, 9.0), (0.1, 4.0))
    noise_gain: float = 0.2
    dt: float = 0.05
    horizon: float = 10.0
    x_init: float = 0.0
    v_init: float = 2.0

    kind = "linear_sde"

    @property
    def dim_theta(self) -> int:
        return 2

    @property
    def spec(self):
        return stl.parse(self.spec_text)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def integrate(self, theta, noise: np.ndarray) -> np.ndarray:
        """Euler-Maruyama paths for standard-normal increments ``noise`` (..., n_steps, 2).

        Returns states of shape (..., n_steps + 1, 2).
        """
        k, c = float(theta[0]), float(theta[1])
        dt = self.dt
        sq = self.noise_gain * np.sqrt(dt)
        n = noise.shape[-2]
        out = np.empty(noise.shape[:-2] + (n + 1, 2))
        x = np.full(noise.shape[:-2], self.x_init, dtype=float)
        v = np.full(noise.shape[:-2], self.v_init, dtype=float)
        out[..., 0, 0], out[..., 0, 1] = x, v
        for i in range(n):
            x, v = (x + v * dt + sq * noise[..., i, 0],
                    v + (-k * x - c * v) * dt + sq * noise[..., i, 1])
            out[..., i + 1, 0], out[..., i + 1, 1] = x, v
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite state integrating theta={theta}")
        return out

    def trajectory(self, states: np.ndarray) -> stl.Trajectory:
        times = self.dt * np.arange(states.shape[0])
        x, v = states[:, 0], states[:, 1]
        return stl.Trajectory(times, {"x": x, "v": v,
                                      "x0": np.full_like(x, x[0]), "v0": np.full_like(v, v[0])})


BenchmarkSystem = AnalyticField | LinearSde


def make_system(kind: str, **params) -> BenchmarkSystem:
    if kind == "analytic_field":
        if "theta_bounds" in params:
            params["theta_bounds"] = tuple(tuple(map(float, b)) for b in params["theta_bounds"])
        return AnalyticField(**params)
    if kind == "linear_sde":
        if "theta_bounds" in params:
            params["theta_bounds"] = tuple(tuple(map(float, b)) for b in params["theta_bounds"])
        return LinearSde(**params)
    raise ValueError(f"unknown benchmark kind {kind!r}")


def _check_bounds(system, theta):
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != system.dim_theta:
        raise ValueError(f"theta has dimension {theta.size}, expected {system.dim_theta}")
    for d, (lo, hi) in enumerate(system.theta_bounds):
        if not lo - 1e-12 <= theta[d] <= hi + 1e-12:
            raise ValueError(f"theta[{d}]={theta[d]} outside [{lo}, {hi}]")
    return theta


def simulate_measure(system: BenchmarkSystem, theta, seed: int) -> MeasurementSample:
    """One stochastic measurement of the robustness signal at ``theta``."""
    theta = _check_bounds(system, theta)
    rng = np.random.default_rng(seed)
    if system.kind == "analytic_field":
        y = float(system.latent_mean(theta)) + system.noise_std * rng.standard_normal()
    else:
        states = system.integrate(theta, rng.standard_normal((system.n_steps, 2)))
        y = stl.robustness(system.spec, system.trajectory(states))
    if not np.isfinite(y):
        raise FloatingPointError(f"non-finite measurement at theta={theta}")
    return MeasurementSample(theta, float(y), int(seed))


def sample_seed(run_seed: int, lattice_index: int, draw: int = 0) -> int:
    return derive_seed(run_seed, lattice_index, draw)


def measure_indices(system, lattice: Lattice, indices, run_seed: int, draw: int = 0,
                    executor=None) -> np.ndarray:
    """Measurements at lattice ``indices``, one per index, in index order."""
    indices = [int(i) for i in indices]
    seeds = [sample_seed(run_seed, i, draw) for i in indices]
    thetas = [lattice.points[i] for i in indices]
    if executor is None:
        samples = [simulate_measure(system, t, s) for t, s in zip(thetas, seeds)]
    else:
        samples = list(executor.map(simulate_measure, [system] * len(seeds), thetas, seeds))
    return np.array([s.y for s in samples])


def _robustness_batch(system: LinearSde, theta, rng, draws):
    states = system.integrate(theta, rng.standard_normal((draws, system.n_steps, 2)))
    spec = system.spec
    return np.array([stl.robustness(spec, system.trajectory(s)) for s in states])


def ground_truth(system: BenchmarkSystem, lattice: Lattice, mc_draws: int = 2000,
                 seed: int = 0) -> GroundTruthField:
    """True satisfaction probability over the lattice.

    Exact for ``AnalyticField``; for ``LinearSde`` the fraction of ``mc_draws``
    trajectories with positive robustness at each point.
    """
    points = lattice.points if isinstance(lattice, Lattice) else np.asarray(lattice, dtype=float)
    if system.kind == "analytic_field":
        p = true_p_sat(system.latent_mean(points), system.noise_std)
        return GroundTruthField(points, np.asarray(p, dtype=float))
    if mc_draws < 1:
        raise ValueError("mc_draws must be >= 1")
    p = np.empty(len(points))
    for i, theta in enumerate(points):
        rng = np.random.default_rng(derive_seed(seed, i, GROUND_TRUTH_STREAM))
        p[i] = np.mean(_robustness_batch(system, theta, rng, mc_draws) > 0)
    return GroundTruthField(points, p)


def monte_carlo_p_sat(system: BenchmarkSystem, lattice, draws: int, seed: int = 0) -> np.ndarray:
    """Fraction of positive measurements from ``draws`` simulations per point."""
    points = lattice.points if isinstance(lattice, Lattice) else np.asarray(lattice, dtype=float)
    p = np.empty(len(points))
    for i, theta in enumerate(points):
        rng = np.random.default_rng(derive_seed(seed, i, GROUND_TRUTH_STREAM))
        if system.kind == "analytic_field":
            y = system.latent_mean(theta) + system.noise_std * rng.standard_normal(draws)
        else:
            y = _robustness_batch(system, theta, rng, draws)
        p[i] = np.mean(y > 0)
    return p


def estimate_noise_std(system: BenchmarkSystem, points, draws: int, seed: int = 0) -> float:
    """Fit a Gaussian at each point by repeated sampling; return sqrt of the mean variance.

    The variance is averaged across points with equal weights.
    """
    points = points.points if isinstance(points, Lattice) else np.asarray(points, dtype=float)
    if draws < 2:
        raise ValueError("draws must be >= 2")
    variances = []
    for i, theta in enumerate(points):
        rng = np.random.default_rng(derive_seed(seed, i, GROUND_TRUTH_STREAM))
        if system.kind == "analytic_field":
            y = system.latent_mean(theta) + system.noise_std * rng.standard_normal(draws)
        else:
            y = _robustness_batch(system, theta, rng, draws)
        variances.append(np.var(y, ddof=1))
    return float(np.sqrt(np.mean(variances)))
