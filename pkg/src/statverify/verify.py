"""Satisfaction probability, approximate CDF variance and its expected reduction.

Scalar functions accept numpy arrays and broadcast, so the same code scores a
single point or a whole lattice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .gp import GpModel, PredictiveDist, predict_many

INV_2PI = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class SatisfactionEstimate:
    p_sat_hat: float
    cdf_variance: float


@dataclass(frozen=True)
class GroundTruthField:
    lattice: np.ndarray
    p_sat_true: np.ndarray

    def __post_init__(self):
        if len(self.lattice) != len(self.p_sat_true):
            raise ValueError("lattice and p_sat_true lengths differ")

    def __len__(self):
        return len(self.p_sat_true)


@dataclass(frozen=True)
class SatisfactionField:
    """Per-point predictions over a lattice (array form of SatisfactionEstimate)."""

    p_sat_hat: np.ndarray
    cdf_variance: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    noise_std: float
    n_clamped: int = 0

    def __len__(self):
        return len(self.p_sat_hat)

    def __getitem__(self, i) -> SatisfactionEstimate:
        return SatisfactionEstimate(float(self.p_sat_hat[i]), float(self.cdf_variance[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _check_noise(noise_std):
    if not np.all(np.asarray(noise_std) > 0):
        raise ValueError("noise_std must be > 0")


def _unpack(dist):
    if isinstance(dist, PredictiveDist):
        return dist.mean, dist.variance
    return dist


def true_p_sat(mean_fn_value, noise_std):
    """Probability that a noisy measurement around ``mean_fn_value`` is positive."""
    _check_noise(noise_std)
    return 0.5 + 0.5 * erf(mean_fn_value / np.sqrt(2.0 * noise_std ** 2))


def predicted_p_sat(dist, noise_std):
    """Satisfaction probability marginalized over the posterior of the latent mean.

    ``dist`` is a PredictiveDist or a ``(mean, variance)`` pair of arrays.
    """
    _check_noise(noise_std)
    mu, var = _unpack(dist)
    return 0.5 + 0.5 * erf(mu / np.sqrt(2.0 * (np.asarray(var) + noise_std ** 2)))


def cdf_variance(dist, noise_std):
    """First-order approximation of the variance of the satisfaction probability."""
    _check_noise(noise_std)
    mu, var = _unpack(dist)
    nv = noise_std ** 2
    return INV_2PI / nv * np.exp(-np.square(mu) / nv) * var


def posterior_variance_after_sample(dist, noise_std):
    """Expected posterior variance at a point after one more measurement there.

    The posterior mean at that point is unchanged by the expected update.
    """
    _check_noise(noise_std)
    _, var = _unpack(dist)
    var = np.asarray(var, dtype=float)
    return var * (1.0 - var / (var + noise_std ** 2))


def variance_reduction(dist, noise_std):
    """Drop in approximate CDF variance if one measurement were taken at the point."""
    _check_noise(noise_std)
    mu, var = _unpack(dist)
    var = np.asarray(var, dtype=float)
    nv = noise_std ** 2
    return INV_2PI / nv * np.exp(-np.square(mu) / nv) * var * (var / (var + nv))


def chebyshev_bound(cdf_var, a):
    """Chebyshev bound on P(|prediction error| >= a); a diagnostic, capped at 1."""
    if not a > 0:
        raise ValueError(f"a must be > 0, got {a}")
    return np.minimum(1.0, np.asarray(cdf_var, dtype=float) / a ** 2)


def field_from_moments(mean, variance, noise_std, n_clamped=0) -> SatisfactionField:
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    return SatisfactionField(
        p_sat_hat=predicted_p_sat((mean, variance), noise_std),
        cdf_variance=cdf_variance((mean, variance), noise_std),
        mean=mean,
        variance=variance,
        noise_std=float(noise_std),
        n_clamped=n_clamped,
    )


def field_evaluate(model: GpModel, lattice) -> SatisfactionField:
    """Predicted satisfaction probability and CDF variance at every lattice point.

    Uses the model's (possibly estimated) noise level.
    """
    points = np.asarray(lattice, dtype=float)
    if points.size == 0:
        empty = np.empty(0)
        return SatisfactionField(empty, empty, empty, empty, model.noise_std)
    mean, var, n_clamped = predict_many(model, points)
    return field_from_moments(mean, var, model.noise_std, n_clamped)
