"""Squared-exponential ARD covariance function.

All routines accept points as arrays of shape ``(n, p)`` (a single point may
be passed as a length-``p`` vector) and are pure functions of their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelHyperparams:
    """Signal variance and per-dimension lengthscales of the SE-ARD kernel."""

    signal_variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        if not self.signal_variance > 0:
            raise ValueError(f"signal_variance must be > 0, got {self.signal_variance}")
        if ls.ndim != 1 or ls.size == 0 or not np.all(ls > 0):
            raise ValueError(f"lengthscales must be a nonempty vector of positive reals, got {ls}")

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    def to_log(self) -> np.ndarray:
        """Return ``[log sf2, log l_1, ..., log l_p]``."""
        return np.concatenate([[np.log(self.signal_variance)], np.log(self.lengthscales)])

    @classmethod
    def from_log(cls, theta) -> "KernelHyperparams":
        theta = np.asarray(theta, dtype=float)
        return cls(float(np.exp(theta[0])), np.exp(theta[1:]))


def _as_points(x, dim: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1) if x.size else x.reshape(0, dim)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"{name} has shape {x.shape}, expected (n, {dim})")
    return x


def _scaled_sqdist(a: np.ndarray, b: np.ndarray, h: KernelHyperparams) -> np.ndarray:
    # Per-dimension accumulation; no |a|^2 + |b|^2 - 2ab expansion, so d(a, a) is exactly 0.
    r2 = np.zeros((a.shape[0], b.shape[0]))
    for d in range(h.dim):
        diff = (a[:, d, None] - b[None, :, d]) / h.lengthscales[d]
        r2 += diff * diff
    return r2


def kernel_eval(a, b, h: KernelHyperparams) -> float:
    """Evaluate the kernel between two single points."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != h.dim or b.size != h.dim:
        raise ValueError(f"dimension mismatch: {a.size}, {b.size} vs {h.dim} lengthscales")
    z = (a - b) / h.lengthscales
    return h.signal_variance * float(np.exp(-0.5 * np.dot(z, z)))


def kernel_cross(a, b, h: KernelHyperparams) -> np.ndarray:
    """Kernel matrix between two point sets, shape ``(len(a), len(b))``."""
    a = _as_points(a, h.dim, "a")
    b = _as_points(b, h.dim, "b")
    return h.signal_variance * np.exp(-0.5 * _scaled_sqdist(a, b, h))


def kernel_matrix(points, h: KernelHyperparams) -> np.ndarray:
    """Symmetric kernel matrix of ``points`` with itself."""
    x = _as_points(points, h.dim, "points")
    K = h.signal_variance * np.exp(-0.5 * _scaled_sqdist(x, x, h))
    # exact symmetry despite floating-point evaluation order
    return 0.5 * (K + K.T)


def cross_vector(query, points, h: KernelHyperparams) -> np.ndarray:
    """Vector of ``kernel_eval(query, points_i)`` over all points."""
    q = np.asarray(query, dtype=float).ravel()
    if q.size != h.dim:
        raise ValueError(f"query has dimension {q.size}, expected {h.dim}")
    return kernel_cross(q[None, :], points, h)[0]


def kernel_grad(a, b, h: KernelHyperparams) -> np.ndarray:
    """Gradient of ``kernel_eval(a, b, h)`` w.r.t. ``[log sf2, log l_1..l_p]``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    k = kernel_eval(a, b, h)
    z = (a - b) / h.lengthscales
    return np.concatenate([[k], k * z * z])


def kernel_matrix_grads(points, h: KernelHyperparams) -> tuple[np.ndarray, list[np.ndarray]]:
    """Kernel matrix plus its derivatives w.r.t. each log-hyperparameter.

    Returns ``(K, [dK/dlog sf2, dK/dlog l_1, ...])``.
    """
    x = _as_points(points, h.dim, "points")
    K = kernel_matrix(x, h)
    grads = [K]
    for d in range(h.dim):
        diff = (x[:, d, None] - x[None, :, d]) / h.lengthscales[d]
        grads.append(K * diff * diff)
    return K, grads
