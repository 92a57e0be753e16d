"""Gaussian-process regression with a Gaussian likelihood.

The model is zero-mean with an SE-ARD prior covariance.  ``fit`` caches the
Cholesky factor of ``K + noise_std**2 I``; ``predict`` and ``predict_many``
reuse it.  ``fit_mle`` estimates hyperparameters by multi-start maximization
of the log marginal likelihood in log-space.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .kernel import KernelHyperparams, kernel_cross, kernel_matrix, kernel_matrix_grads

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
JITTER = 1e-10
PREDICT_CHUNK = 4096


class GpNumericalError(RuntimeError):
    """Raised when the covariance matrix cannot be factorized."""

    def __init__(self, message, kernel_h=None, lik_h=None, diagnostics=None):
        super().__init__(message)
        self.kernel_h = kernel_h
        self.lik_h = lik_h
        self.diagnostics = diagnostics or {}


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TrainingSet:
    """Parameter settings ``params`` (N, p) paired with measurements ``y`` (N,)."""

    params: np.ndarray
    measurements: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.params, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.measurements, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("TrainingSet needs at least one parameter vector")
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} params but {y.size} measurements")
        if not np.all(np.isfinite(y)):
            raise ValueError("measurements must be finite")
        object.__setattr__(self, "params", _readonly(X))
        object.__setattr__(self, "measurements", _readonly(y))

    def __len__(self):
        return self.measurements.size

    @property
    def dim(self) -> int:
        return self.params.shape[1]

    def append(self, params, measurements) -> "TrainingSet":
        X = np.asarray(params, dtype=float).reshape(-1, self.dim)
        return TrainingSet(np.vstack([self.params, X]),
                           np.concatenate([self.measurements, np.ravel(measurements)]))


@dataclass(frozen=True)
class LikelihoodHyperparams:
    """Homoskedastic measurement noise; ``learn_noise`` lets MLE estimate it.

    ``noise_std == 0`` is accepted for noise-free interpolation.
    """

    noise_std: float
    learn_noise: bool = True

    def __post_init__(self):
        object.__setattr__(self, "noise_std", float(self.noise_std))
        if not self.noise_std >= 0 or not np.isfinite(self.noise_std):
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")


@dataclass(frozen=True)
class PredictiveDist:
    mean: float
    variance: float


@dataclass(frozen=True)
class GpModel:
    train: TrainingSet
    kernel_h: KernelHyperparams
    lik_h: LikelihoodHyperparams
    chol_factor: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0
    info: dict = field(default_factory=dict, compare=False)

    @property
    def noise_std(self) -> float:
        return self.lik_h.noise_std


def _factorize(X, kernel_h, lik_h):
    K = kernel_matrix(X, kernel_h)
    A = K + lik_h.noise_std ** 2 * np.eye(len(K))
    try:
        return A, linalg.cholesky(A, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        pass
    jitter = JITTER * kernel_h.signal_variance
    A = A + jitter * np.eye(len(K))
    try:
        return A, linalg.cholesky(A, lower=True, check_finite=False), jitter
    except linalg.LinAlgError as exc:
        raise GpNumericalError(f"covariance not positive definite after jitter {jitter:g}",
                               kernel_h, lik_h) from exc


def fit(train: TrainingSet, kernel_h: KernelHyperparams, lik_h: LikelihoodHyperparams) -> GpModel:
    """Factorize the training covariance for fixed hyperparameters."""
    if train.dim != kernel_h.dim:
        raise ValueError(f"training points have dimension {train.dim}, kernel has {kernel_h.dim}")
    _, L, jitter = _factorize(train.params, kernel_h, lik_h)
    alpha = linalg.cho_solve((L, True), train.measurements, check_finite=False)
    return GpModel(train, kernel_h, lik_h, _readonly(L), _readonly(alpha), jitter)


def predict_many(model: GpModel, queries, chunk: int = PREDICT_CHUNK):
    """Posterior mean and variance at many query points.

    Returns ``(mean, variance, n_clamped)`` where ``n_clamped`` counts
    negative round-off variances set to zero.
    """
    Q = np.asarray(queries, dtype=float)
    if Q.ndim == 1:
        Q = Q.reshape(1, -1)
    if Q.shape[1] != model.kernel_h.dim:
        raise ValueError(f"queries have dimension {Q.shape[1]}, expected {model.kernel_h.dim}")
    n = Q.shape[0]
    mean = np.empty(n)
    var = np.empty(n)
    sf2 = model.kernel_h.signal_variance
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        Ks = kernel_cross(model.train.params, Q[start:stop], model.kernel_h)  # (N, m)
        mean[start:stop] = Ks.T @ model.alpha
        v = linalg.solve_triangular(model.chol_factor, Ks, lower=True, check_finite=False)
        var[start:stop] = sf2 - np.einsum("ij,ij->j", v, v)
    neg = var < 0
    n_clamped = int(np.count_nonzero(neg))
    if n_clamped:
        logger.debug("clamped %d negative posterior variances (min %.3e)", n_clamped, var.min())
        var[neg] = 0.0
    return mean, var, n_clamped


def predict(model: GpModel, query) -> PredictiveDist:
    mean, var, _ = predict_many(model, np.asarray(query, dtype=float).reshape(1, -1))
    return PredictiveDist(float(mean[0]), float(var[0]))


def _log_params(kernel_h, lik_h):
    theta = kernel_h.to_log()
    if lik_h.learn_noise:
        theta = np.append(theta, np.log(lik_h.noise_std))
    return theta


def _unpack(theta, lik_h):
    p = len(theta) - (2 if lik_h.learn_noise else 1)
    kernel_h = KernelHyperparams.from_log(theta[: p + 1])
    if lik_h.learn_noise:
        lik_h = LikelihoodHyperparams(float(np.exp(theta[-1])), True)
    return kernel_h, lik_h


def _lml_and_grad(X, y, kernel_h, lik_h):
    K, dKs = kernel_matrix_grads(X, kernel_h)
    n = len(y)
    noise_var = lik_h.noise_std ** 2
    A = K + noise_var * np.eye(n)
    try:
        L = linalg.cholesky(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        A = A + JITTER * kernel_h.signal_variance * np.eye(n)
        L = linalg.cholesky(A, lower=True, check_finite=False)
    alpha = linalg.cho_solve((L, True), y, check_finite=False)
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI
    Ainv = linalg.cho_solve((L, True), np.eye(n), check_finite=False)
    W = np.outer(alpha, alpha) - Ainv
    grad = [0.5 * np.sum(W * dK) for dK in dKs]
    if lik_h.learn_noise:
        # dA/dlog(noise_std) = 2 noise_var I
        grad.append(noise_var * np.trace(W))
    return float(lml), np.array(grad)


def log_marginal_likelihood(model: GpModel):
    """Log marginal likelihood and its gradient w.r.t. the log-hyperparameters.

    The gradient is ordered ``[log sf2, log l_1..l_p]`` followed by
    ``log noise_std`` when the noise is learned.
    """
    return _lml_and_grad(model.train.params, model.train.measurements, model.kernel_h, model.lik_h)


def _default_boxes(train: TrainingSet, lik_h: LikelihoodHyperparams):
    """(bounds, restart sampling box) in log-space, scaled to the data."""
    X, y = train.params, train.measurements
    span = np.ptp(X, axis=0)
    span = np.where(span > 0, span, 1.0)
    v = float(np.var(y)) if len(y) > 1 else 0.0
    v = v if v > 1e-12 else 1.0
    s = np.sqrt(v)
    bounds = [(np.log(1e-4 * v), np.log(1e4 * v))]
    bounds += [(np.log(1e-3 * sp), np.log(1e2 * sp)) for sp in span]
    box = [(np.log(0.1 * v), np.log(10 * v))]
    box += [(np.log(0.02 * sp), np.log(sp)) for sp in span]
    if lik_h.learn_noise:
        bounds.append((np.log(1e-4 * s), np.log(10 * s)))
        box.append((np.log(0.01 * s), np.log(0.5 * s)))
    return bounds, box


def fit_mle(train: TrainingSet, init: KernelHyperparams, lik_init: LikelihoodHyperparams,
            restarts: int = 8, rng=None, maxiter: int = 200, extra_starts=()) -> GpModel:
    """Multi-start L-BFGS-B maximization of the log marginal likelihood.

    The first start is ``init``/``lik_init``; the remaining ``restarts - 1``
    starts are drawn log-uniformly from a data-scaled box using ``rng``.
    ``extra_starts`` holds further ``(KernelHyperparams, LikelihoodHyperparams)``
    starting points tried after those.  With ``lik_init.learn_noise`` false
    the noise is held at its input value.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if lik_init.learn_noise and not lik_init.noise_std > 0:
        raise ValueError("a learned noise_std needs a positive initial value")
    rng = np.random.default_rng(rng)
    X, y = train.params, train.measurements
    bounds, box = _default_boxes(train, lik_init)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def objective(theta):
        kh, lh = _unpack(theta, lik_init)
        try:
            lml, grad = _lml_and_grad(X, y, kh, lh)
        except (linalg.LinAlgError, ValueError):
            return 1e25, np.zeros_like(theta)
        if not np.isfinite(lml):
            return 1e25, np.zeros_like(theta)
        return -lml, -grad

    starts = [np.clip(_log_params(init, lik_init), lo, hi)]
    for _ in range(restarts - 1):
        starts.append(np.array([rng.uniform(a, b) for a, b in box]))
    for kh, lh in extra_starts:
        lh = LikelihoodHyperparams(lh.noise_std, lik_init.learn_noise)
        starts.append(np.clip(_log_params(kh, lh), lo, hi))

    best = None
    failures = []
    for theta0 in starts:
        try:
            res = optimize.minimize(objective, theta0, jac=True, method="L-BFGS-B",
                                    bounds=bounds, options={"maxiter": maxiter})
        except (ValueError, FloatingPointError) as exc:
            failures.append(str(exc))
            continue
        if not np.isfinite(res.fun) or res.fun >= 1e25:
            failures.append(f"start {theta0} failed: {res.message}")
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise GpNumericalError("all MLE restarts failed", init, lik_init,
                               {"failures": failures, "restarts": restarts})
    kernel_h, lik_h = _unpack(best.x, lik_init)
    if not lik_init.learn_noise:
        lik_h = lik_init
    model = fit(train, kernel_h, lik_h)
    model.info.update(lml=-float(best.fun), n_failed=len(failures), restarts=len(starts),
                      nit=int(best.nit))
    return model
