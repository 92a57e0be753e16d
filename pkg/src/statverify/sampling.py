"""Acquisition scores, the sample pool, error metrics and the closed-loop driver.

Four strategies are supported:

* ``cdf_variance_reduction`` scores a point by the expected drop in
  approximate CDF variance from one more measurement there;
* ``pdf_mean`` prefers points whose posterior mean is closest to zero;
* ``pdf_variance`` prefers points with large posterior variance;
* ``random`` is open-loop uniform sampling.

Higher scores are better for every strategy.
"""
from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gp, verify
from .kernel import KernelHyperparams
from .systems import Lattice, measure_indices

logger = logging.getLogger(__name__)

STREAM_INITIAL, STREAM_SELECT, STREAM_MLE = 0, 1, 2


class Strategy(str, enum.Enum):
    CDF_VARIANCE_REDUCTION = "cdf_variance_reduction"
    PDF_MEAN = "pdf_mean"
    PDF_VARIANCE = "pdf_variance"
    RANDOM = "random"


PROPOSED = Strategy.CDF_VARIANCE_REDUCTION


class SamplePool:
    """Partition of lattice indices into used (training) and available points."""

    def __init__(self, size: int, used=()):
        self._used = np.zeros(size, dtype=bool)
        self.take(used)

    def __len__(self):
        return self._used.size

    @property
    def available(self) -> np.ndarray:
        return np.flatnonzero(~self._used)

    @property
    def used(self) -> np.ndarray:
        return np.flatnonzero(self._used)

    @property
    def n_available(self) -> int:
        return int(self._used.size - np.count_nonzero(self._used))

    def take(self, indices):
        indices = np.asarray(indices, dtype=int).ravel()
        if indices.size and (np.any(self._used[indices]) or np.unique(indices).size != indices.size):
            raise ValueError("index already used or repeated")
        self._used[indices] = True


def _field_view(field_or_model, lattice):
    """Accept a precomputed SatisfactionField or a model to evaluate."""
    if isinstance(field_or_model, verify.SatisfactionField):
        return field_or_model
    points = lattice.points if isinstance(lattice, Lattice) else lattice
    return verify.field_evaluate(field_or_model, points)


def score(strategy, model, pool: SamplePool, lattice) -> np.ndarray:
    """Scores over ``pool.available`` (in index order); higher is better.

    ``model`` may be a fitted GpModel or a SatisfactionField already
    evaluated on the whole lattice.
    """
    strategy = Strategy(strategy)
    avail = pool.available
    if avail.size == 0:
        raise ValueError("sample pool is empty")
    if strategy is Strategy.RANDOM:
        return np.ones(avail.size)
    if strategy is not Strategy.CDF_VARIANCE_REDUCTION and isinstance(model, gp.GpModel):
        # moments only, so noise-free models are fine here
        points = lattice.points if isinstance(lattice, Lattice) else np.asarray(lattice)
        mu, var, _ = gp.predict_many(model, points[avail])
    else:
        f = _field_view(model, lattice)
        mu, var = f.mean[avail], f.variance[avail]
    if strategy is Strategy.PDF_MEAN:
        return -np.abs(mu)
    if strategy is Strategy.PDF_VARIANCE:
        return var.copy()
    return verify.variance_reduction((mu, var), f.noise_std)


def argmax_lowest(scores) -> int:
    """Position of the maximum score; ties go to the lowest position."""
    return int(np.argmax(scores))


def top_m(scores, m: int) -> np.ndarray:
    """Positions of the ``m`` highest scores, ties broken by lower position."""
    order = np.argsort(-np.asarray(scores), kind="stable")
    return order[:m]


def select_next(strategy, model, pool: SamplePool, lattice, rng) -> int:
    """Lattice index of the next simulation."""
    strategy = Strategy(strategy)
    avail = pool.available
    if avail.size == 0:
        raise ValueError("sample pool is empty")
    if strategy is Strategy.RANDOM:
        return int(avail[rng.integers(avail.size)])
    return int(avail[argmax_lowest(score(strategy, model, pool, lattice))])


def mae(estimates, truth) -> float:
    """Mean absolute error between predicted and true satisfaction probabilities."""
    p_hat = _p_hat(estimates)
    p_true = truth.p_sat_true if isinstance(truth, verify.GroundTruthField) else np.asarray(truth)
    if p_hat.shape != p_true.shape:
        raise ValueError(f"length mismatch: {p_hat.size} estimates vs {p_true.size} truth values")
    return float(np.mean(np.abs(p_hat - p_true)))


def _p_hat(estimates):
    if isinstance(estimates, verify.SatisfactionField):
        return estimates.p_sat_hat
    return np.array([e.p_sat_hat for e in estimates], dtype=float)


def _cdf_var(estimates):
    if isinstance(estimates, verify.SatisfactionField):
        return estimates.cdf_variance
    return np.array([e.cdf_variance for e in estimates], dtype=float)


def variance_filtered_mae(estimates, truth, drop_fraction: float) -> float:
    """MAE after discarding the ``ceil(drop_fraction * n)`` highest-CDF-variance points.

    Among equal variances the lower index is dropped first.
    """
    if not 0 <= drop_fraction < 1:
        raise ValueError("drop_fraction must be in [0, 1)")
    p_hat = _p_hat(estimates)
    p_true = truth.p_sat_true if isinstance(truth, verify.GroundTruthField) else np.asarray(truth)
    if p_hat.shape != p_true.shape:
        raise ValueError("length mismatch")
    n = p_hat.size
    k = math.ceil(drop_fraction * n - 1e-9)
    keep = np.ones(n, dtype=bool)
    if k:
        keep[top_m(_cdf_var(estimates), k)] = False
    return float(np.mean(np.abs(p_hat[keep] - p_true[keep])))


# -- closed loop --------------------------------------------------------------

@dataclass(frozen=True)
class MleSettings:
    restarts: int = 8
    refit_restarts: int = 1
    learn_noise: bool = True
    refit: str = "every"  # or "freeze"
    noise_std: float | None = None  # initial (or fixed) noise; None derives it from the data
    maxiter: int = 200

    def __post_init__(self):
        if self.refit not in ("every", "freeze"):
            raise ValueError(f"refit must be 'every' or 'freeze', got {self.refit!r}")
        if self.restarts < 1 or self.refit_restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class LoopConfig:
    n_initial: int
    iterations: int
    batch_size: int = 1
    candidate_count: int = 1000
    mle: MleSettings = field(default_factory=MleSettings)


@dataclass
class IterationRecord:
    iteration: int
    n_train: int
    selected: list
    measurements: list
    hyperparams: dict
    mae: float
    mae_drop05: float
    mae_drop10: float
    n_clamped: int = 0
    seconds: float = 0.0


@dataclass
class RunTrace:
    strategy: str
    seed: int
    records: list = field(default_factory=list)
    initial_indices: list = field(default_factory=list)
    final_field: verify.SatisfactionField | None = None
    error: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final_mae(self) -> float:
        return self.records[-1].mae if self.records else float("nan")


def initial_design(n_lattice: int, n_initial: int, seed: int) -> np.ndarray:
    """Uniform random lattice indices without replacement, shared by all strategies."""
    rng = np.random.default_rng([seed, STREAM_INITIAL])
    return rng.choice(n_lattice, size=n_initial, replace=False)


def _initial_hyperparams(train: gp.TrainingSet, mle: MleSettings):
    y = train.measurements
    v = float(np.var(y)) if len(y) > 1 else 0.0
    v = v if v > 1e-12 else 1.0
    span = np.ptp(train.params, axis=0)
    span = np.where(span > 0, span, 1.0)
    kernel_h = KernelHyperparams(v, 0.2 * span)
    noise = mle.noise_std if mle.noise_std is not None else 0.1 * np.sqrt(v)
    return kernel_h, gp.LikelihoodHyperparams(noise, mle.learn_noise)


def _hyper_dict(model: gp.GpModel) -> dict:
    return {
        "signal_variance": model.kernel_h.signal_variance,
        "lengthscales": [float(x) for x in model.kernel_h.lengthscales],
        "noise_std": model.noise_std,
        "lml": model.info.get("lml"),
    }


Chooser = Callable[[gp.GpModel, verify.SatisfactionField, SamplePool, np.random.Generator], list]


def closed_loop(config: LoopConfig, system, lattice: Lattice, seed: int, chooser: Chooser,
                strategy: str, truth: verify.GroundTruthField | None = None,
                executor=None) -> RunTrace:
    """Generic select-simulate-retrain loop shared by the sequential and batch drivers.

    ``chooser(model, field, pool, rng)`` returns the lattice indices to
    simulate next.  On failure the trace gathered so far is returned with
    ``error`` set.
    """
    n = len(lattice)
    if config.n_initial < 2:
        raise ValueError("n_initial must be >= 2")
    if config.iterations < 0:
        raise ValueError("iterations must be >= 0")
    if config.n_initial + config.iterations * config.batch_size > n:
        raise ValueError("budget exceeds lattice size")

    select_rng = np.random.default_rng([seed, STREAM_SELECT])
    mle_rng = np.random.default_rng([seed, STREAM_MLE])
    trace = RunTrace(strategy=str(strategy), seed=seed)
    trace.meta["dt"] = getattr(system, "dt", None)

    def evaluate(model, iteration, selected, ys, t0):
        f = verify.field_evaluate(model, lattice.points)
        if truth is not None:
            errs = (mae(f, truth), variance_filtered_mae(f, truth, 0.05),
                    variance_filtered_mae(f, truth, 0.10))
        else:
            errs = (float("nan"),) * 3
        trace.records.append(IterationRecord(
            iteration, len(model.train), [int(i) for i in selected], [float(v) for v in ys],
            _hyper_dict(model), *errs, n_clamped=f.n_clamped, seconds=time.perf_counter() - t0))
        trace.final_field = f
        return f

    t0 = time.perf_counter()
    init = initial_design(n, config.n_initial, seed)
    trace.initial_indices = [int(i) for i in init]
    pool = SamplePool(n, init)
    try:
        y0 = measure_indices(system, lattice, init, seed, executor=executor)
        train = gp.TrainingSet(lattice.points[init], y0)
        kh, lh = _initial_hyperparams(train, config.mle)
        model = gp.fit_mle(train, kh, lh, config.mle.restarts, mle_rng, config.mle.maxiter)
        f = evaluate(model, 0, init, y0, t0)
        for it in range(1, config.iterations + 1):
            t0 = time.perf_counter()
            chosen = [int(i) for i in chooser(model, f, pool, select_rng)]
            pool.take(chosen)
            ys = measure_indices(system, lattice, chosen, seed, executor=executor)
            train = train.append(lattice.points[chosen], ys)
            if config.mle.refit == "every":
                # the fresh data-scaled start rescues refits whose warm start sits in a bad basin
                model = gp.fit_mle(train, model.kernel_h, model.lik_h, config.mle.refit_restarts,
                                   mle_rng, config.mle.maxiter,
                                   extra_starts=[_initial_hyperparams(train, config.mle)])
            else:
                model = gp.fit(train, model.kernel_h, model.lik_h)
            f = evaluate(model, it, chosen, ys, t0)
    except (gp.GpNumericalError, FloatingPointError, ValueError) as exc:
        logger.warning("run %s seed %s aborted: %s", strategy, seed, exc)
        trace.error = f"{type(exc).__name__}: {exc}"
    return trace


def run_sequential(config: LoopConfig, system, lattice: Lattice, seed: int, strategy=PROPOSED,
                   truth: verify.GroundTruthField | None = None, executor=None) -> RunTrace:
    """One simulation per iteration at the best-scoring available point."""
    strategy = Strategy(strategy)

    def chooser(model, f, pool, rng):
        return [select_next(strategy, f, pool, lattice, rng)]

    cfg = LoopConfig(config.n_initial, config.iterations, 1, config.candidate_count, config.mle)
    return closed_loop(cfg, system, lattice, seed, chooser, strategy.value, truth, executor)
