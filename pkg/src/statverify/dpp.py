"""k-DPP batch selection and the batch closed-loop driver.

Candidate points are drawn from the normalized acquisition scores, then an
L-ensemble ``L_ij = q_i q_j s_ij`` is formed with quality ``q_i = sqrt(P_V_i)``
and unit-variance SE-ARD similarity ``s_ij`` using the current GP
lengthscales.  A batch is an exact k-DPP sample from that ensemble.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import sampling
from .kernel import KernelHyperparams, kernel_matrix
from .sampling import LoopConfig, Strategy, closed_loop, top_m
from .systems import Lattice

logger = logging.getLogger(__name__)

EIG_CLAMP = 1e-8
RANK_TOL = 1e-12


class DppNumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class BatchConfig:
    batch_size: int
    candidate_count: int = 1000
    iterations: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.candidate_count < self.batch_size:
            raise ValueError("candidate_count must be >= batch_size")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class DppEnsemble:
    candidate_indices: np.ndarray
    l_matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self):
        return self.candidate_indices.size

    @property
    def rank(self) -> int:
        lam = self.eigenvalues
        if lam.size == 0 or lam.max() <= 0:
            return 0
        return int(np.count_nonzero(lam > RANK_TOL * lam.max()))


def score_distribution(scores) -> np.ndarray:
    """Normalize nonnegative scores into a probability vector.

    All-zero scores fall back to the uniform distribution.
    """
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("no scores")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite and nonnegative")
    z = s.sum()
    if z <= 0:
        logger.debug("all scores zero; using uniform distribution")
        return np.full(s.size, 1.0 / s.size)
    return s / z


def draw_candidates(p_v, m_t: int, rng) -> np.ndarray:
    """Draw ``m_t`` positions without replacement, proportional to ``p_v``.

    Uses exponential keys ``log(u) / p``: sorting by key gives the same law as
    successive draws renormalized after each removal, and the sort order is
    the draw order.  Zero-probability positions are never drawn, so fewer
    than ``m_t`` positions come back when the support is smaller.
    """
    if m_t < 1:
        raise ValueError("m_t must be >= 1")
    p = np.asarray(p_v, dtype=float)
    u = rng.random(p.size)
    keys = np.full(p.size, -np.inf)
    pos = p > 0
    with np.errstate(over="ignore", divide="ignore"):
        keys[pos] = np.log(u[pos]) / p[pos]
    order = np.argsort(-keys, kind="stable")
    return order[: min(m_t, int(np.count_nonzero(pos)))]


def build_ensemble(candidates, lattice, scores, kernel_h: KernelHyperparams) -> DppEnsemble:
    """L-ensemble over candidate lattice indices with quality ``sqrt(scores)``."""
    candidates = np.asarray(candidates, dtype=int)
    points = lattice.points if isinstance(lattice, Lattice) else np.asarray(lattice, dtype=float)
    s = np.asarray(scores, dtype=float)
    if s.shape != candidates.shape:
        raise ValueError("one score per candidate required")
    if np.any(s < 0):
        raise ValueError("candidate scores must be >= 0")
    q = np.sqrt(s)
    sim = kernel_matrix(points[candidates], KernelHyperparams(1.0, kernel_h.lengthscales))
    L = q[:, None] * sim * q[None, :]
    L = 0.5 * (L + L.T)
    try:
        lam, vecs = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise DppNumericalError(f"eigendecomposition failed: {exc}") from exc
    scale = max(float(np.abs(lam).max()) if lam.size else 0.0, 1e-300)
    if lam.size and lam.min() < -EIG_CLAMP * scale:
        logger.warning("L-ensemble eigenvalue %.3e below clamp tolerance", lam.min())
    lam = np.clip(lam, 0.0, None)
    return DppEnsemble(candidates, L, lam, vecs)


def elementary_symmetric(lam, k: int) -> np.ndarray:
    """``E[l, n]`` = l-th elementary symmetric polynomial of ``lam[:n]``."""
    n = len(lam)
    E = np.zeros((k + 1, n + 1))
    E[0, :] = 1.0
    for j in range(1, n + 1):
        E[1:, j] = E[1:, j - 1] + lam[j - 1] * E[:-1, j - 1]
    return E


def _sample_eigenvectors(lam, k, rng):
    E = elementary_symmetric(lam, k)
    chosen = []
    rem = k
    for n in range(len(lam), 0, -1):
        if rem == 0:
            break
        if n == rem:
            marg = 1.0
        else:
            marg = lam[n - 1] * E[rem - 1, n - 1] / E[rem, n]
        if rng.random() < marg:
            chosen.append(n - 1)
            rem -= 1
    return np.array(chosen[::-1], dtype=int)


def _sample_projection(V, rng):
    """Sample from the projection DPP spanned by the orthonormal columns of V."""
    V = V.copy()
    items = []
    while V.shape[1] > 0:
        p = np.sum(V * V, axis=1)
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        i = int(rng.choice(p.size, p=p))
        items.append(i)
        j = int(np.argmax(np.abs(V[i])))
        vj = V[:, j].copy()
        V = V - np.outer(vj, V[i] / vj[i])
        V = np.delete(V, j, axis=1)
        if V.shape[1]:
            V, _ = np.linalg.qr(V)
    return items


def sample_k_dpp(ensemble: DppEnsemble, k: int, rng) -> list:
    """Exact sample of ``k`` distinct candidate lattice indices from the k-DPP.

    If ``k`` exceeds the ensemble rank it is reduced to the rank.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    rank = ensemble.rank
    if k > rank:
        logger.warning("k=%d exceeds ensemble rank %d; sampling %d items", k, rank, rank)
        k = rank
    if k == 0:
        return []
    lam = ensemble.eigenvalues / ensemble.eigenvalues.max()
    lam = np.where(lam > RANK_TOL, lam, 0.0)
    sel = _sample_eigenvectors(lam, k, rng)
    items = _sample_projection(ensemble.eigenvectors[:, sel], rng)
    return [int(ensemble.candidate_indices[i]) for i in items]


def subset_probabilities(l_matrix, k: int) -> dict:
    """Exact k-DPP probabilities of every size-k subset by brute force (small L only)."""
    from itertools import combinations

    L = np.asarray(l_matrix, dtype=float)
    dets = {S: float(np.linalg.det(L[np.ix_(S, S)])) for S in combinations(range(len(L)), k)}
    z = sum(max(d, 0.0) for d in dets.values())
    return {S: max(d, 0.0) / z for S, d in dets.items()}


def choose_dpp_batch(model, field, pool, lattice, batch_size, candidate_count, rng) -> list:
    """One batch for the CDF-variance-reduction strategy.

    If the k-DPP yields fewer than ``batch_size`` items (rank-deficient
    ensemble) the batch is filled with the best remaining scores.
    """
    avail = pool.available
    scores = sampling.score(Strategy.CDF_VARIANCE_REDUCTION, field, pool, lattice)
    p_v = score_distribution(scores)
    cand_pos = draw_candidates(p_v, candidate_count, rng)
    ens = build_ensemble(avail[cand_pos], lattice, p_v[cand_pos], model.kernel_h)
    batch = sample_k_dpp(ens, min(batch_size, len(ens)), rng)
    if len(batch) < batch_size:
        taken = set(batch)
        for pos in top_m(scores, avail.size):
            if len(batch) == batch_size:
                break
            if int(avail[pos]) not in taken:
                batch.append(int(avail[pos]))
    return batch


def run_batch(config: LoopConfig, strategy, system, lattice: Lattice, seed: int,
              truth=None, executor=None):
    """Batch closed loop: ``config.iterations`` rounds of ``config.batch_size`` simulations.

    The proposed strategy draws each batch from a k-DPP; ``pdf_mean`` and
    ``pdf_variance`` take the top scores and ``random`` draws uniformly.
    """
    strategy = Strategy(strategy)
    BatchConfig(config.batch_size, config.candidate_count, max(config.iterations, 1))
    m = config.batch_size

    def chooser(model, f, pool, rng):
        if strategy is Strategy.CDF_VARIANCE_REDUCTION:
            return choose_dpp_batch(model, f, pool, lattice, m, config.candidate_count, rng)
        avail = pool.available
        if strategy is Strategy.RANDOM:
            return list(rng.choice(avail, size=min(m, avail.size), replace=False))
        return list(avail[top_m(sampling.score(strategy, f, pool, lattice), m)])

    return closed_loop(config, system, lattice, seed, chooser, strategy.value, truth, executor)
