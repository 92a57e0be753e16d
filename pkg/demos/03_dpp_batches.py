"""Diverse batches from a k-DPP.

When the scores form a single broad peak, the top M scores are neighbouring
lattice points that carry nearly the same information.  The k-DPP keeps the
quality weighting but penalizes similar points, so a batch spreads over the
high-scoring region instead.
"""
import numpy as np

from statverify import dpp, sampling, systems
from statverify.kernel import KernelHyperparams

lattice = systems.build_lattice([(-3, 3), (-3, 3)], 61)
pts = lattice.points
scores = np.exp(-np.sum((pts - [1.0, -0.5]) ** 2, axis=1) / 1.5)  # one broad bump

p_v = dpp.score_distribution(scores)
rng = np.random.default_rng(4)
cand = dpp.draw_candidates(p_v, 300, rng)
ens = dpp.build_ensemble(cand, lattice, p_v[cand], KernelHyperparams(1.0, [0.5, 0.5]))
batch = dpp.sample_k_dpp(ens, 8, rng)
greedy = sampling.top_m(scores, 8)


def min_spacing(idx):
    d = np.linalg.norm(pts[idx][:, None] - pts[idx][None], axis=-1)
    return d[np.triu_indices(len(idx), 1)].min()


def spread(idx):
    return np.linalg.norm(pts[idx] - pts[idx].mean(axis=0), axis=1).mean()


for name, idx in (("top-8 scores", greedy), ("k-DPP batch", batch)):
    print(f"{name:13s} min spacing {min_spacing(idx):.2f}, mean distance to centroid "
          f"{spread(idx):.2f}, mean score {scores[idx].mean():.2f}")
print(f"ensemble rank {ens.rank} of {len(ens)} candidates")
