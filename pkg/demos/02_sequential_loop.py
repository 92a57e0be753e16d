"""Sequential closed-loop verification against open-loop random sampling.

Both runs share the initial design (same seed).  Each iteration picks the
lattice point with the largest expected CDF-variance reduction, simulates it
once, and refits the GP.
"""
import logging

import numpy as np

from statverify import sampling, systems
from statverify.sampling import LoopConfig, MleSettings

logging.basicConfig(level=logging.WARNING)

system = systems.AnalyticField(theta_bounds=[(-5, 5), (-5, 5)])
lattice = systems.build_lattice(system.theta_bounds, 41)
truth = systems.ground_truth(system, lattice.points)
config = LoopConfig(n_initial=30, iterations=70, mle=MleSettings(restarts=4))

runs = {name: sampling.run_sequential(config, system, lattice, seed=3, strategy=name, truth=truth)
        for name in ("cdf_variance_reduction", "random")}

print("iter  n_train   proposed   random")
for a, b in zip(*(r.records for r in runs.values())):
    if a.iteration % 10 == 0:
        print(f"{a.iteration:4d}  {a.n_train:7d}   {a.mae:.4f}     {b.mae:.4f}")

prop = runs["cdf_variance_reduction"].records[-1]
print(f"\nfinal MAE {prop.mae:.4f}; dropping the top 5% CDF-variance points gives "
      f"{prop.mae_drop05:.4f}, top 10% gives {prop.mae_drop10:.4f}")

chosen = np.array([r.selected[0] for r in runs["cdf_variance_reduction"].records[1:]])
near = np.abs(system.latent_mean(lattice.points[chosen])) < 3 * system.noise_std
print(f"{near.mean():.0%} of the adaptively chosen points lie within 3 noise std of the boundary")
