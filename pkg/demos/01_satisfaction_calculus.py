"""From noisy robustness samples to a satisfaction-probability estimate.

A 1-D toy system returns robustness ybar(theta) + N(0, eps^2).  We fit a GP
to a handful of samples and turn its posterior into p_sat estimates, their
approximate CDF variance and the expected variance drop from one more
simulation at each point.
"""
import numpy as np

from statverify import gp, verify
from statverify.kernel import KernelHyperparams

rng = np.random.default_rng(0)
eps = 0.1


def ybar(theta):
    return np.sin(theta) - 0.2


# A small training set: one stochastic trajectory per location
X = rng.uniform(0, 6, size=(12, 1))
y = ybar(X[:, 0]) + eps * rng.standard_normal(12)

# Hyperparameters by maximum likelihood, noise included
init_k = KernelHyperparams(float(np.var(y)), [1.0])
model = gp.fit_mle(gp.TrainingSet(X, y), init_k, gp.LikelihoodHyperparams(0.2), restarts=4,
                   rng=np.random.default_rng(1))
print("fitted signal variance %.3f, lengthscale %.3f, noise std %.4f (true %.2f)"
      % (model.kernel_h.signal_variance, model.kernel_h.lengthscales[0], model.noise_std, eps))

grid = np.linspace(0, 6, 13)[:, None]
field = verify.field_evaluate(model, grid)
truth = verify.true_p_sat(ybar(grid[:, 0]), eps)
red = verify.variance_reduction((field.mean, field.variance), field.noise_std)

print("\n theta   p_sat   p_hat   cdf_var   var_red")
for th, p, ph, v, r in zip(grid[:, 0], truth, field.p_sat_hat, field.cdf_variance, red):
    print(f"{th:6.2f}  {p:6.3f}  {ph:6.3f}  {v:8.4f}  {r:8.4f}")

# The CDF variance is largest near the satisfaction boundary (ybar = 0), which
# is where the next simulation is most useful.
best = int(np.argmax(red))
print(f"\nnext simulation at theta = {grid[best, 0]:.2f}; ybar there = {ybar(grid[best, 0]):+.3f}")

# Chebyshev: confidence that |p_hat - E[p_hat]| < 0.1 at that point
print("P(|error| >= 0.1) <= %.3f" % verify.chebyshev_bound(field.cdf_variance[best], 0.1))
