"""STL robustness of a stochastic damped oscillator.

The requirement G[0,10](1 - abs(x) >= 0) asks the position to stay within
one unit for ten seconds.  Stiff, well-damped settings satisfy it almost
surely; soft, lightly damped ones rarely do.
"""
import numpy as np

from statverify import stl, systems

system = systems.LinearSde()
print("spec:", stl.to_text(system.spec))
print("Euler-Maruyama step", system.dt, "for", system.n_steps, "steps")

for theta in ([9.0, 3.0], [4.0, 1.0], [2.0, 0.5], [1.0, 0.1]):
    ys = [systems.simulate_measure(system, theta, seed).y for seed in range(200)]
    p = systems.monte_carlo_p_sat(system, np.array([theta]), 2000, seed=1)[0]
    print(f"stiffness {theta[0]:3.1f} damping {theta[1]:3.1f}: "
          f"robustness mean {np.mean(ys):+.3f} sd {np.std(ys):.3f}, p_sat ~ {p:.3f}")

# Custom specs can reference x, v and their initial values x0, v0
spec = stl.parse("F[0,5](0.1 - abs(v) >= 0) and G[0,10](2 - abs(x - x0) >= 0)")
states = system.integrate([4.0, 1.0], np.random.default_rng(0).standard_normal((system.n_steps, 2)))
print("settles and stays bounded:", round(stl.robustness(spec, system.trajectory(states)), 4))
