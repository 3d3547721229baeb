"""
The online localization benchmark.

Sensors scattered in [-10, 10]^2 measure noisy squared distances to a slowly
drifting target and jointly search for it inside the box [-5, 5]^2, subject to
random halfspaces that keep the origin strictly feasible.

Run: python3 demos/01_localization_problem.py
"""

import numpy as np

from dpdcc.problem import (
    LocalizationProblem,
    estimate_bounds,
    generate_instance,
    localization_loss,
    localization_loss_gradient,
)

inst = generate_instance(n=10, seed=0, b=0.01)
prob = LocalizationProblem(inst)

print("sensor positions (first 3):")
print(inst.sensors[:3])
for t in (1, 2, 50, 500):
    print(f"target at round {t:4d}: {inst.target(t)}")

# The gradient has a closed form; compare it with central differences.
x, h = np.array([1.5, -2.0]), 1e-5
fd = [(localization_loss(inst, 3, 10, x + h * e) - localization_loss(inst, 3, 10, x - h * e)) / (2 * h)
      for e in np.eye(2)]
print("analytic gradient", localization_loss_gradient(inst, 3, 10, x))
print("finite difference", np.array(fd))

# With b > 0 the origin satisfies every constraint with margin b.
g, _ = prob.local_constraints(1, np.zeros((10, 2)))
print("largest constraint value at the origin, round 1:", g.max())

bounds = estimate_bounds(prob, rounds=200)
print(f"gradient bound {bounds.G1:.1f}, constraint bound {bounds.G2:.3f}, smoothness {bounds.L:.1f}")
print("admissible gamma0 <=", 1 / (4 * bounds.G2**2))
