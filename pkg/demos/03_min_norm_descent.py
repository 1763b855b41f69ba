"""The two-task min-norm geometry, then full multi-objective descent on a
pair of quadratic bowls.

The closed form picks the convex combination of the two task gradients
with the smallest norm; following it never increases either loss, and the
iteration stops exactly where no common descent direction exists (the
Pareto-stationary segment between the two bowl centers).
"""

import numpy as np

from vulnhunter.moo import Optimizer, QuadraticPair, TrainStepConfig, mgda_step, min_norm_solver

print("min-norm weights in three characteristic cases:")
cases = [
    ("identical gradients", np.array([1.0, 1.0]), np.array([1.0, 1.0])),
    ("orthogonal, equal norm", np.array([1.0, 0.0]), np.array([0.0, 1.0])),
    ("collinear, 10x norm gap", np.array([1.0, 0.0]), np.array([10.0, 0.0])),
]
for label, g1, g2 in cases:
    w = min_norm_solver(g1, g2)
    print(f"  {label:28s} alpha = {w.alpha}")

prob = QuadraticPair(
    a_mat=np.diag([1.0, 3.0]),
    b_mat=np.diag([2.0, 1.0]),
    c1=np.array([1.0, 0.0]),
    c2=np.array([-1.0, 1.0]),
    theta0=np.array([4.0, -3.0]),
)
eta = 0.9 * prob.sgd_eta_bound()
cfg = TrainStepConfig(eta=eta, optimizer="sgd")
opt = Optimizer(cfg)

print(f"\ndescending both bowls with eta={eta:.3f} "
      f"(analytic bound {prob.sgd_eta_bound():.3f}):")
print(f"{'step':>4} {'L1':>10} {'L2':>10} {'alpha1':>8} {'|d|':>12}")
for i in range(10_000):
    rep = mgda_step(prob, None, cfg, opt, i)
    if i < 6 or rep.direction_norm < 1e-6:
        print(f"{i:>4} {rep.losses[0]:>10.5f} {rep.losses[1]:>10.5f} "
              f"{rep.alpha[0]:>8.4f} {rep.direction_norm:>12.3e}")
    if rep.direction_norm < 1e-6:
        break

_, g1, g2, _, _ = prob.losses_and_grads(None)
a = min_norm_solver(g1, g2).alpha[0]
print(f"\nPareto residual |a*g1 + (1-a)*g2| = "
      f"{np.linalg.norm(a * g1 + (1 - a) * g2):.2e}")
print(f"final point {prob.theta} lies between the bowl centers {prob.c1} and {prob.c2}")
