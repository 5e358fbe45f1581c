"""Anatomy of the fair failover solver.

The split minimizes  sum_i [ -w_i ln b_i + k1 d_i b_i + k2 q_i(b_i) ]
subject to the betas summing to the affected vehicle count.  The three
terms pull in different directions:

* the log utility spreads load toward candidates with free capacity,
* the linear term pulls load toward low-delay candidates,
* the queue term punishes pushing any instance past its capacity.

This script shows the dual bisection at work, checks the result against
an exhaustive grid search, and sweeps the delay weight to show the
fairness/delay trade-off.
"""

import numpy as np

from edgefail import LbPsvmProblem, lb_objective, oracle_lb_psvm, solve_lb_psvm

CAP = 30.0

problem = LbPsvmProblem(
    weights=[0.8, 0.4, 0.1],       # free-capacity fractions of the candidates
    prior_load=[6.0, 18.0, 27.0],  # primary vehicles already served there
    delay=[12.0, 4.0, 6.0],        # ms; the second candidate is closest
    capacity=CAP,
    affected=24.0,                 # vehicles orphaned by the attack
    delay_cap=60.0,
    k1=1 / 60.0,
    k2=1 / 60.0,
    epsilon=1e-3,
)

sol = solve_lb_psvm(problem)
print("split:", np.round(sol.beta, 4))
print("sum == affected:", float(sol.beta.sum()))
print("multiplier:", round(sol.mu, 6), "branches:", sol.branches)
print("objective:", round(sol.objective, 6))
print("stationarity spread over interior coordinates:", sol.residual)

# The optimum equalizes  w_i/b_i - k1 d_i - k2 q_i'(b_i)  across candidates.
for i in range(problem.n):
    b = sol.beta[i]
    u = problem.prior_load[i] + b - CAP
    slope = 0.0 if u < 0 else 1.0 / (2 * (CAP - u) ** 2)
    val = problem.weights[i] / b - problem.k1 * problem.delay[i] - problem.k2 * slope
    print(f"  candidate {i}: beta={b:8.4f}  stationarity={val:.9f}")

# --- cross-check against brute force ------------------------------------
orc = oracle_lb_psvm(problem, step=0.01)
print("\ngrid oracle split:", orc.beta, "objective:", round(orc.objective, 6))
print("solver beats grid by:", orc.objective - sol.objective)
assert sol.objective <= orc.objective + 1e-9

# a hand-perturbed split is strictly worse: the optimum is a real minimum
perturbed = np.array(sol.beta)
perturbed[0] += 0.5
perturbed[1] -= 0.5
print("perturbed objective:", round(lb_objective(problem, perturbed), 6), "(worse)")

# --- trade-off sweep ------------------------------------------------------
print("\ndelay-pressure sweep (k1 scaled, k2 fixed):")
print(f"{'k1':>8} {'split':>28} {'delay mass':>12}")
for scale in (0.0, 0.5, 1.0, 4.0, 16.0):
    p = LbPsvmProblem(
        weights=problem.weights, prior_load=problem.prior_load, delay=problem.delay,
        capacity=CAP, affected=problem.affected, delay_cap=problem.delay_cap,
        k1=scale / 60.0, k2=1 / 60.0, epsilon=1e-3,
    )
    s = solve_lb_psvm(p)
    mass = float((p.delay * s.beta).sum())
    print(f"{p.k1:8.4f} {np.array2string(np.round(s.beta, 2)):>28} {mass:12.2f}")
print("higher k1 drags the split toward the low-delay candidate")
