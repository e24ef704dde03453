"""Brute force as ground truth: optimum, expected reward and its gradient.

Run: python3 demos/02_oracle_and_gradients.py
"""

import numpy as np

from placerl import (DeviceSpec, PolicyHyper, build_device_env, enumerate_placements, exact_expected_reward,
                     exact_gradient, finite_diff_gradient, generate_synthetic, init_params, sample_rollout,
                     trajectory_grad)

g = generate_synthetic(3, 5, "random-dag")
env = build_device_env(g, DeviceSpec(2, mem_capacity=0.6 * g.memory.sum()))

res = enumerate_placements(env)
print("feasible placements:", res.count)
print("optimal return %.3f at %s" % (res.optimal_reward, res.optimal_placements))
print("uniformly random placement averages %.3f" % res.mean_reward)

hyper = PolicyHyper(op_types=3, locations=2, hidden=4, rounds=2)
params = init_params(0, hyper)
print("\nfresh policy expects %.3f" % exact_expected_reward(env, params))
# nudge the weights off the symmetric starting point so every coordinate matters
params = params.with_theta(params.theta + np.random.default_rng(1).normal(0, 0.5, hyper.size))
print("perturbed policy expects %.3f" % exact_expected_reward(env, params))

# The score-function gradient summed over every trajectory...
exact = exact_gradient(env, params)
# ...agrees with differentiating the expected reward numerically.
numeric = finite_diff_gradient(lambda t: exact_expected_reward(env, params.with_theta(t)), params.theta)
print("exact vs finite-difference gradient, max abs diff %.2e" % np.abs(exact - numeric).max())

# A Monte-Carlo estimate with a constant baseline converges to the same vector.
rng = np.random.default_rng(0)
b = exact_expected_reward(env, params)
for n in (100, 1000, 10000):
    est = np.zeros_like(exact)
    for _ in range(n):
        t = sample_rollout(env, params, rng)
        est += (t.episode_return - b) * trajectory_grad(env, params, t)
    est /= n
    print("n=%5d  relative error %.3f" % (n, np.linalg.norm(est - exact) / np.linalg.norm(exact)))
