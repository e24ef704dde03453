"""Cost models for the two placement targets.

Run: python3 demos/01_cost_models.py
"""

import numpy as np

from placerl import (GenParams, GraphKind, RewardSpec, DeviceSpec, GridSpec, build_device_env,
                     build_grid_env, generate_synthetic)

# A small dataflow graph split across two devices.
g = generate_synthetic(seed=0, n=6, family="layered")
print("nodes:", g.n, "edges:", len(g.edges))
print("compute:", np.round(g.compute, 2))

env = build_device_env(g, DeviceSpec(count=2, mem_capacity=30.0, bandwidth=4.0), RewardSpec())
print("placement order (topological):", env.order)

for p in ([0, 0, 0, 0, 0, 0], [0, 1, 0, 1, 0, 1], [0, 0, 0, 1, 1, 1]):
    cb = env.cost_breakdown(p)
    print(p, "makespan %.2f  cross %.2f  imbalance %.2f  overflow %.2f  ->  return %.2f"
          % (cb.makespan, cb.cross_bytes, cb.imbalance, cb.mem_overflow, env.placement_return(p)))

# Stepping through the environment by hand. The mask drops devices without room.
s = env.initial_state()
while not env.done(s):
    mask = env.mask(s)
    j = int(np.flatnonzero(mask)[np.argmin(s.usage[mask])])  # least-used device that fits
    s, r = env.step(s, j)
print("least-used heuristic:", s.partial.tolist(), "return %.2f" % env.placement_return(s.partial))

# Grid placement with per-step rewards: the deltas add up to the final cost.
gg = generate_synthetic(1, 7, "random-dag", GenParams(kind=GraphKind.GRID, op_types=1, edge_prob=0.5))
grid = build_grid_env(gg, GridSpec(3, 3, cell_capacity=1, density_weight=2.0), step_rewards=True)
rng = np.random.default_rng(0)
s, rewards = grid.initial_state(), []
while not grid.done(s):
    s, r = grid.step(s, int(rng.choice(np.flatnonzero(grid.mask(s)))))
    rewards.append(r)
cost = grid.grid_cost(s.partial)
print("per-step rewards:", np.round(rewards, 2).tolist())
print("sum %.4f   hpwl + weighted density %.4f" % (-sum(rewards), cost.total))
