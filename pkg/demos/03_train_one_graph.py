"""REINFORCE on one 8-node graph, compared against the enumerated optimum.

Run: python3 demos/03_train_one_graph.py   (about a minute)
"""

import numpy as np

from placerl import (DeviceSpec, PolicyHyper, RewardSpec, TrainerConfig, build_device_env, enumerate_placements,
                     evaluate, generate_synthetic, train)

g = generate_synthetic(9, 8, "random-dag")
env = build_device_env(g, DeviceSpec(2, mem_capacity=float(g.memory.sum())), RewardSpec())
opt = enumerate_placements(env)

cfg = TrainerConfig(learning_rate=0.02, batch_size=16, iterations=2500, normalize_returns=True, seed=9)
res = train(env, PolicyHyper(g.op_types, 2), cfg)

for rec in res.history[::300]:
    print("iter %4d  mean return %8.2f  best %8.2f  entropy %.3f" % (rec.iter, rec.mean_return, rec.best_return,
                                                                     rec.mean_entropy))

ev = evaluate(res.params, env, eval_samples=32, seed=0)
print("\noptimum          %.2f  %s" % (opt.optimal_reward, opt.optimal_placements[0]))
print("greedy decode    %.2f  %s" % (ev.greedy_return, ev.greedy_placement.tolist()))
print("best of 33       %.2f" % ev.best_return)
print("best seen in training %.2f" % res.best_returns[0])
print("random placement mean %.2f" % opt.mean_reward)
print("cost ratio optimum/greedy %.3f" % (opt.optimal_reward / ev.greedy_return))
