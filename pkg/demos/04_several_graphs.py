"""One policy for many graphs, tested on graphs it never saw.

Also compares the message-passing encoder with the edge-blind flat one.

Run: python3 demos/04_several_graphs.py   (a few minutes)
"""

import numpy as np

from placerl import (DeviceSpec, PolicyHyper, TrainerConfig, build_device_env, enumerate_placements, evaluate,
                     generate_synthetic, train)


def make(seed):
    g = generate_synthetic(seed, 8, "random-dag")
    return build_device_env(g, DeviceSpec(2, mem_capacity=float(g.memory.sum())))


train_envs = [make(s) for s in range(100, 120)]
held_out = [make(s) for s in range(200, 205)]
enum = [enumerate_placements(e) for e in held_out]
opt = np.array([e.optimal_reward for e in enum])
rand = np.array([e.mean_reward for e in enum])

cfg = TrainerConfig(learning_rate=0.02, batch_size=16, iterations=2500, normalize_returns=True)
print("held-out optimum %s\nrandom mean      %s" % (np.round(opt, 1), np.round(rand, 1)))
for encoder in ("message-passing", "flat"):
    res = train(train_envs, PolicyHyper(3, 2, encoder=encoder), cfg)
    greedy = np.array([evaluate(res.params, e).greedy_return for e in held_out])
    print("%-16s %s   mean %.2f   optimum/greedy %.3f" % (encoder, np.round(greedy, 1), greedy.mean(),
                                                          np.mean(opt / greedy)))
