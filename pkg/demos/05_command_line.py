"""The placerl command line, driven from Python on throwaway files.

The same steps in a shell:

    placerl gen --seed 0 --nodes 6 --family random-dag --out g.json
    placerl oracle --graph g.json --devices 2
    placerl train --config run.json
    placerl eval --params out/params.json --graph g.json --samples 8

Run: python3 demos/05_command_line.py
"""

import json
import tempfile
from pathlib import Path

from placerl.cli import main

work = Path(tempfile.mkdtemp())
print("working in", work)

for seed in range(3):
    main(["gen", "--seed", str(seed), "--nodes", "6", "--family", "random-dag", "--out", str(work / f"g{seed}.json")])

main(["oracle", "--graph", str(work / "g0.json"), "--devices", "2"])

config = {
    "graphs": ["g0.json", "g1.json", "g2.json"],
    "env": "device",
    "device": {"count": 2, "mem_capacity": 40.0, "bandwidth": 1.0},
    "reward": {"alpha": 1.0, "beta": 0.5, "lambda": 10.0, "shaping": "identity", "constraint_mode": "mask"},
    "policy": {"hidden": 8, "rounds": 2, "encoder": "message-passing"},
    "trainer": {"learning_rate": 0.02, "batch_size": 16, "iterations": 300, "seed": 0},
    "output_dir": "out",
}
(work / "run.json").write_text(json.dumps(config, indent=1))
main(["train", "--config", str(work / "run.json")])
print(sorted(p.name for p in (work / "out").iterdir()))
print((work / "out" / "history.csv").read_text().splitlines()[-1])

main(["eval", "--params", str(work / "out" / "params.json"), "--graph", str(work / "g0.json"),
      "--capacity", "40", "--samples", "8"])

# errors are one line on stderr and exit code 1
code = main(["eval", "--params", str(work / "out" / "params.json"), "--graph", str(work / "g0.json"),
             "--devices", "3"])
print("exit code", code)
