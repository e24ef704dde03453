"""Run configuration: one JSON document describing a full training run.

Example::

    {
      "graphs": ["g0.json", "g1.json"],
      "env": "device",
      "device": {"count": 2, "mem_capacity": 40.0, "bandwidth": 4.0},
      "reward": {"alpha": 1.0, "beta": 0.5, "lambda": 10.0,
                 "shaping": "identity", "constraint_mode": "mask"},
      "policy": {"hidden": 8, "rounds": 2, "encoder": "message-passing"},
      "trainer": {"learning_rate": 0.5, "batch_size": 16, "iterations": 300, "seed": 0},
      "output_dir": "runs/demo"
    }

Relative paths resolve against the config file's directory. ``mem_capacity``
may be omitted or null for unlimited memory. Grid runs use a ``"grid"``
section ``{"width", "height", "cell_capacity", "density_weight",
"step_rewards"}`` instead of ``"device"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .core import PlacementEnv, RewardSpec
from .env_device import DeviceSpec, build_device_env
from .env_grid import GridSpec, build_grid_env
from .errors import ParseError, ValidationError
from .graph import Graph, GraphKind, load_graph
from .policy import PolicyHyper
from .trainer import TrainerConfig

_TOP = {"graphs", "env", "device", "grid", "reward", "policy", "trainer", "output_dir"}
_REWARD = {"alpha", "beta", "lambda", "shaping", "constraint_mode"}
_DEVICE = {"count", "mem_capacity", "bandwidth"}
_GRID = {"width", "height", "cell_capacity", "density_weight", "step_rewards"}
_POLICY = {"hidden", "rounds", "encoder"}
_TRAINER = {f.name for f in fields(TrainerConfig)}


@dataclass
class RunConfig:
    graph_paths: list[Path]
    graphs: list[Graph]
    env_kind: GraphKind
    device: DeviceSpec | None
    grid: GridSpec | None
    step_rewards: bool
    reward: RewardSpec
    policy: dict
    trainer: TrainerConfig
    output_dir: Path

    def build_env(self, g: Graph) -> PlacementEnv:
        return make_env(g, self.env_kind, self.device, self.grid, self.reward, self.step_rewards)

    def build_envs(self) -> list[PlacementEnv]:
        return [self.build_env(g) for g in self.graphs]

    def hyper(self) -> PolicyHyper:
        g = self.graphs[0]
        m = self.device.count if self.env_kind is GraphKind.DEVICE else self.grid.cells
        return PolicyHyper(g.op_types, m, **self.policy)


def make_env(g: Graph, kind: GraphKind, device: DeviceSpec | None, grid: GridSpec | None,
             reward: RewardSpec, step_rewards: bool = False) -> PlacementEnv:
    if kind is GraphKind.DEVICE:
        return build_device_env(g, device, reward)
    return build_grid_env(g, grid, reward, step_rewards)


def _section(doc: dict, name: str, allowed: set[str]) -> dict:
    sec = doc.get(name) or {}
    if not isinstance(sec, dict):
        raise ParseError(f"config.{name} must be an object")
    extra = sorted(set(sec) - allowed)
    if extra:
        raise ParseError(f"config.{name}: unknown keys {extra}")
    return sec


def parse_reward(sec: dict) -> RewardSpec:
    kw = {("lam" if k == "lambda" else k): v for k, v in sec.items()}
    try:
        return RewardSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config.reward: {exc}") from None


def parse_device(sec: dict) -> DeviceSpec:
    if "count" not in sec:
        raise ParseError("config.device.count is required")
    cap = sec.get("mem_capacity")
    return DeviceSpec(int(sec["count"]), math.inf if cap is None else float(cap), float(sec.get("bandwidth", 1.0)))


def parse_grid(sec: dict) -> tuple[GridSpec, bool]:
    if "width" not in sec or "height" not in sec:
        raise ParseError("config.grid needs width and height")
    spec = GridSpec(int(sec["width"]), int(sec["height"]), int(sec.get("cell_capacity", 1)),
                    float(sec.get("density_weight", 1.0)))
    return spec, bool(sec.get("step_rewards", False))


def config_from_dict(doc: dict, base: Path = Path(".")) -> RunConfig:
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    extra = sorted(set(doc) - _TOP)
    if extra:
        raise ParseError(f"config: unknown keys {extra}")
    paths = doc.get("graphs")
    if not paths or not isinstance(paths, list):
        raise ParseError("config.graphs must be a non-empty list of paths")
    try:
        kind = GraphKind(doc.get("env", "device"))
    except ValueError:
        raise ParseError(f"config.env must be 'device' or 'grid', got {doc.get('env')!r}") from None

    graph_paths = [(base / p) for p in paths]
    for p in graph_paths:
        if not p.is_file():
            raise FileNotFoundError(f"graph file not found: {p}")
    graphs = [load_graph(p) for p in graph_paths]
    for p, g in zip(graph_paths, graphs):
        if g.kind is not kind:
            raise ValidationError(f"{p}: graph kind {g.kind.value!r} does not match env {kind.value!r}")
        if g.op_types != graphs[0].op_types:
            raise ValidationError(f"{p}: op_types {g.op_types} differs from {graphs[0].op_types}")

    reward = parse_reward(_section(doc, "reward", _REWARD))
    device = grid = None
    step_rewards = False
    if kind is GraphKind.DEVICE:
        device = parse_device(_section(doc, "device", _DEVICE))
    else:
        grid, step_rewards = parse_grid(_section(doc, "grid", _GRID))
    policy = _section(doc, "policy", _POLICY)
    try:
        trainer = TrainerConfig(**_section(doc, "trainer", _TRAINER))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config.trainer: {exc}") from None
    cfg = RunConfig(graph_paths, graphs, kind, device, grid, step_rewards, reward, policy, trainer,
                    base / doc.get("output_dir", "out"))
    cfg.hyper()
    cfg.build_envs()  # surfaces InfeasibleInstance / CycleError before any training
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return config_from_dict(doc, path.parent)
