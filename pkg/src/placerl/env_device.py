"""Device placement: an additive runtime proxy over M identical devices.

The modelled step time is the busiest device's compute plus all cross-device
traffic divided by the link bandwidth. The reward folds in extra weighted
terms for communication, load imbalance and memory overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PlacementEnv, RewardSpec, require_complete
from .errors import InfeasibleInstance, InvalidParams
from .graph import Graph, GraphKind, topological_order


@dataclass(frozen=True)
class DeviceSpec:
    count: int
    mem_capacity: float = math.inf
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.count < 1:
            raise InvalidParams(f"device count must be >= 1, got {self.count}")
        if not self.mem_capacity >= 0:
            raise InvalidParams(f"mem_capacity must be >= 0, got {self.mem_capacity}")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise InvalidParams(f"bandwidth must be finite and > 0, got {self.bandwidth}")


@dataclass(frozen=True)
class CostBreakdown:
    makespan: float
    cross_bytes: float
    imbalance: float
    mem_overflow: float
    per_device_mem: np.ndarray
    per_device_compute: np.ndarray


class DeviceEnv(PlacementEnv):
    def __init__(self, graph: Graph, spec: DeviceSpec, reward: RewardSpec):
        self.graph = graph
        self.spec = spec
        self.reward = reward
        self.m = spec.count
        self.order = tuple(topological_order(graph))

    def __repr__(self):
        return f"DeviceEnv(N={self.n}, M={self.m}, capacity={self.spec.mem_capacity}, mode={self.reward.constraint_mode.value})"

    def node_load(self, i: int) -> float:
        return float(self.graph.memory[i])

    @property
    def capacity(self) -> float:
        return self.spec.mem_capacity

    def capacity_mask(self, partial, i: int) -> np.ndarray:
        """Devices with room for node ``i`` given the placed prefix (all true in penalty mode)."""
        return self.mask_for(partial, i)

    def cost_breakdown(self, p) -> CostBreakdown:
        g = self.graph
        p = require_complete(p, self.n, self.m)
        comp = np.bincount(p, weights=g.compute, minlength=self.m)
        mem = self.loads(p)
        cross = float(g.edge_bytes[p[g.edge_src] != p[g.edge_dst]].sum())
        overflow = float(np.maximum(mem - self.spec.mem_capacity, 0.0).sum())
        return CostBreakdown(
            makespan=float(comp.max()) + cross / self.spec.bandwidth,
            cross_bytes=cross,
            imbalance=float(comp.max() - comp.min()),
            mem_overflow=overflow,
            per_device_mem=mem,
            per_device_compute=comp,
        )

    def raw_cost(self, cb: CostBreakdown) -> float:
        r = self.reward
        return (cb.makespan + r.alpha * cb.cross_bytes / self.spec.bandwidth
                + r.beta * cb.imbalance + r.lam * cb.mem_overflow)

    def device_reward(self, cb: CostBreakdown) -> float:
        return self.reward.shape(self.raw_cost(cb))

    def final_reward(self, p) -> float:
        return self.device_reward(self.cost_breakdown(p))

    def placement_return(self, p) -> float:
        return self.final_reward(p)


def build_device_env(g: Graph, spec: DeviceSpec, reward: RewardSpec | None = None) -> DeviceEnv:
    reward = reward or RewardSpec()
    if g.kind is not GraphKind.DEVICE:
        raise InvalidParams(f"device environment needs a device graph, got kind={g.kind.value!r}")
    env = DeviceEnv(g, spec, reward)
    total = float(g.memory.sum())
    if reward.masked and total > spec.count * spec.mem_capacity:
        raise InfeasibleInstance(
            f"total memory {total:g} exceeds {spec.count} x {spec.mem_capacity:g} device capacity")
    return env
