"""Netlist placement onto a W x H grid of unit cells.

Location ``j`` is the cell at column ``j % W``, row ``j // W``. Cost is
half-perimeter wirelength (Manhattan distance for two-pin edges) plus a
weighted quadratic density overflow term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import UNASSIGNED, PlacementEnv, RewardSpec, Shaping, StepState, require_complete
from .errors import InfeasibleInstance, InvalidParams, StateError
from .graph import Graph, GraphKind


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    cell_capacity: int = 1
    density_weight: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidParams(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if self.cell_capacity < 1:
            raise InvalidParams(f"cell_capacity must be >= 1, got {self.cell_capacity}")
        if not self.density_weight >= 0:
            raise InvalidParams(f"density_weight must be >= 0, got {self.density_weight}")

    @property
    def cells(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class GridCost:
    hpwl: float
    density: float
    total: float


class GridEnv(PlacementEnv):
    def __init__(self, graph: Graph, spec: GridSpec, reward: RewardSpec, step_rewards: bool = False):
        self.graph = graph
        self.spec = spec
        self.reward = reward
        self.step_rewards = step_rewards
        self.m = spec.cells
        j = np.arange(self.m)
        self.xy = np.stack([j % spec.width, j // spec.width], axis=1)
        deg = graph.in_degree + graph.out_degree
        self.order = tuple(sorted(range(graph.n), key=lambda i: (-deg[i], i)))

    def __repr__(self):
        s = self.spec
        return f"GridEnv(N={self.n}, {s.width}x{s.height}, cap={s.cell_capacity}, step_rewards={self.step_rewards})"

    def node_load(self, i: int) -> float:
        return 1.0

    @property
    def capacity(self) -> float:
        return float(self.spec.cell_capacity)

    def grid_mask(self, partial, i: int) -> np.ndarray:
        return self.mask_for(partial, i)

    def _dist(self, a, b):
        return np.abs(self.xy[a] - self.xy[b]).sum(axis=-1)

    def hpwl(self, p) -> float:
        p = require_complete(p, self.n, self.m)
        g = self.graph
        return float(self._dist(p[g.edge_src], p[g.edge_dst]).sum())

    def _density(self, occupancy: np.ndarray) -> float:
        over = np.maximum(occupancy - self.spec.cell_capacity, 0.0)
        return float((over ** 2).sum())

    def density_cost(self, p) -> float:
        p = require_complete(p, self.n, self.m)
        return self._density(np.bincount(p, minlength=self.m).astype(float))

    def grid_cost(self, p) -> GridCost:
        h, d = self.hpwl(p), self.density_cost(p)
        return GridCost(h, d, h + self.spec.density_weight * d)

    def _delta(self, partial, occupancy, i: int, j: int) -> float:
        g = self.graph
        wl = 0.0
        for k in g.incident[i]:
            other = g.edge_dst[k] if g.edge_src[k] == i else g.edge_src[k]
            if partial[other] != UNASSIGNED:
                wl += float(self._dist(j, partial[other]))
        cap = self.spec.cell_capacity
        o = occupancy[j]
        dens = max(0.0, o + 1 - cap) ** 2 - max(0.0, o - cap) ** 2
        return wl + self.spec.density_weight * dens

    def incremental_cost(self, partial, i: int, j: int) -> float:
        """Increase in partial wirelength + weighted density from placing ``i`` at ``j``."""
        mask = self.mask_for(partial, i)
        if not 0 <= j < self.m:
            raise StateError(f"cell {j} out of range [0, {self.m})")
        if not mask[j]:
            raise StateError(f"cell {j} is full")
        partial = np.asarray(partial)
        return self._delta(partial, self.loads(partial), i, j)

    def _step_reward(self, s: StepState, i: int, j: int) -> float:
        if not self.step_rewards:
            return 0.0
        return -self._delta(s.partial, s.load, i, j)

    def final_reward(self, p) -> float:
        if self.step_rewards:
            return 0.0
        return self.reward.shape(self.grid_cost(p).total)

    def placement_return(self, p) -> float:
        if self.step_rewards:
            return -self.grid_cost(p).total
        return self.final_reward(p)


def build_grid_env(g: Graph, spec: GridSpec, reward: RewardSpec | None = None,
                   step_rewards: bool = False) -> GridEnv:
    reward = reward or RewardSpec()
    if g.kind is not GraphKind.GRID:
        raise InvalidParams(f"grid environment needs a grid graph, got kind={g.kind.value!r}")
    if step_rewards and reward.shaping is Shaping.SQRT:
        raise InvalidParams("per-step rewards telescope only under identity shaping")
    if reward.masked and g.n > spec.cells * spec.cell_capacity:
        raise InfeasibleInstance(
            f"{g.n} nodes do not fit in {spec.cells} cells of capacity {spec.cell_capacity}")
    return GridEnv(g, spec, reward, step_rewards)
