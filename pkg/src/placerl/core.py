"""Pieces shared by the device and grid environments.

A placement is an int array of length N holding a location index per node,
or ``UNASSIGNED``. Environments place nodes one at a time in a fixed order;
the state between steps is a :class:`StepState` value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import IncompletePlacement, StateError
from .graph import Graph

UNASSIGNED = -1


class Shaping(str, enum.Enum):
    IDENTITY = "identity"
    SQRT = "sqrt"


class ConstraintMode(str, enum.Enum):
    MASK = "mask"
    PENALTY = "penalty"


@dataclass(frozen=True)
class RewardSpec:
    alpha: float = 1.0
    beta: float = 0.5
    lam: float = 10.0
    shaping: Shaping = Shaping.IDENTITY
    constraint_mode: ConstraintMode = ConstraintMode.MASK

    def __post_init__(self):
        object.__setattr__(self, "shaping", Shaping(self.shaping))
        object.__setattr__(self, "constraint_mode", ConstraintMode(self.constraint_mode))
        for name in ("alpha", "beta", "lam"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"RewardSpec.{name} must be finite and >= 0, got {v}")

    @property
    def masked(self) -> bool:
        return self.constraint_mode is ConstraintMode.MASK

    def shape(self, raw: float) -> float:
        """Map a nonnegative cost to a reward."""
        if self.shaping is Shaping.SQRT:
            return -math.sqrt(raw)
        return -raw


def empty_placement(n: int) -> np.ndarray:
    return np.full(n, UNASSIGNED, dtype=int)


def is_complete(p) -> bool:
    return bool(np.all(np.asarray(p) != UNASSIGNED))


def require_complete(p, n: int, m: int) -> np.ndarray:
    p = np.asarray(p, dtype=int)
    if p.shape != (n,):
        raise IncompletePlacement(f"placement has shape {p.shape}, expected ({n},)")
    if not is_complete(p):
        missing = np.flatnonzero(p == UNASSIGNED).tolist()
        raise IncompletePlacement(f"nodes {missing} are unassigned")
    if p.min() < 0 or p.max() >= m:
        raise IncompletePlacement(f"placement entries must lie in [0, {m}), got {p.tolist()}")
    return p


@dataclass(frozen=True)
class StepState:
    """Value passed between placement steps.

    ``load`` is the raw per-location quantity the capacity is measured in
    (bytes of memory for devices, node count for grid cells); ``usage`` is
    ``load / capacity`` clipped to [0, 1].
    """

    graph: Graph
    partial: np.ndarray
    load: np.ndarray
    usage: np.ndarray
    cursor: int


class PlacementEnv:
    """Base for sequential placement environments.

    Subclasses set ``graph``, ``order``, ``m``, ``reward`` and implement the
    capacity accounting plus the reward hooks.
    """

    graph: Graph
    order: tuple[int, ...]
    m: int
    reward: RewardSpec

    @property
    def n(self) -> int:
        return self.graph.n

    # -- capacity accounting -------------------------------------------------

    def node_load(self, i: int) -> float:
        raise NotImplementedError

    @property
    def capacity(self) -> float:
        raise NotImplementedError

    def usage_of(self, load: np.ndarray) -> np.ndarray:
        cap = self.capacity
        if math.isinf(cap):
            return np.zeros_like(load)
        if cap == 0:
            return (load > 0).astype(float)
        return np.minimum(load / cap, 1.0)

    def _fits(self, load: np.ndarray, i: int) -> np.ndarray:
        return load + self.node_load(i) <= self.capacity

    def loads(self, partial) -> np.ndarray:
        # Same summation order as step(), so masks and final totals agree exactly.
        partial = np.asarray(partial)
        load = np.zeros(self.m)
        for k in self.order:
            if partial[k] != UNASSIGNED:
                load[partial[k]] += self.node_load(k)
        return load

    # -- stepping ------------------------------------------------------------

    def initial_state(self) -> StepState:
        load = np.zeros(self.m)
        return StepState(self.graph, empty_placement(self.n), load, self.usage_of(load), 0)

    def current_node(self, s: StepState) -> int:
        return self.order[s.cursor]

    def done(self, s: StepState) -> bool:
        return s.cursor >= self.n

    def mask(self, s: StepState) -> np.ndarray:
        if not self.reward.masked:
            return np.ones(self.m, dtype=bool)
        return self._fits(s.load, self.current_node(s))

    def step(self, s: StepState, j: int) -> tuple[StepState, float]:
        """Place the current node at location ``j``; return the next state and step reward."""
        i = self.current_node(s)
        if not 0 <= j < self.m:
            raise StateError(f"location {j} out of range [0, {self.m})")
        r = self._step_reward(s, i, j)
        partial = s.partial.copy()
        partial[i] = j
        load = s.load.copy()
        load[j] += self.node_load(i)
        nxt = StepState(s.graph, partial, load, self.usage_of(load), s.cursor + 1)
        if self.done(nxt):
            r += self.final_reward(partial)
        return nxt, r

    def state_from_partial(self, partial) -> StepState:
        partial = np.asarray(partial, dtype=int)
        cursor = 0
        while cursor < self.n and partial[self.order[cursor]] != UNASSIGNED:
            cursor += 1
        self._check_prefix(partial, self.order[cursor] if cursor < self.n else None)
        load = self.loads(partial)
        return StepState(self.graph, partial.copy(), load, self.usage_of(load), cursor)

    def _check_prefix(self, partial, i):
        """Nodes before ``i`` in the order are placed, ``i`` and later ones are not."""
        partial = np.asarray(partial)
        if partial.shape != (self.n,):
            raise StateError(f"partial placement has shape {partial.shape}, expected ({self.n},)")
        if i is None:
            if not is_complete(partial):
                raise StateError("placement has gaps in the placement order")
            return
        pos = self.order.index(i)
        if partial[i] != UNASSIGNED:
            raise StateError(f"node {i} is already placed")
        before = [k for k in self.order[:pos] if partial[k] == UNASSIGNED]
        if before:
            raise StateError(f"node {i} is not next: nodes {before} precede it and are unplaced")
        after = [k for k in self.order[pos + 1:] if partial[k] != UNASSIGNED]
        if after:
            raise StateError(f"nodes {after} are placed out of order")

    def mask_for(self, partial, i: int) -> np.ndarray:
        self._check_prefix(partial, i)
        if not self.reward.masked:
            return np.ones(self.m, dtype=bool)
        return self._fits(self.loads(partial), i)

    # -- rewards -------------------------------------------------------------

    def _step_reward(self, s: StepState, i: int, j: int) -> float:
        return 0.0

    def final_reward(self, p: np.ndarray) -> float:
        raise NotImplementedError

    def dead_end_reward(self, s: StepState) -> float:
        remaining = sum(self.node_load(k) for k in self.order[s.cursor:])
        return -(self.reward.lam * remaining)

    def placement_return(self, p) -> float:
        """Undiscounted episode return of a complete placement."""
        raise NotImplementedError

    def feasible(self, p) -> bool:
        """True when no location's load exceeds its capacity."""
        return bool(np.all(self.loads(p) <= self.capacity))
