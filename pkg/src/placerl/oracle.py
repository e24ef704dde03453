"""Exhaustive ground truth for small instances.

Two enumerations are available. :func:`enumerate_placements` walks the raw
assignment space M^N in lexicographic order and scores each placement with
the environment's own cost functions. :func:`enumerate_trajectories` follows
the policy's sequential semantics (placement order, masks, dead ends), which
is the sum the expected reward and its gradient are defined over.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .core import PlacementEnv
from .errors import NonFiniteValue, TooLarge
from .policy import (PolicyParams, check_compatible, forward_encoder, head_logits, masked_softmax,
                     trajectory_grad)

DEFAULT_LIMIT = 10**6


def _check_size(env: PlacementEnv, limit: int) -> int:
    size = env.m ** env.n
    if size > limit:
        raise TooLarge(f"M^N = {env.m}^{env.n} = {size} exceeds the enumeration limit {limit}", size)
    return size


@dataclass
class EnumerationResult:
    count: int
    optimal_reward: float
    optimal_placements: list[tuple[int, ...]]
    placements: np.ndarray = field(repr=False)  # count x N, lexicographic
    rewards: np.ndarray = field(repr=False)

    @property
    def mean_reward(self) -> float:
        """Average return of a uniformly random feasible placement."""
        return math.fsum(self.rewards) / self.count if self.count else math.nan


def enumerate_placements(env: PlacementEnv, limit: int = DEFAULT_LIMIT) -> EnumerationResult:
    """Score every complete placement; in mask mode, capacity-infeasible ones are skipped."""
    _check_size(env, limit)
    rows, rewards = [], []
    for p in itertools.product(range(env.m), repeat=env.n):
        arr = np.array(p, dtype=int)
        if env.reward.masked and not env.feasible(arr):
            continue
        rows.append(p)
        rewards.append(env.placement_return(arr))
    r = np.array(rewards, dtype=float)
    if not rows:
        return EnumerationResult(0, -math.inf, [], np.zeros((0, env.n), dtype=int), r)
    best = float(r.max())
    optimal = [rows[k] for k in np.flatnonzero(r == best)]
    return EnumerationResult(len(rows), best, optimal, np.array(rows, dtype=int), r)


class Branch(NamedTuple):
    actions: tuple[int, ...]
    logp: float
    ret: float
    aborted: bool


def enumerate_trajectories(env: PlacementEnv, params: PolicyParams, limit: int = DEFAULT_LIMIT,
                           gamma: float = 1.0) -> Iterator[Branch]:
    """Every trajectory the sampler can produce with nonzero probability."""
    _check_size(env, limit)
    check_compatible(env, params)
    h = forward_encoder(env.graph, params).h

    def walk(s, actions, logp, ret, t):
        if env.done(s):
            yield Branch(tuple(actions), logp, ret, False)
            return
        mask = env.mask(s)
        if not mask.any():
            yield Branch(tuple(actions), logp, ret + gamma**t * env.dead_end_reward(s), True)
            return
        _, lp = masked_softmax(head_logits(params, h[env.current_node(s)], s.usage), mask)
        for j in np.flatnonzero(mask):
            nxt, r = env.step(s, int(j))
            actions.append(int(j))
            yield from walk(nxt, actions, logp + lp[j], ret + gamma**t * r, t + 1)
            actions.pop()

    yield from walk(env.initial_state(), [], 0.0, 0.0, 0)


def exact_expected_reward(env: PlacementEnv, params: PolicyParams, limit: int = DEFAULT_LIMIT) -> float:
    return math.fsum(math.exp(b.logp) * b.ret for b in enumerate_trajectories(env, params, limit))


def exact_gradient(env: PlacementEnv, params: PolicyParams, limit: int = DEFAULT_LIMIT,
                   shift: float = 0.0) -> np.ndarray:
    """sum over trajectories of pi * grad(log pi) * (R + shift)."""
    enc = forward_encoder(env.graph, params)
    total = np.zeros_like(params.theta)
    for b in enumerate_trajectories(env, params, limit):
        total += math.exp(b.logp) * (b.ret + shift) * trajectory_grad(env, params, list(b.actions), enc)
    return total


def finite_diff_gradient(f: Callable[[np.ndarray], float], theta, eps: float = 1e-5) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    theta = np.array(theta, dtype=float)
    out = np.empty_like(theta)
    for k in range(theta.size):
        old = theta[k]
        theta[k] = old + eps
        up = f(theta)
        theta[k] = old - eps
        down = f(theta)
        theta[k] = old
        if not (math.isfinite(up) and math.isfinite(down)):
            raise NonFiniteValue(f"f is not finite near coordinate {k}: f(+)={up}, f(-)={down}")
        out[k] = (up - down) / (2 * eps)
    return out


def oracle_report(env: PlacementEnv, params: PolicyParams | None = None, limit: int = DEFAULT_LIMIT) -> dict:
    res = enumerate_placements(env, limit)
    report = {
        "count": res.count,
        "optimal_reward": res.optimal_reward,
        "optimal_placements": [list(p) for p in res.optimal_placements[:10]],
        "expected_reward_if_params_given": None,
    }
    if params is not None:
        report["expected_reward_if_params_given"] = exact_expected_reward(env, params, limit)
    return report
