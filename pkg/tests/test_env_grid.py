import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from placerl.core import UNASSIGNED, RewardSpec
from placerl.env_grid import GridSpec, build_grid_env
from placerl.errors import InfeasibleInstance, InvalidParams, StateError
from placerl.graph import GenParams, GraphKind, generate_synthetic

from conftest import grid_graph


def test_build_examples():
    env = build_grid_env(grid_graph(2, [(0, 1)]), GridSpec(1, 2))
    assert env.m == 2 and env.n == 2
    with pytest.raises(InfeasibleInstance):
        build_grid_env(grid_graph(3, []), GridSpec(1, 2))
    star = build_grid_env(grid_graph(4, [(1, 0), (1, 2), (1, 3)]), GridSpec(2, 2))
    assert star.order[0] == 1
    with pytest.raises(InvalidParams):
        build_grid_env(grid_graph(2, []), GridSpec(2, 2), RewardSpec(shaping="sqrt"), step_rewards=True)


def test_hpwl_examples():
    env = build_grid_env(grid_graph(2, [(0, 1)]), GridSpec(4, 5, cell_capacity=2))
    assert env.hpwl([0, 0]) == 0
    far = 4 * 4 + 3  # cell (3, 4)
    assert env.hpwl([0, far]) == 7


def test_density_examples():
    env = build_grid_env(grid_graph(3, []), GridSpec(2, 2), RewardSpec(constraint_mode="penalty"))
    assert env.density_cost([0, 1, 2]) == 0
    assert env.density_cost([3, 3, 3]) == 4


def test_grid_mask_examples():
    env = build_grid_env(grid_graph(4, [(0, 1), (1, 2), (2, 3)]), GridSpec(2, 2))
    first = env.order[0]
    partial = np.full(4, UNASSIGNED)
    assert env.grid_mask(partial, first).tolist() == [True] * 4
    partial[first] = 0
    assert env.grid_mask(partial, env.order[1]).tolist() == [False, True, True, True]
    partial[env.order[1]], partial[env.order[2]] = 1, 2
    assert env.grid_mask(partial, env.order[3]).tolist() == [False, False, False, True]


def test_full_cell_mask():
    tight = build_grid_env(grid_graph(3, []), GridSpec(1, 2, cell_capacity=2))
    s = tight.state_from_partial([0, 0, UNASSIGNED])
    assert tight.mask(s).tolist() == [False, True]


def test_incremental_examples():
    env = build_grid_env(grid_graph(2, [(0, 1)]), GridSpec(4, 1))
    first, second = env.order
    partial = np.full(2, UNASSIGNED)
    assert env.incremental_cost(partial, first, 0) == 0
    partial[first] = 0
    assert env.incremental_cost(partial, second, 3) == 3
    with pytest.raises(StateError):
        env.incremental_cost(partial, second, 0)


def rollout(env, rng):
    s, total = env.initial_state(), 0.0
    while not env.done(s):
        s, r = env.step(s, int(rng.choice(np.flatnonzero(env.mask(s)))))
        total += r
    return s.partial, total


@given(st.integers(0, 10**6), st.sampled_from(["penalty", "mask"]), st.floats(0, 3))
@settings(max_examples=60, deadline=None)
def test_telescoping(seed, mode, weight):
    g = generate_synthetic(seed, 6, "random-dag", GenParams(kind=GraphKind.GRID, op_types=1, edge_prob=0.5))
    env = build_grid_env(g, GridSpec(3, 2, cell_capacity=1, density_weight=weight),
                         RewardSpec(constraint_mode=mode), step_rewards=True)
    p, total = rollout(env, np.random.default_rng(seed))
    c = env.grid_cost(p)
    assert abs(-total - (c.hpwl + weight * c.density)) < 1e-9
    if mode == "mask":
        assert c.density == 0


@given(st.integers(0, 10**6), st.data())
@settings(max_examples=60, deadline=None)
def test_translation_invariance(seed, data):
    g = generate_synthetic(seed, 5, "random-dag", GenParams(kind=GraphKind.GRID, op_types=1, edge_prob=0.5))
    w, h = 6, 5
    env = build_grid_env(g, GridSpec(w, h, cell_capacity=5))
    xs = np.array(data.draw(st.lists(st.integers(0, 3), min_size=5, max_size=5)))
    ys = np.array(data.draw(st.lists(st.integers(0, 2), min_size=5, max_size=5)))
    dx, dy = data.draw(st.integers(0, 2)), data.draw(st.integers(0, 2))
    assert env.hpwl(ys * w + xs) == env.hpwl((ys + dy) * w + xs + dx)


def test_hpwl_zero_iff_colocated():
    g = grid_graph(3, [(0, 1), (1, 2)])
    env = build_grid_env(g, GridSpec(2, 1, cell_capacity=3))
    for p in itertools.product(range(2), repeat=3):
        h = env.hpwl(np.array(p))
        assert h >= 0
        assert (h == 0) == (p[0] == p[1] == p[2])


def test_final_only_reward_matches_cost():
    g = generate_synthetic(3, 5, "chain", GenParams(kind=GraphKind.GRID, op_types=1))
    env = build_grid_env(g, GridSpec(3, 2), RewardSpec(shaping="sqrt"))
    p, total = rollout(env, np.random.default_rng(0))
    assert total == pytest.approx(-np.sqrt(env.grid_cost(p).total))
