import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from placerl.core import UNASSIGNED, RewardSpec
from placerl.env_device import DeviceSpec, build_device_env
from placerl.errors import IncompletePlacement, InfeasibleInstance, InvalidParams, StateError
from placerl.graph import GraphKind, generate_synthetic

from conftest import make_graph


def test_build_examples():
    env = build_device_env(make_graph([1.0]), DeviceSpec(2))
    assert env.n == 1 and env.order == (0,)
    g = make_graph([1, 1], memory=[5, 5])
    with pytest.raises(InfeasibleInstance):
        build_device_env(g, DeviceSpec(2, mem_capacity=4))
    # penalty mode accepts the same instance
    build_device_env(g, DeviceSpec(2, mem_capacity=4), RewardSpec(constraint_mode="penalty"))
    g = generate_synthetic(2, 9, "random-dag")
    assert build_device_env(g, DeviceSpec(3)).order == build_device_env(g, DeviceSpec(3)).order
    with pytest.raises(InvalidParams):
        build_device_env(make_graph([1.0], kind=GraphKind.GRID), DeviceSpec(2))
    with pytest.raises(InvalidParams):
        DeviceSpec(0)
    with pytest.raises(InvalidParams):
        DeviceSpec(2, bandwidth=0)


def test_capacity_mask_examples():
    env = build_device_env(make_graph([1] * 3, memory=[3, 2, 0]), DeviceSpec(2, mem_capacity=4))
    assert env.capacity_mask([0, UNASSIGNED, UNASSIGNED], 1).tolist() == [False, True]
    assert env.capacity_mask([0, 1, UNASSIGNED], 2).tolist() == [True, True]


def test_capacity_mask_all_false():
    # both devices hold 4 of 4.5, the last node needs 1
    env = build_device_env(make_graph([1] * 3, memory=[4, 4, 1]), DeviceSpec(2, mem_capacity=4.5))
    assert env.capacity_mask([0, 1, UNASSIGNED], 2).tolist() == [False, False]
    s = env.step(env.step(env.initial_state(), 0)[0], 1)[0]
    assert env.mask(s).tolist() == [False, False]
    free = build_device_env(make_graph([1] * 3, memory=[4, 4, 1]), DeviceSpec(2, mem_capacity=4.5),
                            RewardSpec(constraint_mode="penalty"))
    assert free.capacity_mask([0, 1, UNASSIGNED], 2).tolist() == [True, True]


def test_mask_out_of_order():
    env = build_device_env(make_graph([1] * 3, edges=[(0, 1), (1, 2)]), DeviceSpec(2))
    with pytest.raises(StateError):
        env.capacity_mask([UNASSIGNED, UNASSIGNED, UNASSIGNED], 1)
    with pytest.raises(StateError):
        env.capacity_mask([0, UNASSIGNED, 1], 1)


def test_cost_breakdown_examples():
    g = make_graph([2, 3, 5], edges=[(1, 2, 8)])
    env = build_device_env(g, DeviceSpec(2, bandwidth=4))
    cb = env.cost_breakdown([0, 0, 1])
    assert cb.makespan == 7 and cb.cross_bytes == 8 and cb.imbalance == 0
    cb = env.cost_breakdown([1, 1, 1])
    assert cb.makespan == 10 and cb.cross_bytes == 0 and cb.imbalance == 10
    with pytest.raises(IncompletePlacement):
        env.cost_breakdown([0, UNASSIGNED, 1])


def test_device_reward_examples():
    env = build_device_env(make_graph([49.0]), DeviceSpec(1), RewardSpec(0, 0, 0, shaping="sqrt"))
    assert env.device_reward(env.cost_breakdown([0])) == -7
    env = build_device_env(make_graph([2, 3, 5], edges=[(1, 2, 8)]), DeviceSpec(2, bandwidth=4))
    # makespan 7 + comm 8/4 + 0.5 * imbalance 0
    assert env.placement_return([0, 0, 1]) == -9


def reference_cost(g, p, m, cap, bw, alpha, beta, lam):
    comp = [0.0] * m
    mem = [0.0] * m
    for i, nd in enumerate(g.nodes):
        comp[p[i]] += nd.compute
        mem[p[i]] += nd.memory
    cross = sum(e.bytes for e in g.edges if p[e.src] != p[e.dst])
    over = sum(max(0.0, x - cap) for x in mem)
    return max(comp) + cross / bw + alpha * cross / bw + beta * (max(comp) - min(comp)) + lam * over


def test_cost_matches_reference_enumeration():
    g = generate_synthetic(11, 4, "random-dag")
    reward = RewardSpec(1.0, 0.5, 10.0, constraint_mode="penalty")
    env = build_device_env(g, DeviceSpec(2, mem_capacity=12.0, bandwidth=2.0), reward)
    for p in itertools.product(range(2), repeat=4):
        want = reference_cost(g, p, 2, 12.0, 2.0, 1.0, 0.5, 10.0)
        assert env.placement_return(np.array(p)) == pytest.approx(-want, abs=1e-12)


def test_step_is_deterministic():
    g = generate_synthetic(4, 6, "layered")
    env = build_device_env(g, DeviceSpec(3))
    s = env.initial_state()
    a, ra = env.step(s, 2)
    b, rb = env.step(s, 2)
    assert ra == rb and np.array_equal(a.partial, b.partial) and np.array_equal(a.usage, b.usage)
    assert s.partial[env.order[0]] == UNASSIGNED  # the input state is untouched


def test_dead_end_reward_uses_remaining_memory():
    g = make_graph([1] * 3, memory=[4, 4, 3])
    env = build_device_env(g, DeviceSpec(2, mem_capacity=6), RewardSpec(lam=2.0))
    s = env.state_from_partial([0, 1, UNASSIGNED])
    assert not env.mask(s).any()
    assert env.dead_end_reward(s) == -6.0


@given(st.integers(0, 10**6), st.integers(2, 4), st.data())
@settings(max_examples=60, deadline=None)
def test_relabel_equivariance(seed, m, data):
    g = generate_synthetic(seed, 6, "random-dag")
    env = build_device_env(g, DeviceSpec(m, mem_capacity=15.0), RewardSpec(constraint_mode="penalty"))
    p = np.array(data.draw(st.lists(st.integers(0, m - 1), min_size=6, max_size=6)))
    perm = np.array(data.draw(st.permutations(range(m))))
    a, b = env.cost_breakdown(p), env.cost_breakdown(perm[p])
    assert np.allclose(b.per_device_compute[perm], a.per_device_compute, rtol=0, atol=1e-12)
    assert np.allclose(b.per_device_mem[perm], a.per_device_mem, rtol=0, atol=1e-12)
    for f in ("makespan", "cross_bytes", "imbalance", "mem_overflow"):
        assert math.isclose(getattr(a, f), getattr(b, f), abs_tol=1e-12)


def test_masked_rollouts_never_overflow():
    g = generate_synthetic(1, 7, "random-dag")
    env = build_device_env(g, DeviceSpec(2, mem_capacity=0.55 * g.memory.sum()))
    rng = np.random.default_rng(0)
    for _ in range(300):
        s = env.initial_state()
        while not env.done(s):
            mask = env.mask(s)
            if not mask.any():
                break
            s, _ = env.step(s, int(rng.choice(np.flatnonzero(mask))))
        if env.done(s):
            assert env.cost_breakdown(s.partial).mem_overflow == 0
