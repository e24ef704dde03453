import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from placerl.core import RewardSpec
from placerl.env_device import DeviceSpec, build_device_env
from placerl.errors import DeadEnd, DimensionError, ParseError
from placerl.graph import Edge, Graph, Node, generate_synthetic
from placerl.oracle import finite_diff_gradient
from placerl.policy import (PolicyHyper, PolicyParams, action_distribution, dumps_params, encode,
                            feature_matrix, forward_encoder, init_params, load_params, masked_softmax,
                            node_features, params_from_dict, params_to_dict, sample_rollout, save_params,
                            trajectory_grad, views)

from conftest import make_graph


def test_softmax_examples():
    p, _ = masked_softmax(np.array([0.0, 0.0]), [True, True])
    assert p.tolist() == [0.5, 0.5]
    p, logp = masked_softmax(np.array([5.0, -2.0, 0.0]), [True, False, True])
    e5 = math.exp(5)
    assert p[0] == pytest.approx(e5 / (e5 + 1), rel=1e-15)
    assert p[1] == 0.0 and logp[1] == -np.inf
    assert p[2] == pytest.approx(1 / (e5 + 1), rel=1e-12)
    with pytest.raises(DeadEnd):
        masked_softmax(np.array([1.0, 2.0]), [False, False])


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6), st.data())
@settings(max_examples=100, deadline=None)
def test_softmax_properties(logits, data):
    mask = data.draw(st.lists(st.booleans(), min_size=len(logits), max_size=len(logits)))
    if not any(mask):
        mask[0] = True
    p, _ = masked_softmax(np.array(logits), mask)
    assert np.all(p >= 0)
    assert np.all(p[~np.array(mask)] == 0)
    assert abs(p.sum() - 1) < 1e-12


def test_init_examples():
    hyper = PolicyHyper(3, 4, hidden=5, rounds=2)
    a, b = init_params(9, hyper), init_params(9, hyper)
    assert np.array_equal(a.theta, b.theta)
    assert not np.array_equal(a.theta, init_params(10, hyper).theta)
    assert np.all(a.v.b == 0)
    assert np.all(np.abs(a.theta) <= 1 / math.sqrt(5))


def test_init_uniform_distribution():
    g = make_graph([2.0] * 4, memory=[1.0] * 4, edges=[(0, 1), (2, 3)])
    env = build_device_env(g, DeviceSpec(3, mem_capacity=10.0))
    params = init_params(0, PolicyHyper(1, 3))
    h = encode(g, params)
    s = env.initial_state()
    p = action_distribution(params, h[0], s, [True, True, True])
    assert np.allclose(p, 1 / 3, rtol=0, atol=1e-15)
    p = action_distribution(params, h[0], s, [True, False, True])
    assert p[1] == 0 and np.allclose(p[[0, 2]], 0.5, atol=1e-15)


def test_node_features_examples():
    g = make_graph([3.0], memory=[2.0], op_types=2)
    x = node_features(g, 0)
    assert x.shape == (6,) and x[2] == 1 and x[3] == 1
    iso = make_graph([1.0, 1.0, 1.0], edges=[(0, 1)])
    assert node_features(iso, 2)[-2:].tolist() == [0.0, 0.0]
    twins = make_graph([1.0, 1.0], memory=[4.0, 4.0])
    assert np.array_equal(node_features(twins, 0), node_features(twins, 1))
    with pytest.raises(IndexError):
        node_features(twins, 2)


def test_flat_encoder_ignores_edges():
    hyper = PolicyHyper(1, 2, encoder="flat")
    params = init_params(1, hyper)
    a = make_graph([1.0, 2.0, 3.0], edges=[(0, 1), (1, 2)])
    b = make_graph([1.0, 2.0, 3.0], edges=[(0, 2)])
    x = feature_matrix(a)
    assert np.array_equal(forward_encoder(a, params, x).h, forward_encoder(b, params, x).h)


def chain(n):
    return make_graph([float(i + 1) for i in range(n)], edges=[(i, i + 1) for i in range(n - 1)])


def test_two_hop_reach():
    g = chain(5)
    params = init_params(3, PolicyHyper(1, 2, hidden=6, rounds=2))
    # make the encoder dense enough that the perturbation shows up
    params.v.rounds[0].b[...] = 1.0
    params.v.rounds[1].b[...] = 1.0
    x = feature_matrix(g)
    base = forward_encoder(g, params, x).h
    x2 = x.copy()
    x2[4] += 0.5
    moved = forward_encoder(g, params, x2).h
    assert not np.array_equal(base[2], moved[2])
    assert np.array_equal(base[:2], moved[:2])


@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(0, 6))
@settings(max_examples=60, deadline=None)
def test_locality(seed, rounds, node):
    g = chain(7)
    params = init_params(seed, PolicyHyper(1, 2, hidden=4, rounds=rounds))
    rng = np.random.default_rng(seed)
    x = feature_matrix(g)
    x2 = x.copy()
    x2[node] += rng.normal(size=x.shape[1])
    a, b = forward_encoder(g, params, x).h, forward_encoder(g, params, x2).h
    far = [i for i in range(7) if abs(i - node) > rounds]
    assert np.array_equal(a[far], b[far])


@given(st.integers(0, 10**6), st.data())
@settings(max_examples=40, deadline=None)
def test_permutation_consistency(seed, data):
    g = generate_synthetic(seed, 6, "random-dag")
    perm = data.draw(st.permutations(range(6)))  # old id -> new id
    nodes = sorted((Node(perm[nd.id], nd.op_type, nd.compute, nd.memory) for nd in g.nodes), key=lambda nd: nd.id)
    edges = tuple(Edge(perm[e.src], perm[e.dst], e.bytes) for e in g.edges)
    g2 = Graph(tuple(nodes), edges, g.kind, g.op_types)
    params = init_params(seed, PolicyHyper(3, 2, hidden=4, rounds=2))
    h, h2 = encode(g, params), encode(g2, params)
    assert np.allclose(h2[perm], h, rtol=0, atol=1e-13)


def test_greedy_ties_to_lowest_index():
    g = make_graph([1.0, 1.0])
    env = build_device_env(g, DeviceSpec(3))
    params = PolicyParams(PolicyHyper(1, 3, hidden=2, rounds=1), np.zeros(PolicyHyper(1, 3, hidden=2, rounds=1).size))
    assert sample_rollout(env, params, mode="greedy").actions == [0, 0]
    params.v.b[...] = [0.0, 1.0, 1.0]
    assert sample_rollout(env, params, mode="greedy").actions == [1, 1]


def test_sampling_is_seeded():
    g = generate_synthetic(1, 8, "random-dag")
    env = build_device_env(g, DeviceSpec(3))
    params = init_params(2, PolicyHyper(3, 3))
    a = sample_rollout(env, params, np.random.default_rng(5))
    b = sample_rollout(env, params, np.random.default_rng(5))
    assert a.actions == b.actions and a.logps == b.logps
    with pytest.raises(DimensionError):
        sample_rollout(env, init_params(2, PolicyHyper(3, 2)), np.random.default_rng(5))


def test_single_location_grad_is_zero():
    g = generate_synthetic(0, 4, "chain")
    env = build_device_env(g, DeviceSpec(1))
    params = init_params(0, PolicyHyper(3, 1))
    traj = sample_rollout(env, params, np.random.default_rng(0))
    assert traj.logp == 0
    assert not trajectory_grad(env, params, traj).any()


def logp_of(env, hyper, actions):
    def f(theta):
        params = PolicyParams(hyper, theta)
        h = encode(env.graph, params)
        s, total = env.initial_state(), 0.0
        for j in actions:
            _, lp = masked_softmax(params.v.a @ h[env.current_node(s)] + params.v.d * s.usage + params.v.b,
                                   env.mask(s))
            total += lp[j]
            s, _ = env.step(s, j)
        return total
    return f


def test_grad_matches_finite_differences():
    g = generate_synthetic(6, 4, "random-dag")
    env = build_device_env(g, DeviceSpec(3, mem_capacity=0.5 * g.memory.sum()))
    hyper = PolicyHyper(3, 3, hidden=4, rounds=2)
    params = init_params(4, hyper)
    params = params.with_theta(params.theta + np.random.default_rng(0).normal(0, 0.5, hyper.size))
    traj = sample_rollout(env, params, np.random.default_rng(1))
    analytic = trajectory_grad(env, params, traj)
    numeric = finite_diff_gradient(logp_of(env, hyper, traj.actions), params.theta, 1e-5)
    assert np.all(np.abs(analytic - numeric) / np.maximum(1, np.abs(analytic)) < 1e-4)


def test_params_file_roundtrip(tmp_path):
    params = init_params(3, PolicyHyper(2, 3, hidden=3, rounds=1, encoder="flat"))
    save_params(params, tmp_path / "p.json")
    back = load_params(tmp_path / "p.json")
    assert back.hyper == params.hyper and np.array_equal(back.theta, params.theta)
    assert dumps_params(back) == (tmp_path / "p.json").read_text()
    doc = params_to_dict(params)
    doc["weights"] = doc["weights"][:-1]
    with pytest.raises((ParseError, DimensionError)):
        params_from_dict(doc)


def test_layout_order():
    hyper = PolicyHyper(1, 2, hidden=2, rounds=1)
    vec = np.arange(hyper.size, dtype=float)
    v = views(hyper, vec)
    assert v.w_in.ravel().tolist() == [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
    assert v.rounds[0].w_self.ravel().tolist() == [10, 11, 12, 13]
    assert v.rounds[0].b.tolist() == [18, 19]
    assert v.a[0].tolist() == [20, 21] and v.d[0] == 22 and v.b[0] == 23
    assert v.a[1].tolist() == [24, 25] and v.d[1] == 26 and v.b[1] == 27
