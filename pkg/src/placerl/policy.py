"""Message-passing placement policy with a hand-written backward pass.

All learnable weights live in one flat float64 vector. The canonical layout
(also the order of ``weights`` in a parameter file) is:

    W_in                      F x D, row-major
    per round k < K:          W_self (D x D), W_nbr (D x D), b (D)
    per location j < M:       a_j (D), d_j, b_j

with F = op_types + 4. The Flat encoder has no rounds.

Forward, per node i and location j::

    h_i^0     = x_i @ W_in
    h_i^{k+1} = relu(h_i^k @ W_self + mean_{u in nbr(i)} h_u^k @ W_nbr + b)
    logit_j   = a_j . h_i + d_j * usage_j + b_j
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import PlacementEnv, StepState
from .errors import DeadEnd, DimensionError, ParseError
from .graph import Graph

EPS = 1e-12


class Encoder(str, enum.Enum):
    FLAT = "flat"
    MESSAGE_PASSING = "message-passing"


@dataclass(frozen=True)
class PolicyHyper:
    op_types: int
    locations: int
    hidden: int = 8
    rounds: int = 2
    encoder: Encoder = Encoder.MESSAGE_PASSING

    def __post_init__(self):
        object.__setattr__(self, "encoder", Encoder(self.encoder))
        if self.hidden < 1 or self.rounds < 1:
            raise DimensionError(f"hidden and rounds must be >= 1, got D={self.hidden}, K={self.rounds}")
        if self.op_types < 1 or self.locations < 1:
            raise DimensionError(f"op_types and locations must be >= 1, got T={self.op_types}, M={self.locations}")

    @property
    def features(self) -> int:
        return self.op_types + 4

    @property
    def active_rounds(self) -> int:
        return self.rounds if self.encoder is Encoder.MESSAGE_PASSING else 0

    @property
    def size(self) -> int:
        f, d = self.features, self.hidden
        return f * d + self.active_rounds * (2 * d * d + d) + self.locations * (d + 2)

    def to_dict(self) -> dict:
        return {"op_types": self.op_types, "locations": self.locations, "hidden": self.hidden,
                "rounds": self.rounds, "encoder": self.encoder.value}


class Round(NamedTuple):
    w_self: np.ndarray
    w_nbr: np.ndarray
    b: np.ndarray


class Views(NamedTuple):
    w_in: np.ndarray
    rounds: list[Round]
    a: np.ndarray  # M x D
    d: np.ndarray  # M
    b: np.ndarray  # M


def views(hyper: PolicyHyper, vec: np.ndarray) -> Views:
    """Named writable views into a flat vector laid out like the parameters."""
    f, d, m = hyper.features, hyper.hidden, hyper.locations
    off = f * d
    w_in = vec[:off].reshape(f, d)
    rounds = []
    for _ in range(hyper.active_rounds):
        w_self = vec[off:off + d * d].reshape(d, d)
        off += d * d
        w_nbr = vec[off:off + d * d].reshape(d, d)
        off += d * d
        rounds.append(Round(w_self, w_nbr, vec[off:off + d]))
        off += d
    head = vec[off:off + m * (d + 2)].reshape(m, d + 2)
    return Views(w_in, rounds, head[:, :d], head[:, d], head[:, d + 1])


@dataclass
class PolicyParams:
    hyper: PolicyHyper
    theta: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.hyper.size,):
            raise DimensionError(f"expected {self.hyper.size} weights for {self.hyper}, got {self.theta.shape}")

    @property
    def v(self) -> Views:
        return views(self.hyper, self.theta)

    def copy(self) -> PolicyParams:
        return PolicyParams(self.hyper, self.theta.copy())

    def with_theta(self, theta) -> PolicyParams:
        return PolicyParams(self.hyper, np.array(theta, dtype=float))


def init_params(seed: int, hyper: PolicyHyper) -> PolicyParams:
    """Uniform(-1/sqrt(D), 1/sqrt(D)) weights, zero head biases.

    The head's ``a`` and ``d`` are drawn once and copied to every location,
    so a fresh policy treats all locations alike until training separates
    them.
    """
    rng = np.random.default_rng(seed)
    s = 1.0 / math.sqrt(hyper.hidden)
    theta = np.zeros(hyper.size)
    v = views(hyper, theta)
    v.w_in[...] = rng.uniform(-s, s, size=v.w_in.shape)
    for r in v.rounds:
        r.w_self[...] = rng.uniform(-s, s, size=r.w_self.shape)
        r.w_nbr[...] = rng.uniform(-s, s, size=r.w_nbr.shape)
        r.b[...] = rng.uniform(-s, s, size=r.b.shape)
    v.a[...] = rng.uniform(-s, s, size=hyper.hidden)
    v.d[...] = rng.uniform(-s, s)
    return PolicyParams(hyper, theta)


def params_to_dict(params: PolicyParams) -> dict:
    return {"hyper": params.hyper.to_dict(), "weights": [float(x) for x in params.theta]}


def params_from_dict(doc) -> PolicyParams:
    if not isinstance(doc, dict) or set(doc) != {"hyper", "weights"}:
        raise ParseError("parameter file must be an object with exactly 'hyper' and 'weights'")
    h = doc["hyper"]
    keys = {"op_types", "locations", "hidden", "rounds", "encoder"}
    if not isinstance(h, dict) or set(h) != keys:
        raise ParseError(f"hyper block must have exactly the keys {sorted(keys)}")
    try:
        hyper = PolicyHyper(**h)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad hyper block: {exc}") from None
    w = np.asarray(doc["weights"], dtype=float)
    if not np.all(np.isfinite(w)):
        raise ParseError("weights must be finite")
    return PolicyParams(hyper, w)


def dumps_params(params: PolicyParams) -> str:
    return json.dumps(params_to_dict(params), indent=1) + "\n"


def save_params(params: PolicyParams, path) -> None:
    Path(path).write_text(dumps_params(params))


def load_params(path) -> PolicyParams:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return params_from_dict(doc)


# --- features and encoder ---------------------------------------------------

def feature_matrix(g: Graph) -> np.ndarray:
    """N x (T + 4): one-hot op type, then compute, memory, in/out degree scaled by graph maxima."""
    x = np.zeros((g.n, g.op_types + 4))
    x[np.arange(g.n), g.op_type] = 1.0
    t = g.op_types
    max_deg = max(g.in_degree.max(), g.out_degree.max(), EPS)
    x[:, t] = g.compute / max(g.compute.max(), EPS)
    x[:, t + 1] = g.memory / max(g.memory.max(), EPS)
    x[:, t + 2] = g.in_degree / max_deg
    x[:, t + 3] = g.out_degree / max_deg
    return x


def node_features(g: Graph, i: int) -> np.ndarray:
    if not 0 <= i < g.n:
        raise IndexError(f"node {i} out of range for graph with {g.n} nodes")
    return feature_matrix(g)[i]


@dataclass
class Encoding:
    """Forward activations kept for the backward pass."""

    x: np.ndarray
    adj: np.ndarray
    hs: list[np.ndarray]  # h^0 .. h^K
    pres: list[np.ndarray]  # pre-activations of each round
    base: np.ndarray  # N x M usage-independent part of the logits
    d: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return self.hs[-1]


def forward_encoder(g: Graph, params: PolicyParams, x: np.ndarray | None = None) -> Encoding:
    hyper = params.hyper
    if g.op_types != hyper.op_types:
        raise DimensionError(f"graph has {g.op_types} op types, policy expects {hyper.op_types}")
    if x is None:
        x = feature_matrix(g)
    v = params.v
    adj = g.mean_adjacency
    h = x @ v.w_in
    hs, pres = [h], []
    for r in v.rounds:
        pre = h @ r.w_self + (adj @ h) @ r.w_nbr + r.b
        h = np.maximum(pre, 0.0)
        pres.append(pre)
        hs.append(h)
    return Encoding(x, adj, hs, pres, h @ v.a.T + v.b, v.d.copy())


def encode(g: Graph, params: PolicyParams) -> np.ndarray:
    return forward_encoder(g, params).h


def _encoder_backward(params: PolicyParams, enc: Encoding, dh: np.ndarray, grad: Views) -> None:
    v = params.v
    for k in reversed(range(len(v.rounds))):
        r, gr = v.rounds[k], grad.rounds[k]
        dpre = dh * (enc.pres[k] > 0)
        h = enc.hs[k]
        gr.w_self[...] += h.T @ dpre
        gr.w_nbr[...] += (enc.adj @ h).T @ dpre
        gr.b[...] += dpre.sum(axis=0)
        dh = dpre @ r.w_self.T + enc.adj.T @ (dpre @ r.w_nbr.T)
    grad.w_in[...] += enc.x.T @ dh


# --- action head ------------------------------------------------------------

def head_logits(params: PolicyParams, h: np.ndarray, usage: np.ndarray) -> np.ndarray:
    v = params.v
    return v.a @ h + v.d * usage + v.b


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities and log-probabilities; masked entries get exactly 0 and -inf.

    Works row-wise on 2-d input.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise DeadEnd("every location is masked")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    total = e.sum(axis=-1, keepdims=True)
    return e / total, z - np.log(total)


def action_distribution(params: PolicyParams, h: np.ndarray, state: StepState, mask) -> np.ndarray:
    return masked_softmax(head_logits(params, h, state.usage), mask)[0]


# --- rollouts ---------------------------------------------------------------

@dataclass
class Trajectory:
    """One episode. An aborted episode has one more reward than actions: the dead-end penalty.

    ``usages`` and ``masks`` record the head inputs at each step so the
    gradient does not need to replay the environment.
    """

    actions: list[int]
    logps: list[float]
    step_rewards: list[float]
    aborted: bool
    placement: np.ndarray = field(repr=False)
    entropies: list[float] = field(default_factory=list, repr=False)
    usages: list[np.ndarray] | None = field(default=None, repr=False)
    masks: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def episode_return(self) -> float:
        return math.fsum(self.step_rewards)

    @property
    def logp(self) -> float:
        return math.fsum(self.logps)


def check_compatible(env: PlacementEnv, params: PolicyParams) -> None:
    h = params.hyper
    if env.m != h.locations or env.graph.op_types != h.op_types:
        raise DimensionError(
            f"environment has M={env.m}, T={env.graph.op_types}; "
            f"policy has M={h.locations}, T={h.op_types}")


def sample_rollout(env: PlacementEnv, params: PolicyParams, rng: np.random.Generator | None = None,
                   mode: str = "sample", enc: Encoding | None = None) -> Trajectory:
    """Place every node in ``env.order``. ``mode`` is "sample" or "greedy" (ties to the lowest index)."""
    check_compatible(env, params)
    if mode not in ("sample", "greedy"):
        raise ValueError(f"mode must be 'sample' or 'greedy', got {mode!r}")
    if mode == "sample" and rng is None:
        raise ValueError("sampling needs a random generator")
    enc = enc or forward_encoder(env.graph, params)
    s = env.initial_state()
    actions, logps, rewards, ents, usages, masks = [], [], [], [], [], []
    while not env.done(s):
        mask = env.mask(s)
        if not mask.any():
            rewards.append(env.dead_end_reward(s))
            return Trajectory(actions, logps, rewards, True, s.partial, ents, usages, masks)
        p, logp = masked_softmax(enc.base[env.current_node(s)] + enc.d * s.usage, mask)
        if mode == "greedy":
            j = int(np.argmax(p))
        else:
            j = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
            if j >= env.m or not mask[j]:
                j = int(np.flatnonzero(mask)[-1])
        usages.append(s.usage)
        masks.append(mask)
        s, r = env.step(s, j)
        actions.append(j)
        logps.append(float(logp[j]))
        rewards.append(r)
        ents.append(float(-(p[mask] * logp[mask]).sum()))
    return Trajectory(actions, logps, rewards, False, s.partial, ents, usages, masks)


def replay(env: PlacementEnv, actions) -> list[tuple[int, StepState, np.ndarray]]:
    """(node, state, mask) before each recorded action."""
    s = env.initial_state()
    out = []
    for j in actions:
        mask = env.mask(s)
        out.append((env.current_node(s), s, mask))
        s, _ = env.step(s, j)
    return out


def _step_inputs(env: PlacementEnv, traj) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, usages, masks and actions of each step, as arrays."""
    if isinstance(traj, Trajectory):
        actions = traj.actions
        if traj.usages is not None and len(traj.usages) == len(actions):
            t = len(actions)
            return (np.array(env.order[:t], dtype=int), np.array(traj.usages).reshape(t, env.m),
                    np.array(traj.masks, dtype=bool).reshape(t, env.m), np.array(actions, dtype=int))
    else:
        actions = list(traj)
    steps = replay(env, actions)
    t = len(steps)
    return (np.array([i for i, _, _ in steps], dtype=int),
            np.array([s.usage for _, s, _ in steps]).reshape(t, env.m),
            np.array([m for _, _, m in steps], dtype=bool).reshape(t, env.m),
            np.array(actions, dtype=int))


def trajectory_grad(env: PlacementEnv, params: PolicyParams, traj: Trajectory | list[int],
                    enc: Encoding | None = None) -> np.ndarray:
    """Gradient of the trajectory's total log-probability, flat in parameter layout."""
    return weighted_logp_grad(env, params, [traj], [1.0], enc)


def weighted_logp_grad(env: PlacementEnv, params: PolicyParams, trajs, weights,
                       enc: Encoding | None = None, entropy_weight: float = 0.0) -> np.ndarray:
    """sum_b w_b * grad log pi(traj_b), plus entropy_weight * grad of the mean per-step entropy.

    ``trajs`` holds Trajectory objects or plain action lists. All steps share
    one backward pass through the encoder.
    """
    check_compatible(env, params)
    enc = enc or forward_encoder(env.graph, params)
    v = params.v
    grad = np.zeros_like(params.theta)
    gv = views(params.hyper, grad)
    parts = [_step_inputs(env, t) for t in trajs]
    if not parts or sum(len(p[0]) for p in parts) == 0:
        return grad
    nodes = np.concatenate([p[0] for p in parts])
    usage = np.concatenate([p[1] for p in parts])
    mask = np.concatenate([p[2] for p in parts])
    acts = np.concatenate([p[3] for p in parts])
    w = np.concatenate([np.full(len(p[0]), wt, dtype=float) for p, wt in zip(parts, weights)])
    rows = np.arange(len(nodes))

    prob, logp = masked_softmax(enc.base[nodes] + enc.d * usage, mask)
    dz = -w[:, None] * prob
    dz[rows, acts] += w
    if entropy_weight:
        lp = np.where(mask, logp, 0.0)
        ent = -(prob * lp).sum(axis=1, keepdims=True)
        dz += (entropy_weight / len(nodes)) * (-prob * (lp + ent))

    h = enc.h
    gv.a[...] += dz.T @ h[nodes]
    gv.d[...] += (dz * usage).sum(axis=0)
    gv.b[...] += dz.sum(axis=0)
    dh = np.zeros_like(h)
    np.add.at(dh, nodes, dz @ v.a)
    _encoder_backward(params, enc, dh, gv)
    return grad
