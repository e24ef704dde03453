"""REINFORCE training over one or several placement environments."""

from __future__ import annotations

import csv
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import PlacementEnv
from .errors import DimensionError, NoFeasibleSample, NonFiniteGradient
from .policy import (PolicyHyper, PolicyParams, Trajectory, check_compatible, forward_encoder,
                     init_params, sample_rollout, trajectory_grad, weighted_logp_grad)

HISTORY_FIELDS = ("iter", "mean_return", "best_return", "baseline", "mean_entropy", "abort_rate")
NORM_WINDOW = 100
STD_FLOOR = 1e-6


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 0.1
    batch_size: int = 16
    iterations: int = 200
    baseline_decay: float = 0.9
    entropy_weight: float = 0.0
    grad_clip_norm: float | None = None
    discount: float = 1.0
    seed: int = 0
    eval_samples: int = 16
    normalize_returns: bool | None = None  # None: only when training on several graphs
    threads: int = 1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if not 0 <= self.baseline_decay < 1:
            raise ValueError(f"baseline_decay must lie in [0, 1), got {self.baseline_decay}")
        if not self.entropy_weight >= 0:
            raise ValueError(f"entropy_weight must be >= 0, got {self.entropy_weight}")
        if self.grad_clip_norm is not None and not self.grad_clip_norm > 0:
            raise ValueError(f"grad_clip_norm must be > 0 or None, got {self.grad_clip_norm}")
        if not 0 < self.discount <= 1:
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")
        if self.eval_samples < 0 or self.threads < 1:
            raise ValueError("eval_samples must be >= 0 and threads >= 1")


@dataclass(frozen=True)
class IterRecord:
    iter: int
    mean_return: float
    best_return: float
    baseline: float
    mean_entropy: float
    abort_rate: float


@dataclass
class TrainResult:
    params: PolicyParams
    history: list[IterRecord]
    best_placements: list[np.ndarray | None]
    best_returns: list[float]


def episode_return(traj: Trajectory, gamma: float = 1.0) -> float:
    return math.fsum(gamma**t * r for t, r in enumerate(traj.step_rewards))


def baseline_update(b: float | None, batch_mean_return: float, decay: float) -> float:
    if b is None:
        return batch_mean_return
    return decay * b + (1.0 - decay) * batch_mean_return


def reinforce_update(params: PolicyParams, grads, returns, baseline: float, cfg: TrainerConfig,
                     entropy_grad: np.ndarray | None = None) -> tuple[PolicyParams, dict]:
    """One ascent step along mean_b (R_b - b) grad log pi_b (+ entropy bonus).

    ``grads`` holds one log-probability gradient per trajectory.
    """
    if len(grads) == 0 or len(grads) != len(returns):
        raise ValueError(f"need one gradient per return, got {len(grads)} and {len(returns)}")
    adv = np.asarray(returns, dtype=float) - baseline
    g = (adv[:, None] * np.asarray(grads)).sum(axis=0) / len(grads)
    if cfg.entropy_weight and entropy_grad is not None:
        g = g + cfg.entropy_weight * entropy_grad
    norm = float(np.linalg.norm(g))
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NonFiniteGradient(f"non-finite gradient at {bad.size} coordinates (first {bad[:5].tolist()}); "
                                f"returns={list(returns)[:8]}, baseline={baseline}")
    scale = 1.0
    if cfg.grad_clip_norm is not None and norm > cfg.grad_clip_norm:
        scale = cfg.grad_clip_norm / norm
    new = params.with_theta(params.theta + cfg.learning_rate * scale * g)
    return new, {"grad_norm": norm, "applied_norm": norm * scale}


class _Normalizer:
    def __init__(self, k: int):
        self.windows = [deque(maxlen=NORM_WINDOW) for _ in range(k)]

    def __call__(self, k: int, returns: list[float]) -> np.ndarray:
        w = self.windows[k]
        w.extend(returns)
        arr = np.array(w)
        return (np.asarray(returns) - arr.mean()) / max(float(arr.std()), STD_FLOOR)


def _rollout_rng(seed: int, it: int, b: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, it, b)))


def train(envs: PlacementEnv | list[PlacementEnv], hyper: PolicyHyper, cfg: TrainerConfig,
          params: PolicyParams | None = None) -> TrainResult:
    """Train one policy; with several environments each iteration samples one uniformly."""
    envs = [envs] if isinstance(envs, PlacementEnv) else list(envs)
    if not envs:
        raise ValueError("need at least one environment")
    params = params.copy() if params is not None else init_params(cfg.seed, hyper)
    if params.hyper != hyper:
        raise DimensionError(f"initial params have {params.hyper}, expected {hyper}")
    for env in envs:
        check_compatible(env, params)
    normalize = cfg.normalize_returns if cfg.normalize_returns is not None else len(envs) > 1
    norm = _Normalizer(len(envs))
    picker = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None

    baseline: float | None = None
    best = -math.inf
    best_returns = [-math.inf] * len(envs)
    best_placements: list[np.ndarray | None] = [None] * len(envs)
    history: list[IterRecord] = []
    try:
        for it in range(cfg.iterations):
            k = int(picker.integers(len(envs))) if len(envs) > 1 else 0
            env = envs[k]
            enc = forward_encoder(env.graph, params)
            current = params

            def one(b, env=env, enc=enc, current=current, it=it):
                traj = sample_rollout(env, current, _rollout_rng(cfg.seed, it, b), "sample", enc)
                return traj, trajectory_grad(env, current, traj, enc)

            results = list(pool.map(one, range(cfg.batch_size)) if pool else map(one, range(cfg.batch_size)))
            trajs = [t for t, _ in results]
            grads = [g for _, g in results]
            returns = [episode_return(t, cfg.discount) for t in trajs]
            mean_return = math.fsum(returns) / len(returns)

            if normalize:
                used, b_used = norm(k, returns), 0.0
            else:
                used, b_used = returns, (baseline if baseline is not None else mean_return)
            baseline = baseline_update(baseline, mean_return, cfg.baseline_decay)

            ent_grad = None
            if cfg.entropy_weight:
                ent_grad = weighted_logp_grad(env, params, [t.actions for t in trajs], [0.0] * len(trajs),
                                              enc, entropy_weight=1.0)
            params, _ = reinforce_update(params, grads, used, b_used, cfg, ent_grad)

            for t, r in zip(trajs, returns):
                if not t.aborted and r > best_returns[k]:
                    best_returns[k] = r
                    best_placements[k] = t.placement.copy()
            best = max(best, max(best_returns))
            steps = [e for t in trajs for e in t.entropies]
            history.append(IterRecord(
                iter=it,
                mean_return=mean_return,
                best_return=best,
                baseline=baseline,
                mean_entropy=math.fsum(steps) / len(steps) if steps else 0.0,
                abort_rate=sum(t.aborted for t in trajs) / len(trajs),
            ))
    finally:
        if pool:
            pool.shutdown()
    return TrainResult(params, history, best_placements, best_returns)


@dataclass
class EvalResult:
    best_placement: np.ndarray
    best_return: float
    greedy_return: float
    greedy_placement: np.ndarray = field(repr=False)
    greedy_aborted: bool = False


def evaluate(params: PolicyParams, env: PlacementEnv, eval_samples: int = 0, seed: int = 0,
             gamma: float = 1.0) -> EvalResult:
    """Best feasible rollout among the greedy decode and ``eval_samples`` sampled ones."""
    enc = forward_encoder(env.graph, params)
    greedy = sample_rollout(env, params, mode="greedy", enc=enc)
    greedy_ret = episode_return(greedy, gamma)
    rng = np.random.default_rng(seed)
    best_t, best_r = (greedy, greedy_ret) if not greedy.aborted else (None, -math.inf)
    for _ in range(eval_samples):
        t = sample_rollout(env, params, rng, "sample", enc)
        r = episode_return(t, gamma)
        if not t.aborted and r > best_r:
            best_t, best_r = t, r
    if best_t is None:
        raise NoFeasibleSample(f"all {eval_samples + 1} evaluation rollouts hit a dead end")
    return EvalResult(best_t.placement.copy(), best_r, greedy_ret, greedy.placement.copy(), greedy.aborted)


# --- history CSV ------------------------------------------------------------

def _fmt(x: float) -> str:
    return str(int(x)) if isinstance(x, int) else f"{x:.9g}"


def history_rows(history: list[IterRecord]) -> list[list[str]]:
    return [[_fmt(getattr(r, f)) for f in HISTORY_FIELDS] for r in history]


def write_history_csv(history: list[IterRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        w.writerows(history_rows(history))


def read_history_csv(path) -> list[IterRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HISTORY_FIELDS:
            raise ValueError(f"unexpected history header {reader.fieldnames}")
        return [IterRecord(int(row["iter"]), *(float(row[f]) for f in HISTORY_FIELDS[1:])) for row in reader]
