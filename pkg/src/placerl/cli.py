"""Command-line entry point: ``placerl {train,eval,gen,oracle}``.

Failures print one line ``ERROR <code>: <message>`` to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .config import load_config, make_env, parse_reward
from .env_device import DeviceSpec
from .env_grid import GridSpec
from .errors import DimensionError, PlacementError
from .graph import Family, GenParams, GraphKind, generate_synthetic, load_graph, save_graph
from .oracle import DEFAULT_LIMIT, oracle_report
from .policy import check_compatible, load_params, save_params
from .trainer import evaluate, train, write_history_csv


def _json_default(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, default=_json_default, allow_nan=True)


def _add_env_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("environment")
    g.add_argument("--devices", type=int, help="device count M (default: from params, else 2)")
    g.add_argument("--capacity", type=float, default=math.inf, help="memory per device (default unlimited)")
    g.add_argument("--bandwidth", type=float, default=1.0)
    g.add_argument("--width", type=int, help="grid width (default: M)")
    g.add_argument("--height", type=int, default=1)
    g.add_argument("--cell-capacity", type=int, default=1)
    g.add_argument("--density-weight", type=float, default=1.0)
    g.add_argument("--step-rewards", action="store_true")
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--beta", type=float, default=0.5)
    g.add_argument("--lambda", dest="lam", type=float, default=10.0)
    g.add_argument("--shaping", choices=["identity", "sqrt"], default="identity")
    g.add_argument("--constraint-mode", choices=["mask", "penalty"], default="mask")


def _env_from_flags(args, graph, params=None):
    reward = parse_reward({"alpha": args.alpha, "beta": args.beta, "lambda": args.lam,
                           "shaping": args.shaping, "constraint_mode": args.constraint_mode})
    m_params = params.hyper.locations if params is not None else None
    if graph.kind is GraphKind.DEVICE:
        m = args.devices or m_params or 2
        return make_env(graph, graph.kind, DeviceSpec(m, args.capacity, args.bandwidth), None, reward)
    width = args.width or (m_params // args.height if m_params else 2)
    grid = GridSpec(width, args.height, args.cell_capacity, args.density_weight)
    return make_env(graph, graph.kind, None, grid, reward, args.step_rewards)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    trainer = cfg.trainer
    if args.threads:
        from dataclasses import replace
        trainer = replace(trainer, threads=args.threads)
    envs = cfg.build_envs()
    res = train(envs, cfg.hyper(), trainer)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    save_params(res.params, out / "params.json")
    write_history_csv(res.history, out / "history.csv")
    best = [{"graph": str(p), "return": r if math.isfinite(r) else None,
             "placement": None if pl is None else pl.tolist()}
            for p, r, pl in zip(cfg.graph_paths, res.best_returns, res.best_placements)]
    (out / "best_placement.json").write_text(json.dumps({"graphs": best}, indent=1) + "\n")
    print(_dump({"output_dir": str(out), "iterations": len(res.history),
                 "best_return": res.history[-1].best_return if res.history else None}))
    return 0


def cmd_eval(args) -> int:
    params = load_params(args.params)
    graph = load_graph(args.graph)
    env = _env_from_flags(args, graph, params)
    try:
        check_compatible(env, params)
    except DimensionError as exc:
        raise DimensionError(f"{exc} (graph {args.graph}, params {args.params})") from None
    res = evaluate(params, env, args.samples, args.seed)
    print(_dump({"greedy_return": res.greedy_return, "best_return": res.best_return,
                 "best_placement": res.best_placement}))
    return 0


def cmd_gen(args) -> int:
    params = GenParams(kind=GraphKind(args.kind), op_types=args.op_types, edge_prob=args.edge_prob,
                       layers=args.layers)
    g = generate_synthetic(args.seed, args.nodes, Family(args.family), params)
    save_graph(g, args.out)
    print(_dump({"N": g.n, "edges": len(g.edges), "out": str(args.out)}))
    return 0


def cmd_oracle(args) -> int:
    graph = load_graph(args.graph)
    params = load_params(args.params) if args.params else None
    env = _env_from_flags(args, graph, params)
    if params is not None:
        check_compatible(env, params)
    print(_dump(oracle_report(env, params, args.limit)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="placerl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy from a run config")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--threads", type=int, default=0, help="parallel rollouts (default: config value)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy + sampled evaluation of saved params")
    p.add_argument("--params", required=True, type=Path)
    p.add_argument("--graph", required=True, type=Path)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    _add_env_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="write a synthetic graph")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--family", choices=[f.value for f in Family], required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--kind", choices=["device", "grid"], default="device")
    p.add_argument("--op-types", type=int, default=3)
    p.add_argument("--edge-prob", type=float, default=0.3)
    p.add_argument("--layers", type=int, default=3)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("oracle", help="exhaustive enumeration report")
    p.add_argument("--graph", required=True, type=Path)
    p.add_argument("--params", type=Path)
    p.add_argument("--limit", type=int, default=DEFAULT_LIMIT)
    _add_env_flags(p)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PlacementError as exc:
        msg, code = str(exc), exc.code
    except FileNotFoundError as exc:
        msg, code = (f"{exc.strerror}: {exc.filename}" if exc.filename else str(exc)), "FileNotFound"
    except (ValueError, OSError) as exc:
        msg, code = str(exc), type(exc).__name__
    print(f"ERROR {code}: {' '.join(msg.split())}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
