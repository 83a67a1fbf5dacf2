"""Command-line entry points: train, eval, sweep.

Exit code 0 on success; on failure a single machine-readable line
`auviot-error: {...}` goes to stderr and the exit code is 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, load_config
from .harness import parse_policy_spec, run_eval, run_sweep, train_and_save

OUT_ROOT_ENV = "AUVIOT_OUT_ROOT"


def _resolve_out(path: str) -> str:
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auviot",
        description="Multi-AUV underwater-IoT simulator and PPO learner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a PPO policy")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--steps", type=int, default=None,
                         help="override ppo.total_env_steps")
    p_train.add_argument("--auvs", type=int, default=None)
    p_train.add_argument("--nodes", type=int, default=None)

    p_eval = sub.add_parser("eval", help="evaluate a policy over seeded episodes")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--policy", required=True,
                        choices=("ppo", "greedy", "random"))
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--episodes", type=int, required=True)
    p_eval.add_argument("--seed", type=int, required=True)
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--auvs", type=int, default=None)
    p_eval.add_argument("--nodes", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="policy x network-size comparison")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--nodes", required=True,
                         help="comma-separated node counts, e.g. 4,7,10")
    p_sweep.add_argument("--policies", required=True,
                         help="comma-separated specs: name[@n_auvs][:ckpt], "
                              "e.g. greedy,ppo@2:runs/ppo_k{nodes}.npz")
    p_sweep.add_argument("--episodes", type=int, default=None,
                         help="default: eval.episodes from the config")
    p_sweep.add_argument("--seed", type=int, default=None,
                         help="default: eval.seed from the config")
    p_sweep.add_argument("--out", default=None)
    return parser


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = _resolve_out(args.out)
    ckpt = train_and_save(cfg, out, n_auvs=args.auvs, n_nodes=args.nodes,
                          seed=args.seed, total_env_steps=args.steps)
    print(json.dumps({"checkpoint": ckpt, "out": out}))
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    out = _resolve_out(args.out if args.out is not None
                       else os.path.join(cfg.out_dir, f"eval-{args.policy}"))
    _, aggregate = run_eval(cfg, args.policy, args.episodes, args.seed,
                            out_dir=out, checkpoint=args.checkpoint,
                            n_auvs=args.auvs, n_nodes=args.nodes)
    print(json.dumps({"policy": args.policy, "out": out, **aggregate},
                     sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    nodes = [int(x) for x in args.nodes.split(",") if x]
    specs = [parse_policy_spec(x) for x in args.policies.split(",") if x]
    episodes = args.episodes if args.episodes is not None else cfg.eval.episodes
    seed = args.seed if args.seed is not None else cfg.eval.seed
    out = _resolve_out(args.out if args.out is not None
                       else os.path.join(cfg.out_dir, "sweep"))
    rows = run_sweep(cfg, nodes, specs, episodes, seed, out_dir=out)
    print(json.dumps({"out": os.path.join(out, "sweep.csv"), "rows": len(rows)}))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"auviot-error: "
              f"{json.dumps({'type': type(exc).__name__, 'message': str(exc)})}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
