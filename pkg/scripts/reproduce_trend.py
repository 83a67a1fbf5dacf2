#!/usr/bin/env python3
"""Reproduce the network-size comparison: train PPO with 1 and 2 AUVs for
each node count, then sweep greedy and both learners over common seeds and
write a tidy CSV (one row per policy/size/episode).

Usage: python scripts/reproduce_trend.py [--nodes 4,7] [--episodes 20]
       [--seed 2026] [--out runs/trend]

This is the long experiment (tens of minutes at the default budgets).
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from auviot.config import load_config
from auviot.harness import PolicySpec, run_sweep, train_and_save

CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs",
                      "desk_trainer.yaml")

# Shaping mixes that converge at desk scale: mission-paced for one AUV,
# stricter regularization for the joint two-AUV policy.
REWARD_1AUV = {"alpha_f": 3.0, "alpha_m": 0.05}
REWARD_2AUV = {"alpha_f": 4.0, "alpha_m": 0.01}
STEPS_1AUV = 250_000
STEPS_2AUV = 450_000


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", default=CONFIG)
    parser.add_argument("--nodes", default="4,7")
    parser.add_argument("--episodes", type=int, default=20)
    parser.add_argument("--seed", type=int, default=2026)
    parser.add_argument("--out", default="runs/trend")
    args = parser.parse_args()

    nodes = [int(x) for x in args.nodes.split(",")]
    cfg = load_config(args.config)

    for k in nodes:
        for n_auvs, overrides, steps in ((1, REWARD_1AUV, STEPS_1AUV),
                                         (2, REWARD_2AUV, STEPS_2AUV)):
            out = os.path.join(args.out, f"ppo_n{n_auvs}_k{k}")
            if os.path.exists(os.path.join(out, "checkpoint.npz")):
                print(f"reusing {out}")
                continue
            train_cfg = load_config(args.config)
            for key, val in overrides.items():
                setattr(train_cfg.reward, key, val)
            train_cfg.ppo.total_env_steps = steps
            print(f"training n_auvs={n_auvs} k={k} ({steps} steps) ...")
            train_and_save(train_cfg, out, n_auvs=n_auvs, n_nodes=k)

    ckpt = os.path.join(args.out, "ppo_n{auvs}_k{nodes}", "checkpoint.npz")
    specs = [
        PolicySpec(name="greedy", n_auvs=1, label="greedy"),
        PolicySpec(name="ppo", n_auvs=1, label="ppo-1auv",
                   checkpoint=ckpt.replace("{auvs}", "1")),
        PolicySpec(name="ppo", n_auvs=2, label="ppo-2auv",
                   checkpoint=ckpt.replace("{auvs}", "2")),
    ]
    rows = run_sweep(cfg, nodes, specs, args.episodes, args.seed,
                     out_dir=args.out)
    print(f"wrote {os.path.join(args.out, 'sweep.csv')} ({len(rows)} rows)")

    for k in nodes:
        for label in ("greedy", "ppo-1auv", "ppo-2auv"):
            sub = [r for r in rows if r["n_nodes"] == k and r["policy"] == label]
            aoi = sum(r["mean_aoi"] for r in sub) / len(sub)
            jain = sum(r["final_jain"] for r in sub) / len(sub)
            bits = sum(r["total_bits"] for r in sub) / len(sub)
            print(f"K={k} {label:<9} mean AoI {aoi:6.2f}  "
                  f"final Jain {jain:5.3f}  Mbit {bits/1e6:5.2f}")


if __name__ == "__main__":
    main()
