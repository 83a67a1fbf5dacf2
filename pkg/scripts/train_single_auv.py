#!/usr/bin/env python3
"""Train a single-AUV policy with the desk-scale trainer config and report
how it compares with the greedy and random baselines on common seeds.

Usage: python scripts/train_single_auv.py [--nodes 7] [--steps 250000]
       [--seed 0] [--out runs/single]
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from auviot.config import load_config
from auviot.harness import (
    episode_metrics,
    episode_seeds,
    make_policy,
    make_simulator,
    run_episode,
    train_and_save,
)

CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs",
                      "desk_trainer.yaml")


def compare(cfg, sim, policies, n_episodes, seed):
    print(f"{'policy':<8} {'mean AoI':>9} {'final Jain':>11} {'Mbit':>6} "
          f"{'docked':>7} {'reward':>9}")
    for name, policy in policies.items():
        rows = []
        for child in episode_seeds(seed, n_episodes):
            rng = np.random.default_rng(child)
            states, outcomes = run_episode(sim, policy, rng)
            rows.append(episode_metrics(states, outcomes, cfg.reward.lambda_f))
        print(f"{name:<8} {np.mean([m.mean_aoi for m in rows]):>9.2f} "
              f"{np.mean([m.final_jain for m in rows]):>11.3f} "
              f"{np.mean([m.total_bits for m in rows])/1e6:>6.2f} "
              f"{np.mean([sum(m.dock_flags) for m in rows]):>7.2f} "
              f"{np.mean([m.total_reward for m in rows]):>9.1f}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", default=CONFIG)
    parser.add_argument("--nodes", type=int, default=None)
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--episodes", type=int, default=20)
    parser.add_argument("--out", default="runs/single")
    args = parser.parse_args()

    cfg = load_config(args.config)
    print(f"training (steps={args.steps or cfg.ppo.total_env_steps}, "
          f"nodes={args.nodes or cfg.scenario.n_nodes}) ...")
    ckpt = train_and_save(cfg, args.out, n_nodes=args.nodes, seed=args.seed,
                          total_env_steps=args.steps)
    print(f"checkpoint: {ckpt}")

    sim = make_simulator(cfg, n_nodes=args.nodes)
    policies = {
        "ppo": make_policy("ppo", sim, checkpoint=ckpt),
        "greedy": make_policy("greedy", sim),
        "random": make_policy("random", sim),
    }
    compare(cfg, sim, policies, args.episodes, cfg.eval.seed)


if __name__ == "__main__":
    main()
