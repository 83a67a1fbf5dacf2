"""Experiment orchestration: seeded episode rollouts, metric aggregation,
and deterministic CSV trace emission.

Every output file is byte-reproducible under a fixed seed and config:
floats are written with Python's shortest round-trip repr and no
timestamps or machine identifiers appear anywhere.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .codec import CodecSpec, decode_action, encode_state, schema_hash
from .config import ExperimentConfig
from .dynamics import (
    ScenarioParams,
    SimParams,
    WorldState,
    jain_index,
    make_initial_state,
    objective_value,
    step,
)
from .policies import GreedyPolicy, PpoPolicy, RandomPolicy
from .ppo import load_checkpoint, save_checkpoint, train
from .ppo import PpoConfig  # noqa: F401  (re-exported for script convenience)

POLICY_NAMES = ("ppo", "greedy", "random")


class CheckpointError(RuntimeError):
    pass


class Simulator:
    """Binds parameters and codec into a reset/step episode interface."""

    def __init__(self, sim: SimParams, scenario: ScenarioParams, spec: CodecSpec):
        self.sim = sim
        self.scenario = scenario
        self.spec = spec

    def reset(self, rng: np.random.Generator):
        state = make_initial_state(self.scenario, self.sim.motion, rng)
        return state, encode_state(state, self.spec)

    def step(self, state: WorldState, action_indices):
        decoded = [decode_action(a, self.spec, self.sim.motion)
                   for a in action_indices]
        outcome = step(state, decoded, self.sim)
        return outcome, encode_state(outcome.next, self.spec)


@dataclass
class EpisodeMetrics:
    mean_aoi: float
    final_jain: float
    total_bits: float
    propulsion_j: float
    dock_flags: tuple
    episode_len: int
    objective: float
    total_reward: float

    def row(self) -> dict:
        return {
            "mean_aoi": self.mean_aoi,
            "final_jain": self.final_jain,
            "total_bits": self.total_bits,
            "propulsion_j": self.propulsion_j,
            "n_docked": sum(self.dock_flags),
            "all_docked": int(all(self.dock_flags)),
            "episode_len": self.episode_len,
            "objective": self.objective,
            "total_reward": self.total_reward,
        }


def make_simulator(cfg: ExperimentConfig, n_auvs: int | None = None,
                   n_nodes: int | None = None) -> Simulator:
    scenario = ScenarioParams(**{**vars(cfg.scenario)})
    if n_auvs is not None:
        scenario.n_auvs = n_auvs
    if n_nodes is not None:
        scenario.n_nodes = n_nodes
    spec = cfg.codec_spec(n_auvs=scenario.n_auvs, n_nodes=scenario.n_nodes)
    return Simulator(cfg.sim_params(), scenario, spec)


def make_policy(name: str, sim: Simulator, checkpoint=None):
    """Instantiate a policy by name against a simulator's codec."""
    if name == "greedy":
        return GreedyPolicy(sim.spec, sim.sim.motion)
    if name == "random":
        return RandomPolicy(sim.spec)
    if name == "ppo":
        if checkpoint is None:
            raise CheckpointError("ppo policy needs a checkpoint")
        params, meta = load_checkpoint(checkpoint)
        expected = schema_hash(sim.spec)
        if meta["schema_hash"] != expected:
            raise CheckpointError(
                f"checkpoint codec schema {meta['schema_hash'][:12]} does not "
                f"match the configured codec {expected[:12]}; refusing to run")
        return PpoPolicy(params, sim.spec)
    raise ValueError(f"unknown policy {name!r}; choose from {POLICY_NAMES}")


def run_episode(sim: Simulator, policy, rng: np.random.Generator):
    """One seeded episode; returns (state trace incl. slot 0, outcome list)."""
    policy.reset(rng)
    state, _ = sim.reset(rng)
    states = [state]
    outcomes = []
    done = False
    while not done:
        actions = policy.act(state)
        outcome, _ = sim.step(state, actions)
        outcomes.append(outcome)
        state = outcome.next
        states.append(state)
        done = outcome.done
    return states, outcomes


def episode_metrics(states, outcomes, lambda_f: float) -> EpisodeMetrics:
    post = states[1:]
    mean_aoi = float(np.mean([np.mean([nd.aoi for nd in st.nodes]) for st in post]))
    final = states[-1]
    return EpisodeMetrics(
        mean_aoi=mean_aoi,
        final_jain=jain_index([nd.service_count for nd in final.nodes]),
        total_bits=float(sum(nd.bits_collected for nd in final.nodes)),
        propulsion_j=float(sum(ev.propulsion_j for oc in outcomes
                               for ev in oc.events)),
        dock_flags=tuple(a.docked for a in final.auvs),
        episode_len=len(outcomes),
        objective=objective_value(post, lambda_f),
        total_reward=float(sum(oc.reward for oc in outcomes)))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_trace_csv(path, states, outcomes) -> None:
    """Full per-slot trace: AUV pose/battery, node AoI/energy, reward terms,
    and per-AUV events. Row 0 is the initial state with blank step fields."""
    n = len(states[0].auvs)
    k = len(states[0].nodes)
    cols = ["t"]
    for i in range(n):
        cols += [f"auv{i}_{c}" for c in
                 ("x", "y", "heading", "speed", "battery_j", "docked")]
    for kk in range(k):
        cols += [f"node{kk}_aoi", f"node{kk}_energy_j", f"node{kk}_service_count"]
    cols += ["reward"] + [f"rterm_{t}" for t in
                          ("goal", "aoi", "fairness", "boundary", "stall",
                           "margin", "collision", "dock")]
    for i in range(n):
        cols += [f"auv{i}_{c}" for c in
                 ("wet_node", "data_node", "harvest_j", "delivered", "bits")]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for t, st in enumerate(states):
            row = [str(st.t)]
            for a in st.auvs:
                row += [_fmt(a.pos[0]), _fmt(a.pos[1]), _fmt(a.heading),
                        _fmt(a.speed), _fmt(a.battery_j), _fmt(a.docked)]
            for nd in st.nodes:
                row += [str(nd.aoi), _fmt(nd.energy_j), str(nd.service_count)]
            if t == 0:
                row += [""] * (9 + 5 * n)
            else:
                oc = outcomes[t - 1]
                row += [_fmt(oc.reward)]
                row += [_fmt(oc.reward_terms[name]) for name in
                        ("goal", "aoi", "fairness", "boundary", "stall",
                         "margin", "collision", "dock")]
                for ev in oc.events:
                    row += [str(ev.wet_node), str(ev.data_node),
                            _fmt(ev.harvest_j), _fmt(ev.delivered), _fmt(ev.bits)]
            writer.writerow(row)


def emit_trajectory(states, path) -> None:
    """Plot-ready per-episode file: pose per slot with node positions and
    cumulative collected bits as header metadata. Rows = episode length + 1."""
    final = states[-1]
    meta = {
        "nodes": [[float(nd.pos[0]), float(nd.pos[1])] for nd in final.nodes],
        "total_bits": float(sum(nd.bits_collected for nd in final.nodes)),
        "bits_per_node": [float(nd.bits_collected) for nd in final.nodes],
    }
    n = len(states[0].auvs)
    cols = ["t"]
    for i in range(n):
        cols += [f"auv{i}_x", f"auv{i}_y", f"auv{i}_heading", f"auv{i}_speed"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {json.dumps(meta, sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for st in states:
            row = [str(st.t)]
            for a in st.auvs:
                row += [_fmt(a.pos[0]), _fmt(a.pos[1]),
                        _fmt(a.heading), _fmt(a.speed)]
            writer.writerow(row)


def aggregate_metrics(metrics) -> dict:
    rows = [m.row() for m in metrics]
    out = {}
    for key in rows[0]:
        vals = np.array([r[key] for r in rows], dtype=float)
        out[f"{key}_mean"] = float(vals.mean())
        out[f"{key}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    out["episodes"] = len(rows)
    return out


def episode_seeds(seed: int, n_episodes: int):
    """Independent per-episode seed streams; shared across policies for
    common-random-number comparisons."""
    return np.random.SeedSequence(seed).spawn(n_episodes)


def run_eval(cfg: ExperimentConfig, policy_name: str, n_episodes: int, seed: int,
             out_dir=None, checkpoint=None, n_auvs=None, n_nodes=None,
             write: bool = True):
    """Run seeded evaluation episodes; returns (metrics list, aggregate dict).

    With `write`, emits traces/ep*.csv, trajectories/ep*.csv, summary.csv,
    and metrics.json under out_dir.
    """
    sim = make_simulator(cfg, n_auvs=n_auvs, n_nodes=n_nodes)
    policy = make_policy(policy_name, sim, checkpoint=checkpoint)
    metrics = []
    traces = []
    for child in episode_seeds(seed, n_episodes):
        rng = np.random.default_rng(child)
        states, outcomes = run_episode(sim, policy, rng)
        metrics.append(episode_metrics(states, outcomes, cfg.reward.lambda_f))
        traces.append((states, outcomes))
    aggregate = aggregate_metrics(metrics)
    if write:
        if out_dir is None:
            raise ValueError("write=True needs an out_dir")
        os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)
        os.makedirs(os.path.join(out_dir, "trajectories"), exist_ok=True)
        for i, (states, outcomes) in enumerate(traces):
            write_trace_csv(os.path.join(out_dir, "traces", f"ep{i:03d}.csv"),
                            states, outcomes)
            emit_trajectory(states,
                            os.path.join(out_dir, "trajectories", f"ep{i:03d}.csv"))
        with open(os.path.join(out_dir, "summary.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = ["episode"] + list(metrics[0].row().keys())
            writer.writerow(header)
            for i, m in enumerate(metrics):
                writer.writerow([str(i)] + [_fmt(v) for v in m.row().values()])
        with open(os.path.join(out_dir, "metrics.json"), "w",
                  encoding="utf-8") as fh:
            json.dump({"policy": policy_name, "seed": seed, **aggregate},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
    return metrics, aggregate


SWEEP_COLUMNS = ("policy", "n_auvs", "n_nodes", "episode", "mean_aoi",
                 "final_jain", "total_bits", "propulsion_j", "n_docked",
                 "all_docked", "episode_len", "objective", "total_reward")


@dataclass
class PolicySpec:
    """One sweep axis entry: a policy name, a fleet size, and (for ppo) a
    checkpoint path pattern with an optional {nodes} placeholder."""

    name: str
    n_auvs: int | None = None
    checkpoint: str | None = None
    label: str = ""

    def resolve_checkpoint(self, n_nodes: int):
        if self.checkpoint is None:
            return None
        return self.checkpoint.format(nodes=n_nodes,
                                      auvs=self.n_auvs if self.n_auvs else "")


def parse_policy_spec(text: str) -> PolicySpec:
    """Grammar: name[@n_auvs][:checkpoint_pattern], e.g. ppo@2:runs/ppo_k{nodes}.npz."""
    head, _, ckpt = text.partition(":")
    name, _, auvs = head.partition("@")
    if name not in POLICY_NAMES:
        raise ValueError(f"unknown policy {name!r} in spec {text!r}")
    spec = PolicySpec(name=name,
                      n_auvs=int(auvs) if auvs else None,
                      checkpoint=ckpt or None,
                      label=head)
    if spec.name == "ppo" and spec.checkpoint is None:
        raise ValueError(f"ppo policy spec {text!r} needs :checkpoint_pattern")
    return spec


def run_sweep(cfg: ExperimentConfig, nodes_list, policy_specs, n_episodes: int,
              seed: int, out_dir=None):
    """Cartesian (policy x network size) evaluation with common seeds.

    Returns tidy rows, one per (policy, K, episode); writes sweep.csv when
    out_dir is given. Node layouts are identical across policies within a
    network-size cell because the seed stream depends only on (seed, K).
    """
    rows = []
    for n_nodes in nodes_list:
        for spec in policy_specs:
            metrics, _ = run_eval(
                cfg, spec.name, n_episodes, seed, write=False,
                checkpoint=spec.resolve_checkpoint(n_nodes),
                n_auvs=spec.n_auvs, n_nodes=n_nodes)
            for i, m in enumerate(metrics):
                row = {"policy": spec.label,
                       "n_auvs": spec.n_auvs or cfg.scenario.n_auvs,
                       "n_nodes": n_nodes, "episode": i}
                row.update(m.row())
                rows.append(row)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            for row in rows:
                writer.writerow([_fmt(row[c]) if isinstance(row[c], float)
                                 else str(row[c]) for c in SWEEP_COLUMNS])
    return rows


def train_and_save(cfg: ExperimentConfig, out_dir, n_auvs=None, n_nodes=None,
                   seed=None, total_env_steps=None):
    """Train PPO per config (with optional overrides) and write checkpoint.npz
    plus learning_curve.csv into out_dir. Returns the checkpoint path."""
    sim = make_simulator(cfg, n_auvs=n_auvs, n_nodes=n_nodes)
    ppo_cfg = PpoConfig(**vars(cfg.ppo))
    if seed is not None:
        ppo_cfg.seed = seed
    if total_env_steps is not None:
        ppo_cfg.total_env_steps = total_env_steps
    params, curves = train(lambda: sim, ppo_cfg, sim.spec)
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, "checkpoint.npz")
    save_checkpoint(ckpt, params, ppo_cfg, sim.spec)
    curve_cols = list(curves[0].keys())
    with open(os.path.join(out_dir, "learning_curve.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(curve_cols)
        for row in curves:
            writer.writerow([_fmt(row[c]) if isinstance(row[c], float)
                             else str(row[c]) for c in curve_cols])
    return ckpt
