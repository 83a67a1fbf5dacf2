"""Per-slot decision policies sharing one interface: `reset(rng)` before an
episode, then `act(state) -> list[ActionIndices]`, one entry per AUV.

All three policies emit indices in the same discrete action space, so the
learner and the baselines are compared on identical footing.
"""

from __future__ import annotations

import math

import numpy as np

from .codec import ActionIndices, CodecSpec, encode_state, increment_grid
from .dynamics import MotionParams, WorldState, wrap_angle
from .ppo import NetworkParams, forward, greedy_head_indices, sample_action


def nearest_index(grid: np.ndarray, target: float) -> int:
    """Index of the grid value closest to target (ties to the lower index)."""
    return int(np.argmin(np.abs(grid - target)))


class GreedyPolicy:
    """Deterministic time-aware navigation with greedy AET and round-robin data.

    Heading turns toward the dock center, saturated at the per-slot bound.
    Speed tracks remaining-distance / remaining-time so the vehicle arrives
    at the dock by the end of the horizon. Energy transfer targets the node
    nearest the predicted post-move position; data collection cycles nodes
    round-robin, independent of mobility, with per-AUV cursor offsets.
    """

    def __init__(self, spec: CodecSpec, motion: MotionParams):
        self.spec = spec
        self.motion = motion
        self.theta_grid = increment_grid(spec.k_theta, motion.dtheta_max)
        self.v_grid = increment_grid(spec.k_v, motion.dv_max)
        self.cursors = list(range(spec.n_auvs))

    def reset(self, rng=None) -> None:
        self.cursors = list(range(self.spec.n_auvs))

    def act(self, state: WorldState) -> list:
        motion = self.motion
        dock = np.asarray(motion.dock_center, dtype=float)
        k = self.spec.n_nodes
        remaining_slots = max(1, motion.t_max - state.t)
        actions = []
        for i, auv in enumerate(state.auvs):
            to_dock = dock - auv.pos
            dist = float(np.linalg.norm(to_dock))
            if auv.docked or dist == 0.0:
                dtheta_des = 0.0
                v_target = 0.0
            else:
                bearing = math.atan2(to_dock[1], to_dock[0])
                err = wrap_angle(bearing - auv.heading)
                dtheta_des = min(max(err, -motion.dtheta_max), motion.dtheta_max)
                v_target = min(dist / (remaining_slots * motion.dt), motion.v_max)
            dv_des = min(max(v_target - auv.speed, -motion.dv_max), motion.dv_max)

            # WET: nearest node to the predicted post-move position
            post = auv.pos + auv.speed * motion.dt * np.array(
                [math.cos(auv.heading), math.sin(auv.heading)])
            dists = [float(np.linalg.norm(post - nd.pos)) for nd in state.nodes]
            wet = int(np.argmin(dists)) + 1

            data = self.cursors[i] % k + 1
            self.cursors[i] += 1

            actions.append(ActionIndices(
                theta_idx=nearest_index(self.theta_grid, dtheta_des),
                v_idx=nearest_index(self.v_grid, dv_des),
                wet_node=wet, data_node=data))
        return actions


class RandomPolicy:
    """Uniform over every head; the reference floor for comparisons."""

    def __init__(self, spec: CodecSpec):
        self.spec = spec
        self.rng = np.random.default_rng(0)

    def reset(self, rng=None) -> None:
        if rng is not None:
            self.rng = rng

    def act(self, state: WorldState) -> list:
        spec = self.spec
        return [ActionIndices(
            theta_idx=int(self.rng.integers(spec.k_theta)),
            v_idx=int(self.rng.integers(spec.k_v)),
            wet_node=int(self.rng.integers(spec.n_nodes)) + 1,
            data_node=int(self.rng.integers(spec.n_nodes)) + 1)
            for _ in range(spec.n_auvs)]


class PpoPolicy:
    """Trained network wrapper; deterministic argmax heads by default."""

    def __init__(self, params: NetworkParams, spec: CodecSpec,
                 deterministic: bool = True):
        self.params = params
        self.spec = spec
        self.deterministic = deterministic
        self.rng = np.random.default_rng(0)

    def reset(self, rng=None) -> None:
        if rng is not None:
            self.rng = rng

    def act(self, state: WorldState) -> list:
        obs = encode_state(state, self.spec)
        logits, _ = forward(self.params, obs)
        if self.deterministic:
            raw = greedy_head_indices(logits)
            return [ActionIndices(theta_idx=raw[4 * i], v_idx=raw[4 * i + 1],
                                  wet_node=raw[4 * i + 2] + 1,
                                  data_node=raw[4 * i + 3] + 1)
                    for i in range(self.spec.n_auvs)]
        actions, _ = sample_action(logits, self.rng, self.spec.n_auvs)
        return actions
