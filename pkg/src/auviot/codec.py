"""Bidirectional mapping between world states and flat observation vectors,
and between discrete action indices and physical control increments.

The observation layout is versioned; `schema_hash` pins it so checkpoints
can refuse to run against an incompatible encoding.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import MotionParams, WorldState

OBS_SCHEMA_VERSION = 1

# per-AUV feature block, in order
PER_AUV_FEATURES = ("x_norm", "y_norm", "sin_heading", "cos_heading", "speed_frac")


@dataclass(frozen=True)
class CodecSpec:
    """Dimensions and normalization constants of the observation/action codec."""

    n_auvs: int
    n_nodes: int
    k_theta: int = 5
    k_v: int = 5
    arena: tuple = ((0.0, 0.0), (2000.0, 2000.0))
    v_max: float = 4.0
    a_max: int = 55
    energy_log_decades: float = 6.0

    def __post_init__(self):
        if self.n_auvs < 1 or self.n_nodes < 1:
            raise ValueError("need at least one AUV and one node")
        if self.k_theta < 2 or self.k_v < 2:
            raise ValueError("need at least two levels per control head")

    @property
    def obs_dim(self) -> int:
        return (len(PER_AUV_FEATURES) * self.n_auvs + 2 * self.n_nodes
                + self.n_auvs * self.n_nodes)

    @property
    def arena_diag(self) -> float:
        (xmin, ymin), (xmax, ymax) = self.arena
        return math.hypot(xmax - xmin, ymax - ymin)


@dataclass(frozen=True)
class ActionIndices:
    """One AUV's discrete action: control indices plus 1-based node selections."""

    theta_idx: int
    v_idx: int
    wet_node: int
    data_node: int

    def validate(self, spec: CodecSpec) -> None:
        if not 0 <= self.theta_idx < spec.k_theta:
            raise ValueError(f"theta_idx {self.theta_idx} out of [0, {spec.k_theta})")
        if not 0 <= self.v_idx < spec.k_v:
            raise ValueError(f"v_idx {self.v_idx} out of [0, {spec.k_v})")
        if not 1 <= self.wet_node <= spec.n_nodes:
            raise ValueError(f"wet_node {self.wet_node} out of [1, {spec.n_nodes}]")
        if not 1 <= self.data_node <= spec.n_nodes:
            raise ValueError(f"data_node {self.data_node} out of [1, {spec.n_nodes}]")


@dataclass(frozen=True)
class DecodedAction:
    """Physical control increments plus pass-through node selections."""

    dtheta: float
    dv: float
    wet_node: int
    data_node: int


def increment_grid(levels: int, bound: float) -> np.ndarray:
    """The affine index-to-increment map: idx 0 -> -bound, idx levels-1 -> +bound."""
    idx = np.arange(levels, dtype=float)
    return (2.0 * idx / (levels - 1) - 1.0) * bound


def decode_action(indices: ActionIndices, spec: CodecSpec,
                  motion: MotionParams) -> DecodedAction:
    """Map discrete indices to bounded physical increments."""
    indices.validate(spec)
    dtheta = (2.0 * indices.theta_idx / (spec.k_theta - 1) - 1.0) * motion.dtheta_max
    dv = (2.0 * indices.v_idx / (spec.k_v - 1) - 1.0) * motion.dv_max
    return DecodedAction(dtheta=dtheta, dv=dv,
                         wet_node=indices.wet_node, data_node=indices.data_node)


def action_space_size(spec: CodecSpec) -> list:
    """Factored per-head sizes, [K_theta, K_v, K, K] repeated per AUV."""
    return [spec.k_theta, spec.k_v, spec.n_nodes, spec.n_nodes] * spec.n_auvs


def encode_state(state: WorldState, spec: CodecSpec) -> np.ndarray:
    """Flatten a world state into the versioned observation vector.

    Layout: per AUV (x_norm, y_norm, sin heading, cos heading, speed/v_max),
    then AoI/a_max per node, then log-scaled node energies, then AUV-node
    distances over the arena diagonal (AUV-major). All features lie in
    [-1, 1] for in-bounds states with energies below 10^energy_log_decades J.
    """
    if len(state.auvs) != spec.n_auvs or len(state.nodes) != spec.n_nodes:
        raise ValueError(
            f"state has {len(state.auvs)} AUVs / {len(state.nodes)} nodes, "
            f"codec expects {spec.n_auvs} / {spec.n_nodes}")
    (xmin, ymin), (xmax, ymax) = spec.arena
    out = np.empty(spec.obs_dim, dtype=np.float64)
    i = 0
    for auv in state.auvs:
        out[i] = 2.0 * (auv.pos[0] - xmin) / (xmax - xmin) - 1.0
        out[i + 1] = 2.0 * (auv.pos[1] - ymin) / (ymax - ymin) - 1.0
        out[i + 2] = math.sin(auv.heading)
        out[i + 3] = math.cos(auv.heading)
        out[i + 4] = auv.speed / spec.v_max
        i += 5
    for nd in state.nodes:
        out[i] = nd.aoi / spec.a_max
        i += 1
    for nd in state.nodes:
        out[i] = math.log10(1.0 + nd.energy_j) / spec.energy_log_decades
        i += 1
    diag = spec.arena_diag
    for auv in state.auvs:
        for nd in state.nodes:
            out[i] = float(np.linalg.norm(auv.pos - nd.pos)) / diag
            i += 1
    return out


def layout(spec: CodecSpec) -> dict:
    """Machine-readable description of the observation encoding."""
    fields = []
    for n in range(spec.n_auvs):
        fields.extend(f"auv{n}_{name}" for name in PER_AUV_FEATURES)
    fields.extend(f"node{k}_aoi_frac" for k in range(spec.n_nodes))
    fields.extend(f"node{k}_energy_log" for k in range(spec.n_nodes))
    for n in range(spec.n_auvs):
        fields.extend(f"auv{n}_node{k}_dist_frac" for k in range(spec.n_nodes))
    return {
        "version": OBS_SCHEMA_VERSION,
        "n_auvs": spec.n_auvs,
        "n_nodes": spec.n_nodes,
        "obs_dim": spec.obs_dim,
        "fields": fields,
        "normalization": {
            "position": "2*(p - min)/(max - min) - 1 per axis",
            "heading": "sin/cos pair",
            "speed": f"v / v_max (v_max={spec.v_max})",
            "aoi": f"aoi / a_max (a_max={spec.a_max})",
            "node_energy": ("log10(1 + e_j) / decades "
                            f"(decades={spec.energy_log_decades})"),
            "distance": f"euclidean / arena diagonal (diag={spec.arena_diag})",
            "arena": [list(spec.arena[0]), list(spec.arena[1])],
        },
        "action_heads": action_space_size(spec),
        "node_selection_base": 1,
    }


def schema_hash(spec: CodecSpec) -> str:
    """SHA-256 over the canonical JSON layout; pins codec compatibility."""
    blob = json.dumps(layout(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
