"""Deterministic multi-AUV underwater-IoT simulator with an acoustic
link-budget channel, AoI/fairness dynamics, a from-scratch PPO learner,
and an experiment harness."""

from .acoustics import ChannelParams
from .codec import ActionIndices, CodecSpec, DecodedAction
from .config import ExperimentConfig, load_config
from .dynamics import (
    AuvState,
    MotionParams,
    NodeState,
    RewardWeights,
    ScenarioParams,
    SimParams,
    StepOutcome,
    WorldState,
)
from .ppo import NetworkParams, PpoConfig, RolloutBuffer

__version__ = "0.1.0"

__all__ = [
    "ActionIndices",
    "AuvState",
    "ChannelParams",
    "CodecSpec",
    "DecodedAction",
    "ExperimentConfig",
    "MotionParams",
    "NetworkParams",
    "NodeState",
    "PpoConfig",
    "RewardWeights",
    "RolloutBuffer",
    "ScenarioParams",
    "SimParams",
    "StepOutcome",
    "WorldState",
    "load_config",
    "__version__",
]
