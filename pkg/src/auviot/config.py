"""Experiment configuration: defaults, YAML parsing, validation.

One human-editable YAML file drives everything; every key is optional and
falls back to the default scenario constants, and unknown keys are rejected
so typos fail loudly instead of silently running the wrong experiment.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

import yaml

from .acoustics import ChannelParams
from .codec import CodecSpec
from .dynamics import MotionParams, RewardWeights, ScenarioParams, SimParams
from .ppo import PpoConfig


class ConfigError(ValueError):
    pass


@dataclass
class CodecConfig:
    k_theta: int = 5
    k_v: int = 5

    def validate(self) -> None:
        if self.k_theta < 2 or self.k_v < 2:
            raise ConfigError("k_theta and k_v must be at least 2")


@dataclass
class EvalConfig:
    episodes: int = 20
    seed: int = 123

    def validate(self) -> None:
        if self.episodes < 1:
            raise ConfigError("eval episodes must be positive")


@dataclass
class ExperimentConfig:
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    motion: MotionParams = field(default_factory=MotionParams)
    reward: RewardWeights = field(default_factory=RewardWeights)
    codec: CodecConfig = field(default_factory=CodecConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    out_dir: str = "runs"

    def validate(self) -> None:
        try:
            self.scenario.validate()
            self.channel.validate()
            self.motion.validate()
            self.reward.validate()
            self.codec.validate()
            self.ppo.validate()
            self.eval.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sim_params(self) -> SimParams:
        return SimParams(channel=self.channel, motion=self.motion,
                         weights=self.reward)

    def codec_spec(self, n_auvs: int | None = None,
                   n_nodes: int | None = None) -> CodecSpec:
        """Derive the full codec (with normalization constants) from the config."""
        return CodecSpec(
            n_auvs=self.scenario.n_auvs if n_auvs is None else n_auvs,
            n_nodes=self.scenario.n_nodes if n_nodes is None else n_nodes,
            k_theta=self.codec.k_theta, k_v=self.codec.k_v,
            arena=self.motion.arena, v_max=self.motion.v_max,
            a_max=self.reward.a_max)


def _coerce(value, typ, path):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if typ is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return tuple(_coerce(v, tuple, f"{path}[{i}]")
                     if isinstance(v, (list, tuple)) else float(v)
                     for i, v in enumerate(value))
    raise ConfigError(f"{path}: unsupported config field type {typ}")


def _build(cls, raw: dict, path: str):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping, got {raw!r}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, f in known.items():
        if name not in raw:
            continue
        typ = f.type if isinstance(f.type, type) else {
            "float": float, "int": int, "bool": bool, "str": str, "tuple": tuple,
        }.get(str(f.type))
        if typ is None:
            raise ConfigError(f"{path}.{name}: unsupported field")
        kwargs[name] = _coerce(raw[name], typ, f"{path}.{name}")
    return cls(**kwargs)


_SECTIONS = {
    "scenario": ScenarioParams,
    "channel": ChannelParams,
    "motion": MotionParams,
    "reward": RewardWeights,
    "codec": CodecConfig,
    "ppo": PpoConfig,
    "eval": EvalConfig,
}


def config_from_dict(raw: dict | None) -> ExperimentConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {raw!r}")
    unknown = set(raw) - set(_SECTIONS) - {"out_dir"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

    # a_max defaults to the horizon when omitted or null
    reward_raw = dict(raw.get("reward") or {})
    a_max_missing = reward_raw.get("a_max") is None
    if a_max_missing:
        reward_raw.pop("a_max", None)

    cfg = ExperimentConfig(
        scenario=_build(ScenarioParams, raw.get("scenario"), "scenario"),
        channel=_build(ChannelParams, raw.get("channel"), "channel"),
        motion=_build(MotionParams, raw.get("motion"), "motion"),
        reward=_build(RewardWeights, reward_raw, "reward"),
        codec=_build(CodecConfig, raw.get("codec"), "codec"),
        ppo=_build(PpoConfig, raw.get("ppo"), "ppo"),
        eval=_build(EvalConfig, raw.get("eval"), "eval"),
        out_dir=str(raw.get("out_dir", "runs")))
    if a_max_missing:
        cfg.reward.a_max = cfg.motion.t_max
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return config_from_dict(raw)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(cfg, name))
        out[name] = {k: _plain(v) for k, v in section.items()}
    out["out_dir"] = cfg.out_dir
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
