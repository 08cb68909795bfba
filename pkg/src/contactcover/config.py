"""Experiment configuration: dataclasses, JSON round-trip, overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .pushbox import EnvParams

VARIANTS = ("ccge", "single_state", "task_only")


@dataclass
class RewardSettings:
    """Exploration reward scales.

    contact_scale and energy_scale are the reference setting for the
    full-scale tasks; explore_scale multiplies both for this testbed,
    keeping their ratio fixed while matching the toy task's reward
    magnitudes.
    """

    contact_scale: float = 200.0
    energy_scale: float = 1.28
    explore_scale: float = 0.3
    energy_decay: float = 0.25
    use_directional: bool = False
    use_occlusion: bool = True

    def effective_scales(self) -> tuple:
        return (self.contact_scale * self.explore_scale,
                self.energy_scale * self.explore_scale)


@dataclass
class HasherSettings:
    latent_dim: int = 32
    n_bits: int = 5
    bin_weight: float = 1.0
    hidden: int = 64
    lr: float = 3e-4
    batch: int = 256


@dataclass
class PPOSettings:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 128
    lr: float = 3e-4
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    target_kl: float = 0.02
    weight_decay: float = 0.0
    hidden: tuple = (64, 64)
    init_log_std: float = -0.5
    update_every: int = 16  # env steps between policy/hasher updates


@dataclass
class ExperimentConfig:
    variant: str = "ccge"
    root_seed: int = 0
    total_steps: int = 400_000
    n_envs: int = 32
    eval_episodes: int = 200
    out_dir: str = "runs/run"
    env: EnvParams = field(default_factory=EnvParams)
    rewards: RewardSettings = field(default_factory=RewardSettings)
    hasher: HasherSettings = field(default_factory=HasherSettings)
    ppo: PPOSettings = field(default_factory=PPOSettings)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, "
                             f"got {self.variant!r}")
        if self.total_steps < 1:
            raise ValueError("total_steps must be positive")
        if self.n_envs < 1:
            raise ValueError("n_envs must be positive")
        if self.ppo.update_every < 1:
            raise ValueError("update_every must be positive")

    @property
    def steps_per_update(self) -> int:
        return self.n_envs * self.ppo.update_every

    @property
    def n_updates(self) -> int:
        return self.total_steps // self.steps_per_update


_SECTIONS = {"env": EnvParams, "rewards": RewardSettings,
             "hasher": HasherSettings, "ppo": PPOSettings}


def to_dict(cfg: ExperimentConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["ppo"]["hidden"] = list(out["ppo"]["hidden"])
    return out


def from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            section = dict(data.pop(name))
            if name == "ppo" and "hidden" in section:
                section["hidden"] = tuple(section["hidden"])
            known = {f.name for f in dataclasses.fields(cls)}
            unknown = set(section) - known
            if unknown:
                raise ValueError(f"unknown {name} fields: {sorted(unknown)}")
            kwargs[name] = cls(**section)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    kwargs.update(data)
    return ExperimentConfig(**kwargs)


def save_json(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        json.dump(to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> ExperimentConfig:
    with open(path) as fh:
        return from_dict(json.load(fh))


def _coerce(current, text: str):
    """Parse an override string to the type of the current value."""
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, tuple):
        return tuple(int(v) for v in text.split(","))
    if current is None or isinstance(current, str):
        return text
    raise ValueError(f"cannot override field of type {type(current).__name__}")


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """New config with dotted key=value overrides applied.

    Example: apply_overrides(cfg, ["rewards.explore_scale=0.2",
    "ppo.lr=1e-3", "total_steps=100000"]).
    """
    data = to_dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        parts = key.split(".")
        node = data
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ValueError(f"unknown config section {key!r}")
            node = node[part]
        leaf = parts[-1]
        if leaf not in node:
            raise ValueError(f"unknown config key {key!r}")
        current = node[leaf]
        if leaf == "hidden":
            node[leaf] = [int(v) for v in text.split(",")]
        else:
            node[leaf] = _coerce(current, text)
    return from_dict(data)
