"""Experiment configuration: ``section.key = value`` lines.

Sections: ``run`` (experiment axes and budgets), ``env`` (environment
constructor overrides) and one section named after each backbone. Blank lines
and ``#`` comments are ignored.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from grirl.backbones import BACKBONES, CONFIG_TYPES
from grirl.demodata import DatasetMax, RdemoPolicy, format_rdemo, parse_rdemo
from grirl.envs import ENV_IDS
from grirl.gri import MODES, GriConfig

DISCRETE_ENVS = {"trackdrive-v0"}
ENV_KEYS = {
    "pendulum-v0": {"horizon": int, "max_torque": float, "dt": float},
    "trackdrive-v0": {"horizon": int, "n_steer": int, "dt": float, "track_path": str, "v_target": float},
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass
class TrainConfig:
    env_id: str = "pendulum-v0"
    backbone: str = "sac"
    mode: str = "gri"
    p_demo: float = 0.2
    rdemo: RdemoPolicy = DatasetMax()
    demo_path: str = ""
    demo_corrupt_fraction: float = 0.0
    demo_corrupt_seed: int = 0
    seeds: tuple[int, ...] = (0,)
    total_env_steps: int = 100_000
    eval_every: int = 5_000
    eval_episodes: int = 10
    min_buffer: int = 10_000
    capacity: int = 1_000_000
    update_every: float = 1.0
    snapshot_period: int = 500
    distributed: bool = False
    n_exploration_agents: int = 1
    n_demonstration_agents: int = 0
    wall_clock: bool = False
    stop_at_return: float | None = None
    env: dict[str, object] = field(default_factory=dict)
    backbone_params: dict[str, object] = field(default_factory=dict)

    def backbone_config(self):
        cls = CONFIG_TYPES[self.backbone]
        return cls(**self.backbone_params)

    def gri_config(self) -> GriConfig:
        return GriConfig(
            p_demo=self.p_demo,
            rdemo_policy=self.rdemo,
            min_buffer=self.min_buffer,
            total_env_steps=self.total_env_steps,
            n_exploration_agents=self.n_exploration_agents,
            n_demonstration_agents=self.n_demonstration_agents,
            mode=self.mode,
            capacity=self.capacity,
            update_every=self.update_every,
            snapshot_period=self.snapshot_period,
            eval_every=self.eval_every,
            eval_episodes=self.eval_episodes,
            distributed=self.distributed,
        )


_RUN_FIELDS = {
    f.name: f for f in dataclasses.fields(TrainConfig) if f.name not in ("env", "backbone_params")
}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_run_value(name: str, text: str):
    if name == "rdemo":
        return parse_rdemo(text)
    if name == "seeds":
        return tuple(int(s) for s in text.split(",") if s.strip())
    if name == "stop_at_return":
        return None if text.lower() in ("", "none") else float(text)
    default = _RUN_FIELDS[name].default
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def _backbone_fields(kind: str) -> dict[str, dataclasses.Field]:
    return {f.name: f for f in dataclasses.fields(CONFIG_TYPES[kind])}


def _parse_backbone_value(kind: str, name: str, text: str):
    if name == "hidden":
        return tuple(int(s) for s in text.split(",") if s.strip())
    if name in ("alpha", "target_entropy"):
        return None if text.lower() in ("auto", "none") else float(text)
    default = _backbone_fields(kind)[name].default
    if isinstance(default, int) and not isinstance(default, bool):
        return int(text)
    return float(text)


def _fmt_backbone(name: str, value) -> str:
    if name in ("alpha", "target_entropy") and value is None:
        return "auto"
    return _fmt(value)


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> TrainConfig:
    """Parse and validate; every problem found is reported in one ConfigError."""
    cfg = TrainConfig()
    problems: list[str] = []
    raw_backbone: dict[str, dict[str, tuple[int, str]]] = {k: {} for k in BACKBONES}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            problems.append(f"{source}:{lineno}: expected 'section.key = value'")
            continue
        key, value = (s.strip() for s in stripped.split("=", 1))
        if "." not in key:
            problems.append(f"{source}:{lineno}: key {key!r} lacks a section prefix")
            continue
        section, name = key.split(".", 1)
        try:
            if section == "run":
                if name not in _RUN_FIELDS:
                    problems.append(f"{source}:{lineno}: unknown key {key!r}")
                    continue
                setattr(cfg, name, _parse_run_value(name, value))
            elif section == "env":
                cfg.env[name] = value
            elif section in BACKBONES:
                if name not in _backbone_fields(section):
                    problems.append(f"{source}:{lineno}: unknown key {key!r}")
                    continue
                raw_backbone[section][name] = (lineno, value)
            else:
                problems.append(f"{source}:{lineno}: unknown section {section!r}")
        except ValueError as exc:
            problems.append(f"{source}:{lineno}: bad value for {key!r}: {exc}")

    for kind, entries in raw_backbone.items():
        if kind != cfg.backbone:
            continue
        for name, (lineno, value) in entries.items():
            try:
                cfg.backbone_params[name] = _parse_backbone_value(kind, name, value)
            except ValueError as exc:
                problems.append(f"{source}:{lineno}: bad value for {kind}.{name}: {exc}")

    if cfg.env_id in ENV_KEYS:
        typed = {}
        for name, value in cfg.env.items():
            conv = ENV_KEYS[cfg.env_id].get(name)
            if conv is None:
                problems.append(f"{source}: env.{name} is not a setting of {cfg.env_id}")
                continue
            try:
                typed[name] = conv(value) if isinstance(value, str) else value
            except ValueError as exc:
                problems.append(f"{source}: bad value for env.{name}: {exc}")
        cfg.env = typed

    if base_dir is not None:
        if cfg.demo_path and not Path(cfg.demo_path).is_absolute():
            cfg.demo_path = str((base_dir / cfg.demo_path).resolve())
        track = cfg.env.get("track_path")
        if isinstance(track, str) and track and not Path(track).is_absolute():
            cfg.env["track_path"] = str((base_dir / track).resolve())

    problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: TrainConfig) -> list[str]:
    problems = []
    if cfg.env_id not in ENV_IDS:
        problems.append(f"run.env_id {cfg.env_id!r} not one of {ENV_IDS}")
    if cfg.backbone not in BACKBONES:
        problems.append(f"run.backbone {cfg.backbone!r} not one of {BACKBONES}")
    elif cfg.env_id in ENV_IDS:
        discrete = cfg.env_id in DISCRETE_ENVS
        if cfg.backbone == "dqn" and not discrete:
            problems.append(f"backbone dqn needs a discrete-action env, {cfg.env_id} is continuous")
        if cfg.backbone in ("ddpg", "sac") and discrete:
            problems.append(f"backbone {cfg.backbone} needs a continuous-action env, {cfg.env_id} is discrete")
    if cfg.mode not in MODES:
        problems.append(f"run.mode {cfg.mode!r} not one of {MODES}")
    elif cfg.mode in ("gri", "sqil") and not cfg.demo_path:
        problems.append(f"mode {cfg.mode} requires run.demo_path")
    if not 0.0 <= cfg.p_demo <= 1.0:
        problems.append(f"run.p_demo must lie in [0, 1], got {cfg.p_demo}")
    if not 0.0 <= cfg.demo_corrupt_fraction <= 1.0:
        problems.append("run.demo_corrupt_fraction must lie in [0, 1]")
    if not cfg.seeds:
        problems.append("run.seeds must list at least one seed")
    for name in ("total_env_steps", "eval_every", "eval_episodes", "min_buffer", "capacity", "snapshot_period"):
        if getattr(cfg, name) <= 0:
            problems.append(f"run.{name} must be positive")
    if cfg.capacity < cfg.min_buffer:
        problems.append("run.capacity must be >= run.min_buffer")
    if not cfg.update_every > 0:
        problems.append("run.update_every must be positive")
    if cfg.distributed and cfg.n_exploration_agents < 1:
        problems.append("distributed runs need run.n_exploration_agents >= 1")
    if cfg.n_demonstration_agents < 0:
        problems.append("run.n_demonstration_agents must be >= 0")
    if isinstance(cfg.rdemo, type(None)) or (
        not isinstance(cfg.rdemo, DatasetMax) and not math.isfinite(getattr(cfg.rdemo, "value", math.nan))
    ):
        problems.append("run.rdemo fixed value must be finite")
    if cfg.backbone in BACKBONES:
        try:
            cfg.backbone_config()
        except TypeError as exc:
            problems.append(f"{cfg.backbone} settings: {exc}")
    return problems


def load_config(path) -> TrainConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    return parse_config(text, str(path), path.parent)


def dump_config(cfg: TrainConfig) -> str:
    """Resolved snapshot: every run key, the env overrides, and the full backbone section."""
    lines = []
    for name in _RUN_FIELDS:
        value = getattr(cfg, name)
        text = format_rdemo(value) if name == "rdemo" else _fmt(value)
        lines.append(f"run.{name} = {text}")
    for name, value in sorted(cfg.env.items()):
        lines.append(f"env.{name} = {_fmt(value)}")
    if cfg.backbone in BACKBONES:
        resolved = dataclasses.asdict(cfg.backbone_config())
        for name, value in resolved.items():
            lines.append(f"{cfg.backbone}.{name} = {_fmt_backbone(name, value)}")
    return "\n".join(lines) + "\n"


def resolved(cfg: TrainConfig) -> TrainConfig:
    """Copy with every backbone default written out explicitly."""
    out = dataclasses.replace(cfg, env=dict(cfg.env), backbone_params=dict(cfg.backbone_params))
    out.backbone_params = dataclasses.asdict(cfg.backbone_config())
    return out
