"""Single-process GRI loop: one episode from the chosen agent, then learner updates."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from grirl.backbones import make_learner
from grirl.demodata import DemoDataset, DemoStream
from grirl.envs.spaces import Box
from grirl.gri.core import (
    GriConfig,
    RunAborted,
    Source,
    StepCounter,
    collect_exploration_episode,
    eval_seeds,
    evaluate,
    inject_demonstration_episode,
    mean_or_nan,
    select_source,
)
from grirl.replay import BufferNotReady, ReplayBuffer

METRICS_COLUMNS = (
    "env_steps",
    "wall_seconds",
    "mean_eval_return",
    "std_eval_return",
    "buffer_demo_fraction",
    "cumulative_demo_draws",
    "critic_loss",
    "actor_loss",
)


@dataclass(frozen=True)
class MetricsRow:
    env_steps: int
    wall_seconds: float
    mean_eval_return: float
    std_eval_return: float
    buffer_demo_fraction: float
    cumulative_demo_draws: int
    critic_loss: float
    actor_loss: float


@dataclass
class RunResult:
    learner: object
    buffer: ReplayBuffer
    rows: list[MetricsRow] = field(default_factory=list)
    env_steps: int = 0
    exploration_episodes: int = 0
    demo_episodes: int = 0
    updates: int = 0
    selections: list[Source] = field(default_factory=list)
    # (source, env reset seed or None, stored length) per appended episode, in order
    episode_log: list[tuple[Source, int | None, int]] = field(default_factory=list)
    stopped_early: bool = False


def streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("learner", "select", "act", "env", "sample", "demo")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def check_dataset(dataset: DemoDataset, env) -> None:
    if dataset.env_id != env.env_id:
        raise ValueError(f"demo dataset is for {dataset.env_id!r}, env is {env.env_id!r}")
    if dataset.obs_dim != env.obs_dim or dataset.action_spec != env.action_spec:
        raise ValueError("demo dataset observation/action spec does not match the env")


def make_buffer(config: GriConfig, env) -> ReplayBuffer:
    spec = env.action_spec
    return ReplayBuffer(
        config.capacity,
        env.obs_dim,
        spec.dim if isinstance(spec, Box) else None,
        config.min_buffer,
    )


def make_demo_stream(config: GriConfig, dataset: DemoDataset | None, env, seed: int) -> DemoStream | None:
    needs_demo = config.mode == "sqil" or (config.mode == "gri" and config.effective_p_demo > 0)
    if dataset is None:
        if needs_demo:
            raise ValueError(f"mode {config.mode!r} with p_demo={config.p_demo} needs a demonstration dataset")
        return None
    check_dataset(dataset, env)
    if config.mode == "vanilla":
        return None
    spec = env.action_spec
    transform = spec.to_unit if isinstance(spec, Box) else None
    return DemoStream(dataset, config.rdemo_policy, seed, cycle=True, action_transform=transform)


class _RowLogger:
    def __init__(self, config: GriConfig, policy_fn, eval_env, seeds, buffer, on_row, wall_clock: bool):
        self.config = config
        self.policy_fn = policy_fn
        self.eval_env = eval_env
        self.seeds = seeds
        self.buffer = buffer
        self.on_row = on_row
        self.wall_clock = wall_clock
        self.t0 = time.perf_counter()
        self.rows: list[MetricsRow] = []
        self.critic_losses: list[float] = []
        self.actor_losses: list[float] = []

    def record_losses(self, out: dict[str, float]) -> None:
        self.critic_losses.append(out["critic_loss"])
        if "actor_loss" in out:
            self.actor_losses.append(out["actor_loss"])

    def log(self, env_steps: int) -> MetricsRow:
        returns = evaluate(self.policy_fn(), self.eval_env, self.seeds)
        frac = self.buffer.demo_fraction() if len(self.buffer) else math.nan
        row = MetricsRow(
            env_steps,
            time.perf_counter() - self.t0 if self.wall_clock else 0.0,
            float(returns.mean()),
            float(returns.std()),
            frac,
            self.buffer.demo_draws,
            mean_or_nan(self.critic_losses),
            mean_or_nan(self.actor_losses),
        )
        self.critic_losses.clear()
        self.actor_losses.clear()
        self.rows.append(row)
        if self.on_row is not None:
            self.on_row(row)
        return row


def train(
    config: GriConfig,
    backbone: str,
    backbone_config,
    env_factory,
    seed: int,
    dataset: DemoDataset | None = None,
    on_row=None,
    wall_clock: bool = False,
    stop_at_return: float | None = None,
) -> RunResult:
    """Run GRI (or vanilla / SQIL) until ``config.total_env_steps`` exploration steps.

    Demonstration injections do not consume the step budget. When
    ``stop_at_return`` is given the run also ends at the first evaluation whose
    mean return reaches it.
    """
    if config.distributed:
        from grirl.gri.distributed import train_distributed

        return train_distributed(config, backbone, backbone_config, env_factory, seed, dataset, on_row,
                                 wall_clock, stop_at_return)

    rngs = streams(seed)
    env = env_factory()
    eval_env = env_factory()
    learner = make_learner(backbone, env.obs_dim, env.action_spec, backbone_config, rngs["learner"])
    buffer = make_buffer(config, env)
    demo_seed = int(rngs["demo"].integers(2**63))
    stream = make_demo_stream(config, dataset, env, demo_seed)
    p_demo = config.effective_p_demo if stream is not None else 0.0
    batch_size = backbone_config.batch_size

    result = RunResult(learner, buffer)
    logger = _RowLogger(config, learner.policy, eval_env, eval_seeds(seed, config.eval_episodes), buffer,
                        on_row, wall_clock)
    counter = StepCounter(config.total_env_steps)
    stop = False

    def on_step(n: int) -> None:
        nonlocal stop
        if n % config.eval_every == 0 or n == config.total_env_steps:
            row = logger.log(n)
            if stop_at_return is not None and row.mean_eval_return >= stop_at_return:
                stop = True

    owed = 0.0
    while counter.count < config.total_env_steps and not stop:
        kind = select_source(float(rngs["select"].random()), p_demo)
        result.selections.append(kind)
        if kind == Source.EXPLORATION:
            env_seed = int(rngs["env"].integers(2**31))
            stats = collect_exploration_episode(
                env, learner.policy(), buffer, rngs["act"], env_seed, counter, config.mode, on_step
            )
            if stats.discarded:
                continue
            result.exploration_episodes += 1
            if stats.length:
                result.episode_log.append((Source.EXPLORATION, env_seed, stats.length))
        else:
            stats = inject_demonstration_episode(stream, buffer, config.mode)
            result.demo_episodes += 1
            result.episode_log.append((Source.DEMONSTRATION, None, stats.length))
        if stop:
            break

        if len(buffer) >= config.min_buffer:
            owed += stats.length * config.update_every
            while owed >= 1.0:
                owed -= 1.0
                try:
                    batch = buffer.sample(batch_size, rngs["sample"])
                except BufferNotReady:  # pragma: no cover - guarded above
                    break
                logger.record_losses(learner.update(batch))
                result.updates += 1

    result.rows = logger.rows
    result.env_steps = counter.count
    result.stopped_early = stop
    if not result.rows and counter.count == 0:
        raise RunAborted("run ended without taking a single exploration step")
    return result
