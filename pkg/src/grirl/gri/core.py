"""Building blocks shared by the single-process and threaded runners."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from grirl.demodata import DatasetMax, RdemoPolicy
from grirl.envs.spaces import Box
from grirl.replay import Episode, ReplayBuffer, Source

log = logging.getLogger(__name__)

AgentKind = Source
MODES = ("gri", "vanilla", "sqil")
EVAL_SEED_BASE = 2**31  # training resets draw seeds below this


class RunAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class GriConfig:
    p_demo: float = 0.25
    rdemo_policy: RdemoPolicy = DatasetMax()
    min_buffer: int = 10_000
    total_env_steps: int = 100_000
    n_exploration_agents: int = 1
    n_demonstration_agents: int = 0
    mode: str = "gri"
    capacity: int = 1_000_000
    update_every: float = 1.0
    snapshot_period: int = 500
    eval_every: int = 5_000
    eval_episodes: int = 10
    distributed: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.p_demo <= 1.0:
            raise ValueError(f"p_demo must lie in [0, 1], got {self.p_demo}")

    @property
    def effective_p_demo(self) -> float:
        if self.mode == "vanilla":
            return 0.0
        if self.distributed:
            total = self.n_exploration_agents + self.n_demonstration_agents
            return self.n_demonstration_agents / total if total else 0.0
        return self.p_demo


@dataclass(frozen=True)
class EpisodeStats:
    length: int
    episode_return: float
    source: Source
    truncated: bool = False
    discarded: bool = False


def select_source(u: float, p_demo: float) -> Source:
    """Exploration iff ``u >= p_demo``."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    return Source.EXPLORATION if u >= p_demo else Source.DEMONSTRATION


def sqil_mode_transform(episode: Episode, mode: str = "sqil") -> Episode:
    """SQIL relabelling: demonstrations get reward 1, exploration reward 0.

    Any other mode returns the episode unchanged.
    """
    if mode != "sqil":
        return episode
    value = 1.0 if episode.source == Source.DEMONSTRATION else 0.0
    return episode.with_rewards(np.full(len(episode), value))


class StepCounter:
    """Exploration step budget; ``claim`` is the only way to take a step."""

    def __init__(self, total: int, lock=None):
        self.total = int(total)
        self.count = 0
        self._lock = lock

    def claim(self) -> bool:
        if self._lock is None:
            if self.count >= self.total:
                return False
            self.count += 1
            return True
        with self._lock:
            if self.count >= self.total:
                return False
            self.count += 1
            return True


def to_env_action(action_spec, action):
    return action_spec.from_unit(action) if isinstance(action_spec, Box) else int(action)


def collect_exploration_episode(
    env,
    policy,
    buffer: ReplayBuffer,
    rng: np.random.Generator,
    env_seed: int,
    counter: StepCounter | None = None,
    mode: str = "gri",
    on_step=None,
    env_steps_offset: int = 0,
) -> EpisodeStats:
    """Run one explore-mode episode and append it with true env rewards.

    ``counter`` caps the total number of env.step calls; ``on_step(n)`` runs
    after each step with the number of exploration steps taken so far.
    """
    spec = env.action_spec
    obs = env.reset(env_seed)
    states, actions, rewards, nexts, dones = [], [], [], [], []
    done = truncated = False
    try:
        while not done:
            if counter is not None and not counter.claim():
                truncated = True
                break
            # env steps taken before this one, used by step-dependent schedules
            taken = counter.count - 1 if counter is not None else env_steps_offset + len(states)
            a = policy.act(obs, True, rng, taken)
            nxt, reward, done = env.step(to_env_action(spec, a))
            states.append(obs)
            actions.append(a)
            rewards.append(reward)
            nexts.append(nxt)
            dones.append(done)
            obs = nxt
            if on_step is not None:
                on_step(taken + 1)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        log.warning("exploration episode (seed %d) discarded: %s", env_seed, exc)
        return EpisodeStats(len(states), float(np.sum(rewards)), Source.EXPLORATION, truncated, True)
    if not states:
        return EpisodeStats(0, 0.0, Source.EXPLORATION, truncated)
    ep = Episode(
        np.array(states),
        np.array(actions, dtype=np.int64 if buffer.discrete else np.float64),
        np.array(rewards, dtype=np.float64),
        np.array(nexts),
        np.array(dones, dtype=bool),
        Source.EXPLORATION,
    )
    buffer.append_episode(sqil_mode_transform(ep, mode))
    return EpisodeStats(len(ep), float(ep.rewards.sum()), Source.EXPLORATION, truncated)


def inject_demonstration_episode(demo_stream, buffer: ReplayBuffer, mode: str = "gri") -> EpisodeStats:
    ep = sqil_mode_transform(demo_stream.next_episode(), mode)
    buffer.append_episode(ep)
    return EpisodeStats(len(ep), float(ep.rewards.sum()), Source.DEMONSTRATION)


def evaluate(policy, env, seeds) -> np.ndarray:
    """Exploit-mode returns, one per seed."""
    spec = env.action_spec
    returns = []
    dummy = np.random.default_rng(0)
    for s in seeds:
        obs = env.reset(int(s))
        total, done = 0.0, False
        while not done:
            obs, r, done = env.step(to_env_action(spec, policy.act(obs, False, dummy)))
            total += r
        returns.append(total)
    return np.array(returns)


def eval_seeds(run_seed: int, n: int) -> list[int]:
    base = EVAL_SEED_BASE + (run_seed % 100_000) * 1000
    return [base + i for i in range(n)]


def mean_or_nan(values) -> float:
    return float(np.mean(values)) if len(values) else math.nan
