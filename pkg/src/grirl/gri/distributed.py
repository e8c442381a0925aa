"""Threaded actor/learner runner.

K exploration workers and M demonstration workers append whole episodes to one
shared buffer while the calling thread runs the learner. Actors read policy
snapshots that the learner republishes every ``snapshot_period`` updates.
Demonstration workers are paced by episode count: worker j injects its n-th
episode only once the exploration workers have completed n episodes each on
average, so both kinds emit episodes at the same rate.
"""

from __future__ import annotations

import threading
import time

import numpy as np

from grirl.backbones import make_learner
from grirl.gri.core import (
    GriConfig,
    RunAborted,
    StepCounter,
    collect_exploration_episode,
    eval_seeds,
    inject_demonstration_episode,
)
from grirl.gri.runner import RunResult, _RowLogger, make_buffer, make_demo_stream
from grirl.replay import BufferNotReady

_IDLE_WAIT = 0.002


class _Shared:
    def __init__(self, n_explorers: int):
        self.cond = threading.Condition()
        self.stop = threading.Event()
        self.n_explorers = max(n_explorers, 1)
        self.explore_episodes = 0
        self.demo_episodes = 0
        self.errors: list[BaseException] = []
        self.policy = None

    def fail(self, exc: BaseException) -> None:
        with self.cond:
            self.errors.append(exc)
            self.stop.set()
            self.cond.notify_all()


def train_distributed(config: GriConfig, backbone, backbone_config, env_factory, seed, dataset=None,
                      on_row=None, wall_clock=False, stop_at_return=None) -> RunResult:
    k, m = config.n_exploration_agents, config.n_demonstration_agents
    if k < 1:
        raise ValueError("distributed mode needs at least one exploration agent")
    if config.mode == "vanilla":
        m = 0
    root = np.random.SeedSequence(seed)
    learner_seq, sample_seq, demo_seq, *worker_seqs = root.spawn(3 + k + m)

    probe_env = env_factory()
    learner = make_learner(backbone, probe_env.obs_dim, probe_env.action_spec, backbone_config,
                           np.random.default_rng(learner_seq))
    buffer = make_buffer(config, probe_env)
    demo_seeds = np.random.default_rng(demo_seq).integers(2**63, size=max(m, 1))
    streams = []
    if m:
        for j in range(m):
            s = make_demo_stream(config, dataset, probe_env, int(demo_seeds[j]))
            if s is None:
                raise ValueError("demonstration agents need a dataset")
            streams.append(s)

    shared = _Shared(k)
    shared.policy = learner.policy()
    counter = StepCounter(config.total_env_steps, threading.Lock())

    def explorer(idx: int) -> None:
        try:
            rng = np.random.default_rng(worker_seqs[idx])
            env = env_factory()
            while not shared.stop.is_set() and counter.count < counter.total:
                stats = collect_exploration_episode(
                    env, shared.policy, buffer, rng, int(rng.integers(2**31)), counter, config.mode
                )
                if stats.discarded or not stats.length:
                    continue
                with shared.cond:
                    shared.explore_episodes += 1
                    shared.cond.notify_all()
        except BaseException as exc:  # noqa: BLE001 - any worker failure aborts the run
            shared.fail(exc)

    def demonstrator(j: int) -> None:
        try:
            injected = 0
            while not shared.stop.is_set():
                with shared.cond:
                    while (not shared.stop.is_set()
                           and shared.explore_episodes < (injected + 1) * shared.n_explorers
                           and counter.count < counter.total):
                        shared.cond.wait(0.05)
                    if shared.stop.is_set() or counter.count >= counter.total:
                        return
                inject_demonstration_episode(streams[j], buffer, config.mode)
                injected += 1
                with shared.cond:
                    shared.demo_episodes += 1
        except BaseException as exc:  # noqa: BLE001
            shared.fail(exc)

    threads = [threading.Thread(target=explorer, args=(i,), name=f"explorer-{i}", daemon=True) for i in range(k)]
    threads += [threading.Thread(target=demonstrator, args=(j,), name=f"demo-{j}", daemon=True) for j in range(m)]

    result = RunResult(learner, buffer)
    logger = _RowLogger(config, lambda: learner.policy(), env_factory(), eval_seeds(seed, config.eval_episodes),
                        buffer, on_row, wall_clock)
    sample_rng = np.random.default_rng(sample_seq)
    next_eval = config.eval_every
    stopped_early = False
    for t in threads:
        t.start()
    try:
        while True:
            explorers_alive = any(t.is_alive() for t in threads[:k])
            steps = counter.count
            while next_eval <= steps and next_eval <= config.total_env_steps:
                row = logger.log(next_eval)
                next_eval += config.eval_every
                if stop_at_return is not None and row.mean_eval_return >= stop_at_return:
                    stopped_early = True
            if stopped_early or shared.stop.is_set() or not explorers_alive:
                break
            owed = config.update_every * buffer.insertion_count - result.updates
            if len(buffer) >= config.min_buffer and owed >= 1.0:
                try:
                    batch = buffer.sample(backbone_config.batch_size, sample_rng)
                except BufferNotReady:
                    time.sleep(_IDLE_WAIT)
                    continue
                logger.record_losses(learner.update(batch))
                result.updates += 1
                if result.updates % config.snapshot_period == 0:
                    shared.policy = learner.policy()
            else:
                time.sleep(_IDLE_WAIT)
    except BaseException as exc:
        shared.fail(exc)
    finally:
        shared.stop.set()
        with shared.cond:
            shared.cond.notify_all()
        for t in threads:
            t.join()

    if shared.errors:
        raise RunAborted(f"worker failed: {shared.errors[0]!r}") from shared.errors[0]
    if not stopped_early and config.total_env_steps % config.eval_every and counter.count == config.total_env_steps:
        logger.log(config.total_env_steps)
    result.rows = logger.rows
    result.env_steps = counter.count
    result.exploration_episodes = shared.explore_episodes
    result.demo_episodes = shared.demo_episodes
    result.stopped_early = stopped_early
    return result
