import math

import numpy as np
import pytest

from grirl import demodata as dd
from grirl.backbones import DdpgConfig, DqnConfig, SacConfig
from grirl.demodata import DatasetMax, Fixed
from grirl.envs import Pendulum, PendulumEnergyController, TrackDrive2D, expert_for
from grirl.gri import (
    GriConfig,
    RunAborted,
    StepCounter,
    eval_seeds,
    select_source,
    sqil_mode_transform,
    train,
)
from grirl.replay import Episode, Source

HORIZON = 5


def short_pendulum():
    return Pendulum(horizon=HORIZON)


@pytest.fixture(scope="module")
def short_demos():
    return dd.record(short_pendulum(), PendulumEnergyController(), 2000, 11)


def small_sac():
    return SacConfig(hidden=(16, 16), batch_size=32)


def test_select_source_threshold():
    assert select_source(0.25, 0.25) == Source.EXPLORATION
    assert select_source(0.2499, 0.25) == Source.DEMONSTRATION
    assert all(select_source(u, 0.0) == Source.EXPLORATION for u in (0.0, 0.5, 0.999))
    assert all(select_source(u, 1.0) == Source.DEMONSTRATION for u in (0.0, 0.5, 0.999))
    with pytest.raises(ValueError):
        select_source(1.0, 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        GriConfig(p_demo=1.5)
    with pytest.raises(ValueError):
        GriConfig(mode="dqfd")
    assert GriConfig(p_demo=0.4, mode="vanilla").effective_p_demo == 0.0
    assert GriConfig(distributed=True, n_exploration_agents=9, n_demonstration_agents=3).effective_p_demo == 0.25


def test_sqil_transform():
    ep = Episode(np.zeros((3, 2)), np.zeros((3, 1)), np.array([-4.0, 2.0, 0.5]), np.zeros((3, 2)),
                 np.array([False, False, True]), Source.EXPLORATION)
    assert sqil_mode_transform(ep).rewards.tolist() == [0.0] * 3
    demo = Episode(ep.states, ep.actions, ep.rewards, ep.next_states, ep.dones, Source.DEMONSTRATION)
    assert sqil_mode_transform(demo).rewards.tolist() == [1.0] * 3
    assert sqil_mode_transform(ep, "gri") is ep


def test_step_counter_budget():
    c = StepCounter(3)
    assert [c.claim() for _ in range(5)] == [True, True, True, False, False]


def test_eval_seeds_disjoint_from_training():
    seeds = eval_seeds(0, 10)
    assert len(set(seeds)) == 10 and min(seeds) >= 2**31


def test_missing_dataset_rejected():
    with pytest.raises(ValueError, match="dataset"):
        train(GriConfig(p_demo=0.2, total_env_steps=10), "sac", small_sac(), short_pendulum, 0)


def test_dataset_env_mismatch_rejected(short_demos):
    with pytest.raises(ValueError):
        train(GriConfig(p_demo=0.2, total_env_steps=10), "dqn", DqnConfig(), TrackDrive2D, 0, short_demos)


@pytest.mark.parametrize("backbone,cfg,env_factory,expert", [
    ("sac", small_sac(), short_pendulum, PendulumEnergyController),
    ("ddpg", DdpgConfig(hidden=(16, 16), batch_size=32), short_pendulum, PendulumEnergyController),
    ("dqn", DqnConfig(hidden=(16, 16), batch_size=32), lambda: TrackDrive2D(horizon=40), None),
])
def test_p_demo_zero_matches_vanilla(backbone, cfg, env_factory, expert):
    env = env_factory()
    demos = dd.record(env, expert() if expert else expert_for(env), 200, 0)
    common = dict(total_env_steps=600, min_buffer=100, eval_every=200, eval_episodes=2)
    gri = train(GriConfig(p_demo=0.0, mode="gri", **common), backbone, cfg, env_factory, 4, demos)
    van = train(GriConfig(p_demo=0.0, mode="vanilla", **common), backbone, cfg, env_factory, 4)
    assert gri.rows == van.rows and gri.updates == van.updates > 0
    for (name, a), (_, b) in zip(gri.learner.networks().items(), van.learner.networks().items()):
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a.params(), b.params())), name
    assert gri.buffer.demo_fraction() == 0.0


def test_selection_binomial_and_buffer_fraction(short_demos):
    # demos and exploration share the horizon, so transition and episode fractions agree
    cfg = GriConfig(p_demo=0.25, rdemo_policy=Fixed(1.0), total_env_steps=40_000, min_buffer=10**9,
                    eval_every=40_000, eval_episodes=1)
    res = train(cfg, "sac", small_sac(), short_pendulum, 0, short_demos)
    n = len(res.selections)
    demos = sum(s == Source.DEMONSTRATION for s in res.selections)
    assert n >= 10_000
    assert abs(demos - 0.25 * n) <= 3 * math.sqrt(n * 0.25 * 0.75)
    assert res.updates == 0
    assert abs(res.buffer.demo_fraction() - 0.25) <= 0.02


def _replay_check(res, env_factory, rdemo):
    """Every demo reward equals rdemo; every exploration transition replays from its env seed."""
    batch, sources = res.buffer.contents()
    assert len(batch) == sum(length for _, _, length in res.episode_log)
    env = env_factory()
    pos = 0
    for source, env_seed, length in res.episode_log:
        sl = slice(pos, pos + length)
        assert np.all(sources[sl] == source)
        if source == Source.DEMONSTRATION:
            assert np.all(batch.rewards[sl] == rdemo)
        else:
            obs = env.reset(env_seed)
            for i in range(pos, pos + length):
                assert np.array_equal(batch.states[i], obs)
                obs, r, done = env.step(env.action_spec.from_unit(batch.actions[i]))
                assert batch.rewards[i] == r and np.array_equal(batch.next_states[i], obs)
                assert batch.dones[i] == done
        pos += length
    return batch, sources


@pytest.mark.parametrize("rdemo", [Fixed(1.0), DatasetMax()])
def test_injected_and_true_rewards(short_demos, rdemo):
    cfg = GriConfig(p_demo=0.3, rdemo_policy=rdemo, total_env_steps=400, min_buffer=50, eval_every=200,
                    eval_episodes=1)
    res = train(cfg, "sac", small_sac(), short_pendulum, 1, short_demos)
    _, sources = _replay_check(res, short_pendulum, dd.resolve_rdemo(rdemo, short_demos))
    assert 0 < sources.sum() < len(sources)


def test_sqil_rewards(short_demos):
    cfg = GriConfig(p_demo=0.5, mode="sqil", total_env_steps=300, min_buffer=50, eval_every=300, eval_episodes=1)
    res = train(cfg, "sac", small_sac(), short_pendulum, 2, short_demos)
    batch, sources = res.buffer.contents()
    demo = sources == Source.DEMONSTRATION
    assert demo.any() and (~demo).any()
    assert np.all(batch.rewards[demo] == 1.0) and np.all(batch.rewards[~demo] == 0.0)


def test_step_accounting_and_update_count(short_demos):
    cfg = GriConfig(p_demo=0.4, total_env_steps=503, min_buffer=60, update_every=0.5, eval_every=100,
                    eval_episodes=1)
    res = train(cfg, "sac", small_sac(), short_pendulum, 3, short_demos)
    explore = [n for s, _, n in res.episode_log if s == Source.EXPLORATION]
    assert res.env_steps == sum(explore) == 503
    assert [r.env_steps for r in res.rows] == [100, 200, 300, 400, 500, 503]
    # updates are owed per added transition once the buffer holds min_buffer
    size, owed, expected = 0, 0.0, 0
    for _, _, n in res.episode_log:
        size += n
        if size >= cfg.min_buffer:
            owed += n * cfg.update_every
            whole = math.floor(owed)
            expected += whole
            owed -= whole
    assert res.updates == expected


def test_run_is_seed_deterministic(short_demos):
    cfg = GriConfig(p_demo=0.3, total_env_steps=300, min_buffer=40, eval_every=100, eval_episodes=2)
    a = train(cfg, "sac", small_sac(), short_pendulum, 7, short_demos)
    b = train(cfg, "sac", small_sac(), short_pendulum, 7, short_demos)
    c = train(cfg, "sac", small_sac(), short_pendulum, 8, short_demos)
    assert a.rows == b.rows and a.episode_log == b.episode_log
    assert a.rows != c.rows


def test_stop_at_return(short_demos):
    cfg = GriConfig(p_demo=0.0, mode="vanilla", total_env_steps=1000, min_buffer=10**9, eval_every=100,
                    eval_episodes=1)
    res = train(cfg, "sac", small_sac(), short_pendulum, 0, stop_at_return=-1e9)
    assert res.stopped_early and res.env_steps == 100 and len(res.rows) == 1


def test_zero_budget_aborts():
    with pytest.raises(RunAborted):
        train(GriConfig(p_demo=0.0, total_env_steps=0), "sac", small_sac(), short_pendulum, 0)


# threaded runner -------------------------------------------------------------

def test_distributed_source_mix(short_demos):
    cfg = GriConfig(distributed=True, n_exploration_agents=9, n_demonstration_agents=3, total_env_steps=15_000,
                    min_buffer=500, eval_every=5000, eval_episodes=1, snapshot_period=50, rdemo_policy=Fixed(1.0))
    res = train(cfg, "sac", SacConfig(hidden=(8,), batch_size=16), short_pendulum, 0, short_demos)
    total = res.exploration_episodes + res.demo_episodes
    # each explorer may be cut mid-episode when the shared budget runs out
    assert res.env_steps == 15_000 and 3000 <= res.exploration_episodes < 3000 + 9
    assert abs(res.demo_episodes / total - 0.25) < 0.01
    assert abs(res.buffer.demo_fraction() - 0.25) < 0.01
    batch, sources = res.buffer.contents()
    assert np.all(batch.rewards[sources == Source.DEMONSTRATION] == 1.0)
    assert [r.env_steps for r in res.rows] == [5000, 10_000, 15_000]
    assert res.updates > 0


def test_distributed_worker_failure_aborts(short_demos):
    def broken():
        env = short_pendulum()
        env.step = lambda a: (_ for _ in ()).throw(KeyError("boom"))
        return env

    cfg = GriConfig(distributed=True, n_exploration_agents=2, total_env_steps=100, min_buffer=10, eval_every=100,
                    eval_episodes=1, mode="vanilla")
    with pytest.raises(RunAborted):
        train(cfg, "sac", small_sac(), broken, 0)
