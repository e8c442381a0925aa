import inspect
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from grirl import backbones
from grirl.backbones import (
    DdpgConfig,
    DdpgLearner,
    DqnConfig,
    DqnLearner,
    SacConfig,
    SacLearner,
    act,
    dqn_targets,
    epsilon_at,
    huber,
    make_learner,
    polyak,
    read_manifest,
    write_checkpoint,
)
from grirl.envs.spaces import Box, Discrete
from grirl.nn import Mlp, load_mlp
from grirl.replay import Batch


def const_net(n_in, values, output="identity"):
    """Net whose output ignores the input: zero weights, bias = values."""
    values = np.asarray(values, dtype=np.float64)
    return Mlp((n_in, len(values)), [np.zeros((len(values), n_in))], [values.copy()], "relu", output)


def linear_net(weights, bias, output="identity"):
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    return Mlp((w.shape[1], w.shape[0]), [w], [np.asarray(bias, dtype=np.float64)], "relu", output)


def batch(states, actions, rewards, next_states, dones):
    return Batch(np.asarray(states, float), np.asarray(actions), np.asarray(rewards, float),
                 np.asarray(next_states, float), np.asarray(dones, bool))


def fd_check(loss_fn, params, grads, h=1e-6, rtol=1e-3):
    for k, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += h
            minus[k][idx] -= h
            numeric = (loss_fn(plus) - loss_fn(minus)) / (2 * h)
            assert grads[k][idx] == pytest.approx(numeric, rel=rtol, abs=1e-7)


# DQN -----------------------------------------------------------------------

def dqn(config=None, obs_dim=2, n_actions=2, seed=0):
    return DqnLearner(obs_dim, n_actions, config or DqnConfig(), np.random.default_rng(seed))


def test_dqn_targets_fixture():
    learner = dqn()
    learner.target_q_net = const_net(2, [0.5, 2.0])
    b = batch(np.zeros((3, 2)), [0, 1, 0], [1.0, 0.0, 2.0], np.ones((3, 2)), [False, False, True])
    y = dqn_targets(b, learner)
    # 1 + 0.99*2 ; 0 + 0.99*2 ; terminal -> r
    assert y.tolist() == pytest.approx([2.98, 1.98, 2.0], abs=1e-12)
    assert y[2] == 2.0


def test_dqn_demo_transition_same_rule():
    learner = dqn()
    learner.target_q_net = const_net(2, [0.5, 2.0])
    demo = batch(np.zeros((1, 2)), [1], [1.0], np.ones((1, 2)), [False])
    assert dqn_targets(demo, learner)[0] == pytest.approx(1.0 + 0.99 * 2.0, abs=1e-12)


def test_dqn_zero_td_leaves_params():
    learner = dqn()
    b = batch(np.eye(2), [0, 1], [0.0, 0.0], np.eye(2), [True, True])
    q = learner.q_net.forward(b.states)
    exact = batch(b.states, b.actions, q[[0, 1], [0, 1]], b.next_states, b.dones)
    before = [p.copy() for p in learner.q_net.params()]
    out = learner.update(exact)
    assert out["critic_loss"] == 0.0
    assert all(np.array_equal(a, b) for a, b in zip(before, learner.q_net.params()))


def test_dqn_single_transition_moves_toward_target():
    learner = dqn(DqnConfig(lr=1e-3, target_sync=10_000), obs_dim=1)
    b = batch([[1.0]], [1], [5.0], [[0.0]], [True])
    gaps = []
    for _ in range(20):
        gaps.append(abs(learner.q_net.forward(np.array([1.0]))[1] - 5.0))
        learner.update(b)
    assert all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))


def test_dqn_toy_mdp_converges_to_fixed_point():
    # one state; action 0 pays 0.1 and stays, action 1 pays 0.5 and ends.
    # Q*(1) = 0.5, Q*(0) = 0.1 + 0.9 * max(Q*(0), 0.5) = 0.1 / (1 - 0.9) = 1.0
    cfg = DqnConfig(gamma=0.9, lr=0.01, hidden=(), target_sync=50, huber_delta=1.0)
    learner = dqn(cfg, obs_dim=1)
    b = batch([[1.0], [1.0]], [0, 1], [0.1, 0.5], [[1.0], [1.0]], [False, True])
    for _ in range(10_000):
        learner.update(b)
    q = learner.q_net.forward(np.array([1.0]))
    assert q[0] == pytest.approx(1.0, abs=1e-2) and q[1] == pytest.approx(0.5, abs=1e-2)


def test_dqn_hard_sync_period():
    learner = dqn(DqnConfig(target_sync=3, lr=1e-2))
    b = batch(np.ones((2, 2)), [0, 1], [1.0, 0.0], np.ones((2, 2)), [False, True])
    initial = learner.target_q_net.params()
    for k in range(1, 7):
        learner.update(b)
        same = all(np.array_equal(a, c) for a, c in zip(learner.target_q_net.params(), learner.q_net.params()))
        assert same == (k % 3 == 0)
        if k < 3:
            assert all(np.array_equal(a, c) for a, c in zip(learner.target_q_net.params(), initial))


def test_dqn_loss_gradient_fd():
    learner = dqn(DqnConfig(hidden=(5,)), obs_dim=3, n_actions=4, seed=2)
    rng = np.random.default_rng(3)
    b = batch(rng.standard_normal((6, 3)), rng.integers(0, 4, 6), rng.standard_normal(6), rng.standard_normal((6, 3)),
              rng.random(6) < 0.3)
    y = learner.targets(b) * 3.0  # push some TD errors past the Huber knee
    _, grads = learner.loss_and_grads(b, y)
    net = learner.q_net

    def loss(ps):
        learner.q_net = net.with_params(ps)
        try:
            return learner.loss_and_grads(b, y)[0]
        finally:
            learner.q_net = net

    fd_check(loss, net.params(), grads)


def test_dqn_seeded_loss_sequence_repeats():
    def run():
        learner = dqn(DqnConfig(batch_size=8, lr=1e-3), obs_dim=3, n_actions=3, seed=5)
        rng = np.random.default_rng(6)
        losses = []
        for _ in range(20):
            b = batch(rng.standard_normal((8, 3)), rng.integers(0, 3, 8), rng.standard_normal(8),
                      rng.standard_normal((8, 3)), rng.random(8) < 0.2)
            losses.append(learner.update(b)["critic_loss"])
        return losses

    assert run() == run()


def test_huber_values():
    loss, grad = huber(np.array([0.5, -3.0]), 1.0)
    assert loss.tolist() == [0.125, 2.5] and grad.tolist() == [0.5, -1.0]


def test_epsilon_schedule():
    cfg = DqnConfig(eps_start=1.0, eps_end=0.05, eps_decay_steps=100)
    assert epsilon_at(cfg, 0) == 1.0
    assert epsilon_at(cfg, 50) == pytest.approx(0.525)
    assert epsilon_at(cfg, 10_000) == pytest.approx(0.05, abs=1e-15)


def test_dqn_uniform_when_epsilon_one():
    learner = dqn(DqnConfig(eps_start=1.0, eps_end=1.0), obs_dim=10, n_actions=108)
    rng = np.random.default_rng(0)
    counts = np.bincount([act(learner, np.zeros(10), "explore", rng) for _ in range(54_000)], minlength=108)
    assert len(counts) == 108 and stats.chisquare(counts).pvalue > 0.001


def test_dqn_greedy_ties_lowest_index():
    learner = dqn(obs_dim=2, n_actions=5)
    learner.q_net = const_net(2, [0.0, 3.0, 1.0, 3.0, 2.0])
    assert act(learner, np.zeros(2), "exploit", np.random.default_rng(0)) == 1


# polyak ---------------------------------------------------------------------

def test_polyak_examples():
    assert polyak([np.array([0.0])], [np.array([1.0])], 0.005)[0].tolist() == [0.005]
    online = [np.array([1.5, -2.0])]
    out = polyak([np.array([7.0, 3.0])], online, 1.0)
    assert np.array_equal(out[0], online[0]) and out[0] is not online[0]
    with pytest.raises(ValueError):
        polyak([np.zeros(1)], [np.zeros(1)], 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.sampled_from([0.5, 0.25, 0.125, 0.0625]))
def test_polyak_contraction_exact_for_dyadic_tau(target, online, tau):
    # with dyadic tau and values on a coarse grid every product is exact
    target, online = round(target * 64) / 64, round(online * 64) / 64
    new = polyak([np.array(target)], [np.array(online)], tau)[0]
    assert abs(float(new) - online) == (1 - tau) * abs(target - online)


@settings(max_examples=100, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.001, 1.0))
def test_polyak_contraction(target, online, tau):
    new = polyak([np.array(target)], [np.array(online)], tau)[0]
    assert abs(float(new) - online) == pytest.approx((1 - tau) * abs(target - online), rel=1e-12, abs=1e-12)


# DDPG -------------------------------------------------------------------------

def ddpg(seed=0, **kw):
    return DdpgLearner(2, 1, DdpgConfig(**kw), np.random.default_rng(seed))


def test_ddpg_targets_fixture():
    learner = ddpg()
    learner.target_actor = const_net(2, [0.3], output="tanh")
    # Q_t(s', a) = 2a + 1 regardless of s'
    learner.target_critic = linear_net([[0.0, 0.0, 2.0]], [1.0])
    b = batch(np.zeros((3, 2)), [[0.1], [0.2], [0.3]], [1.0, -1.0, 0.5], np.ones((3, 2)), [False, False, True])
    q_next = 2 * math.tanh(0.3) + 1
    assert learner.targets(b).tolist() == pytest.approx([1 + 0.99 * q_next, -1 + 0.99 * q_next, 0.5], abs=1e-12)


def test_ddpg_done_batch_ignores_target_nets():
    a, b_ = ddpg(seed=0), ddpg(seed=1)
    b = batch(np.zeros((2, 2)), [[0.0], [0.5]], [0.25, -3.0], np.ones((2, 2)), [True, True])
    assert a.targets(b).tolist() == b_.targets(b).tolist() == [0.25, -3.0]


def test_ddpg_polyak_tau_one_copies():
    learner = ddpg(tau=1.0)
    rng = np.random.default_rng(0)
    b = batch(rng.standard_normal((4, 2)), rng.uniform(-1, 1, (4, 1)), rng.standard_normal(4),
              rng.standard_normal((4, 2)), [False] * 4)
    learner.update(b)
    for t, o in ((learner.target_actor, learner.actor), (learner.target_critic, learner.critic)):
        assert all(np.array_equal(x, y) for x, y in zip(t.params(), o.params()))


def test_ddpg_gradients_fd():
    learner = DdpgLearner(2, 1, DdpgConfig(hidden=(4,)), np.random.default_rng(1))
    rng = np.random.default_rng(2)
    b = batch(rng.standard_normal((5, 2)), rng.uniform(-1, 1, (5, 1)), rng.standard_normal(5),
              rng.standard_normal((5, 2)), [False] * 5)
    y = learner.targets(b)
    _, cgrads = learner.critic_loss_and_grads(b, y)
    critic = learner.critic
    fd_check(lambda ps: learner.critic_loss_and_grads(b, y, critic.with_params(ps))[0], critic.params(), cgrads)
    _, agrads = learner.actor_loss_and_grads(b)
    actor = learner.actor
    fd_check(lambda ps: learner.actor_loss_and_grads(b, actor.with_params(ps))[0], actor.params(), agrads)


def test_ddpg_act_modes():
    learner = ddpg()
    obs = np.array([0.3, -0.2])
    exploit = act(learner, obs, "exploit", np.random.default_rng(0))
    assert np.array_equal(exploit, learner.actor.forward(obs))
    noisy = [act(learner, obs, "explore", np.random.default_rng(s)) for s in range(50)]
    assert all(np.all(np.abs(a) <= 1.0) for a in noisy)
    assert np.std([a[0] for a in noisy]) > 0


# SAC --------------------------------------------------------------------------

LOG_STD_FOR_LOGP_MINUS_ONE = 1.0 - 0.5 * math.log(2 * math.pi)


def sac(seed=0, **kw):
    return SacLearner(2, 1, SacConfig(**kw), np.random.default_rng(seed))


def test_sac_target_fixture():
    learner = sac(alpha=0.2)
    # mean 0 and noise 0 give log pi = -log_std - log(2 pi)/2 = -1
    learner.actor = const_net(2, [0.0, LOG_STD_FOR_LOGP_MINUS_ONE])
    learner.q1_target = const_net(3, [1.0])
    learner.q2_target = const_net(3, [1.5])
    b = batch(np.zeros((3, 2)), np.zeros((3, 1)), [0.5, 0.0, 2.0], np.ones((3, 2)), [False, False, True])
    y = learner.targets(b, noise=np.zeros((3, 1)))
    assert y.tolist() == pytest.approx([1.688, 0.99 * 1.2, 2.0], abs=1e-12)


def test_sac_alpha_zero_is_clipped_double_q():
    learner = sac(alpha=0.0)
    learner.q1_target = const_net(3, [4.0])
    learner.q2_target = const_net(3, [-1.0])
    b = batch(np.zeros((2, 2)), np.zeros((2, 1)), [1.0, 1.0], np.ones((2, 2)), [False, True])
    assert learner.targets(b).tolist() == pytest.approx([1.0 - 0.99, 1.0], abs=1e-12)


def test_sac_auto_alpha_decreases_when_entropy_high():
    learner = sac(seed=3)
    # tanh(N(0, 1)) has entropy near 0.55, well above the target -1;
    # a much wider Gaussian would saturate tanh and lower the entropy instead
    ps = learner.actor.params()
    ps[-2][:] = 0.0
    ps[-1][:] = [0.0, 0.0]
    learner.actor = learner.actor.with_params(ps)
    rng = np.random.default_rng(0)
    b = batch(rng.standard_normal((16, 2)), rng.uniform(-1, 1, (16, 1)), rng.standard_normal(16),
              rng.standard_normal((16, 2)), [False] * 16)
    start = learner.alpha
    learner.update(b)
    assert learner.alpha < start


def test_sac_alpha_gradient_sign():
    learner = sac()
    # target entropy -1: entropy 3 is above it, so log alpha should go down
    assert learner.alpha_gradient(np.array([-3.0, -3.0])) == 4.0
    assert learner.alpha_gradient(np.array([2.0, 1.0])) == -0.5


def test_sac_gradients_fd():
    learner = SacLearner(2, 2, SacConfig(hidden=(4,), alpha=0.3), np.random.default_rng(4))
    rng = np.random.default_rng(5)
    b = batch(rng.standard_normal((5, 2)), rng.uniform(-1, 1, (5, 2)), rng.standard_normal(5),
              rng.standard_normal((5, 2)), [False] * 5)
    y = learner.targets(b, noise=rng.standard_normal((5, 2)))
    _, cgrads = SacLearner.critic_loss_and_grads(learner.q1, b, y)
    q1 = learner.q1
    fd_check(lambda ps: SacLearner.critic_loss_and_grads(q1.with_params(ps), b, y)[0], q1.params(), cgrads)
    noise = rng.standard_normal((5, 2))
    _, agrads, _ = learner.actor_loss_and_grads(b, noise)
    actor = learner.actor
    fd_check(lambda ps: learner.actor_loss_and_grads(b, noise, actor.with_params(ps))[0], actor.params(), agrads)


def test_sac_exploit_deterministic_and_bounded():
    learner = sac()
    obs = np.array([0.1, 0.9])
    a1 = act(learner, obs, "exploit", np.random.default_rng(0))
    a2 = act(learner, obs, "exploit", np.random.default_rng(99))
    assert np.array_equal(a1, a2) and np.all(np.abs(a1) < 1)
    s1 = act(learner, obs, "explore", np.random.default_rng(1))
    s2 = act(learner, obs, "explore", np.random.default_rng(2))
    assert not np.array_equal(s1, s2)


# shared ------------------------------------------------------------------------

def test_make_learner_checks_action_space():
    rng = np.random.default_rng(0)
    assert isinstance(make_learner("dqn", 10, Discrete(108), DqnConfig(), rng), DqnLearner)
    with pytest.raises(ValueError):
        make_learner("dqn", 3, Box((-2.0,), (2.0,)), DqnConfig(), rng)
    with pytest.raises(ValueError):
        make_learner("sac", 10, Discrete(4), SacConfig(), rng)
    with pytest.raises(ValueError):
        act(make_learner("sac", 3, Box((-2.0,), (2.0,)), SacConfig(), rng), np.zeros(3), "greedy", rng)


def test_update_rules_never_mention_source():
    for module in (backbones.dqn, backbones.ddpg, backbones.sac, backbones.common):
        text = inspect.getsource(module)
        assert "source" not in text.lower(), module.__name__


def test_checkpoint_manifest_round_trip(tmp_path):
    learner = SacLearner(3, 1, SacConfig(hidden=(8,)), np.random.default_rng(0))
    write_checkpoint(tmp_path, learner.networks(), learner.checkpoint_extra())
    nets, extra = read_manifest(tmp_path)
    assert set(nets) == {"actor", "q1", "q2", "q1_target", "q2_target"}
    assert extra["update_count"] == "0"
    actor = load_mlp(tmp_path / nets["actor"]["file"])
    assert all(a.tobytes() == b.tobytes() for a, b in zip(actor.params(), learner.actor.params()))
