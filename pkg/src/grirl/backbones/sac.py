"""Soft actor-critic with twin critics and optional entropy auto-tuning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from grirl.backbones.common import TrainingDiverged, check_finite, mlp_layers, polyak
from grirl.nn import AdamState, Mlp, adam_step, gaussian_backward, gaussian_sample_and_logprob
from grirl.replay import Batch


@dataclass(frozen=True)
class SacConfig:
    gamma: float = 0.99
    lr: float = 3e-4
    batch_size: int = 256
    hidden: tuple[int, ...] = (64, 64)
    tau: float = 0.005
    alpha: float | None = None  # None -> auto-tuned
    init_alpha: float = 1.0
    target_entropy: float | None = None  # None -> -action_dim


def split_head(out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = out.shape[-1] // 2
    return out[..., :d], out[..., d:]


@dataclass(frozen=True)
class SacPolicy:
    actor: Mlp

    def act(self, observation, explore: bool, rng: np.random.Generator, env_steps: int = 0) -> np.ndarray:
        mean, log_std = split_head(self.actor.forward(observation))
        if not explore:
            return np.tanh(mean)
        return gaussian_sample_and_logprob(mean, log_std, rng.standard_normal(mean.shape)).action


class SacLearner:
    kind = "sac"
    discrete = False

    def __init__(self, obs_dim: int, action_dim: int, config: SacConfig, rng: np.random.Generator):
        self.config = config
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.rng = rng
        self.actor = Mlp.init(mlp_layers(obs_dim, config.hidden, 2 * action_dim), rng)
        self.q1 = Mlp.init(mlp_layers(obs_dim + action_dim, config.hidden, 1), rng)
        self.q2 = Mlp.init(mlp_layers(obs_dim + action_dim, config.hidden, 1), rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.actor_adam = AdamState.zeros_like(self.actor.params(), learning_rate=config.lr)
        self.q1_adam = AdamState.zeros_like(self.q1.params(), learning_rate=config.lr)
        self.q2_adam = AdamState.zeros_like(self.q2.params(), learning_rate=config.lr)
        self.auto_alpha = config.alpha is None
        alpha0 = config.init_alpha if self.auto_alpha else config.alpha
        self.log_alpha = np.array(math.log(alpha0) if alpha0 > 0 else -np.inf)
        self.alpha_adam = AdamState.zeros_like([self.log_alpha], learning_rate=config.lr)
        self.target_entropy = (
            float(config.target_entropy) if config.target_entropy is not None else -float(action_dim)
        )
        self.update_count = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha))

    def policy(self) -> SacPolicy:
        return SacPolicy(self.actor)

    def act(self, observation, explore: bool, rng: np.random.Generator, env_steps: int = 0) -> np.ndarray:
        return self.policy().act(observation, explore, rng, env_steps)

    def targets(self, batch: Batch, noise: np.ndarray | None = None) -> np.ndarray:
        """r + gamma (1 - done) (min(Q1t, Q2t)(s', a') - alpha log pi(a'|s')), a' ~ pi(.|s')."""
        mean, log_std = split_head(self.actor.forward(batch.next_states))
        if noise is None:
            noise = self.rng.standard_normal(mean.shape)
        smp = gaussian_sample_and_logprob(mean, log_std, noise)
        x = np.hstack([batch.next_states, smp.action])
        q_min = np.minimum(self.q1_target.forward(x), self.q2_target.forward(x))[:, 0]
        soft = q_min - self.alpha * smp.log_prob if self.alpha > 0 else q_min
        not_done = 1.0 - batch.dones.astype(np.float64)
        return batch.rewards + self.config.gamma * not_done * soft

    @staticmethod
    def critic_loss_and_grads(critic: Mlp, batch: Batch, y: np.ndarray):
        q, tape = critic.forward_train(np.hstack([batch.states, batch.actions]))
        err = q[:, 0] - y
        grads, _ = critic.backward(tape, (2.0 / len(batch)) * err[:, None])
        return float(np.mean(err * err)), grads

    def actor_loss_and_grads(self, batch: Batch, noise: np.ndarray, actor: Mlp | None = None):
        """Loss mean(alpha log pi(a|s) - min(Q1, Q2)(s, a)) with a reparameterised by ``noise``."""
        actor = actor or self.actor
        out, atape = actor.forward_train(batch.states)
        mean, log_std = split_head(out)
        smp = gaussian_sample_and_logprob(mean, log_std, noise)
        x = np.hstack([batch.states, smp.action])
        q1, t1 = self.q1.forward_train(x)
        q2, t2 = self.q2.forward_train(x)
        n = len(batch)
        use_q1 = (q1 <= q2)
        q_min = np.where(use_q1, q1, q2)[:, 0]
        alpha = self.alpha
        loss = float(np.mean(alpha * smp.log_prob - q_min))
        _, dx1 = self.q1.backward(t1, np.where(use_q1, -1.0 / n, 0.0), need_input_grad=True)
        _, dx2 = self.q2.backward(t2, np.where(use_q1, 0.0, -1.0 / n), need_input_grad=True)
        d_action = dx1[:, self.obs_dim:] + dx2[:, self.obs_dim:]
        d_mean, d_log_std = gaussian_backward(smp, d_action, np.full(n, alpha / n))
        grads, _ = actor.backward(atape, np.hstack([d_mean, d_log_std]))
        return loss, grads, smp.log_prob

    def alpha_gradient(self, log_prob: np.ndarray) -> float:
        """d/d(log alpha) of -log_alpha * mean(log pi + target_entropy)."""
        return -float(np.mean(log_prob + self.target_entropy))

    def _step(self, net: Mlp, grads, state: AdamState):
        try:
            params, state = adam_step(net.params(), grads, state, net.param_names())
        except FloatingPointError as exc:
            raise TrainingDiverged(str(exc)) from exc
        return net.with_params(params), state

    def update(self, batch: Batch) -> dict[str, float]:
        y = self.targets(batch)
        l1, g1 = self.critic_loss_and_grads(self.q1, batch, y)
        l2, g2 = self.critic_loss_and_grads(self.q2, batch, y)
        critic_loss = 0.5 * (l1 + l2)
        check_finite("SAC critic loss", critic_loss)
        self.q1, self.q1_adam = self._step(self.q1, g1, self.q1_adam)
        self.q2, self.q2_adam = self._step(self.q2, g2, self.q2_adam)

        noise = self.rng.standard_normal((len(batch), self.action_dim))
        actor_loss, grads, log_prob = self.actor_loss_and_grads(batch, noise)
        check_finite("SAC actor loss", actor_loss)
        self.actor, self.actor_adam = self._step(self.actor, grads, self.actor_adam)

        if self.auto_alpha:
            g = np.array(self.alpha_gradient(log_prob))
            (self.log_alpha,), self.alpha_adam = adam_step([self.log_alpha], [g], self.alpha_adam)
            check_finite("SAC log alpha", self.log_alpha)

        tau = self.config.tau
        self.q1_target = self.q1_target.with_params(polyak(self.q1_target.params(), self.q1.params(), tau))
        self.q2_target = self.q2_target.with_params(polyak(self.q2_target.params(), self.q2.params(), tau))
        self.update_count += 1
        return {"critic_loss": critic_loss, "actor_loss": actor_loss, "alpha": self.alpha}

    def networks(self) -> dict[str, Mlp]:
        return {
            "actor": self.actor,
            "q1": self.q1,
            "q2": self.q2,
            "q1_target": self.q1_target,
            "q2_target": self.q2_target,
        }

    def checkpoint_extra(self) -> dict[str, object]:
        return {"update_count": self.update_count, "log_alpha": float(self.log_alpha)}


def sac_update(batch: Batch, learner: SacLearner) -> tuple[float, float, float]:
    out = learner.update(batch)
    return out["critic_loss"], out["actor_loss"], out["alpha"]
