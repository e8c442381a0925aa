"""DDPG: deterministic tanh actor, single critic, Polyak-averaged targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from grirl.backbones.common import TrainingDiverged, check_finite, mlp_layers, polyak
from grirl.nn import AdamState, Mlp, adam_step
from grirl.replay import Batch


@dataclass(frozen=True)
class DdpgConfig:
    gamma: float = 0.99
    lr: float = 3e-4
    batch_size: int = 256
    hidden: tuple[int, ...] = (64, 64)
    tau: float = 0.005
    noise_std: float = 0.1


@dataclass(frozen=True)
class DdpgPolicy:
    actor: Mlp
    noise_std: float

    def act(self, observation, explore: bool, rng: np.random.Generator, env_steps: int = 0) -> np.ndarray:
        a = self.actor.forward(observation)
        if explore:
            a = np.clip(a + self.noise_std * rng.standard_normal(a.shape), -1.0, 1.0)
        return a


def _apply(net: Mlp, grads, state: AdamState):
    try:
        params, state = adam_step(net.params(), grads, state, net.param_names())
    except FloatingPointError as exc:
        raise TrainingDiverged(str(exc)) from exc
    return net.with_params(params), state


class DdpgLearner:
    kind = "ddpg"
    discrete = False

    def __init__(self, obs_dim: int, action_dim: int, config: DdpgConfig, rng: np.random.Generator):
        self.config = config
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.actor = Mlp.init(mlp_layers(obs_dim, config.hidden, action_dim), rng, output_activation="tanh")
        self.critic = Mlp.init(mlp_layers(obs_dim + action_dim, config.hidden, 1), rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_adam = AdamState.zeros_like(self.actor.params(), learning_rate=config.lr)
        self.critic_adam = AdamState.zeros_like(self.critic.params(), learning_rate=config.lr)
        self.update_count = 0

    def policy(self) -> DdpgPolicy:
        return DdpgPolicy(self.actor, self.config.noise_std)

    def act(self, observation, explore: bool, rng: np.random.Generator, env_steps: int = 0) -> np.ndarray:
        return self.policy().act(observation, explore, rng, env_steps)

    def targets(self, batch: Batch) -> np.ndarray:
        not_done = 1.0 - batch.dones.astype(np.float64)
        if not not_done.any():
            return batch.rewards.copy()
        a_next = self.target_actor.forward(batch.next_states)
        q_next = self.target_critic.forward(np.hstack([batch.next_states, a_next]))[:, 0]
        return batch.rewards + self.config.gamma * not_done * q_next

    def critic_loss_and_grads(self, batch: Batch, y: np.ndarray, critic: Mlp | None = None):
        critic = critic or self.critic
        q, tape = critic.forward_train(np.hstack([batch.states, batch.actions]))
        err = q[:, 0] - y
        grads, _ = critic.backward(tape, (2.0 / len(batch)) * err[:, None])
        return float(np.mean(err * err)), grads

    def actor_loss_and_grads(self, batch: Batch, actor: Mlp | None = None):
        actor = actor or self.actor
        a, atape = actor.forward_train(batch.states)
        q, ctape = self.critic.forward_train(np.hstack([batch.states, a]))
        n = len(batch)
        _, dx = self.critic.backward(ctape, np.full((n, 1), -1.0 / n), need_input_grad=True)
        grads, _ = actor.backward(atape, dx[:, self.obs_dim:])
        return float(-q.mean()), grads

    def update(self, batch: Batch) -> dict[str, float]:
        y = self.targets(batch)
        critic_loss, grads = self.critic_loss_and_grads(batch, y)
        check_finite("DDPG critic loss", critic_loss)
        self.critic, self.critic_adam = _apply(self.critic, grads, self.critic_adam)

        actor_loss, grads = self.actor_loss_and_grads(batch)
        check_finite("DDPG actor loss", actor_loss)
        self.actor, self.actor_adam = _apply(self.actor, grads, self.actor_adam)

        tau = self.config.tau
        self.target_critic = self.target_critic.with_params(
            polyak(self.target_critic.params(), self.critic.params(), tau))
        self.target_actor = self.target_actor.with_params(
            polyak(self.target_actor.params(), self.actor.params(), tau))
        self.update_count += 1
        return {"critic_loss": critic_loss, "actor_loss": actor_loss}

    def networks(self) -> dict[str, Mlp]:
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
        }

    def checkpoint_extra(self) -> dict[str, object]:
        return {"update_count": self.update_count}


def ddpg_update(batch: Batch, learner: DdpgLearner) -> tuple[float, float]:
    out = learner.update(batch)
    return out["critic_loss"], out["actor_loss"]
