"""DQN with a hard-synced target network and Huber loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from grirl.backbones.common import TrainingDiverged, check_finite, huber, mlp_layers
from grirl.nn import AdamState, Mlp, adam_step
from grirl.replay import Batch


@dataclass(frozen=True)
class DqnConfig:
    gamma: float = 0.99
    lr: float = 3e-4
    batch_size: int = 256
    hidden: tuple[int, ...] = (64, 64)
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 50_000
    target_sync: int = 1000
    huber_delta: float = 1.0


def epsilon_at(config: DqnConfig, env_steps: int) -> float:
    if config.eps_decay_steps <= 0:
        return config.eps_end
    frac = min(max(env_steps, 0) / config.eps_decay_steps, 1.0)
    return config.eps_start + frac * (config.eps_end - config.eps_start)


@dataclass(frozen=True)
class DqnPolicy:
    """Frozen Q-network snapshot used by actors."""

    q_net: Mlp
    config: DqnConfig

    @property
    def n_actions(self) -> int:
        return self.q_net.layer_sizes[-1]

    def act(self, observation, explore: bool, rng: np.random.Generator, env_steps: int = 0) -> int:
        if explore and rng.random() < epsilon_at(self.config, env_steps):
            return int(rng.integers(self.n_actions))
        # argmax returns the first maximum: ties go to the lowest index
        return int(np.argmax(self.q_net.forward(observation)))


class DqnLearner:
    kind = "dqn"
    discrete = True

    def __init__(self, obs_dim: int, n_actions: int, config: DqnConfig, rng: np.random.Generator):
        self.config = config
        self.q_net = Mlp.init(mlp_layers(obs_dim, config.hidden, n_actions), rng)
        self.target_q_net = self.q_net.copy()
        self.adam = AdamState.zeros_like(self.q_net.params(), learning_rate=config.lr)
        self.update_count = 0

    def policy(self) -> DqnPolicy:
        return DqnPolicy(self.q_net, self.config)

    def act(self, observation, explore: bool, rng: np.random.Generator, env_steps: int = 0) -> int:
        return self.policy().act(observation, explore, rng, env_steps)

    def targets(self, batch: Batch) -> np.ndarray:
        q_next = self.target_q_net.forward(batch.next_states)
        not_done = 1.0 - batch.dones.astype(np.float64)
        return batch.rewards + self.config.gamma * not_done * q_next.max(axis=1)

    def loss_and_grads(self, batch: Batch, y: np.ndarray):
        q_all, tape = self.q_net.forward_train(batch.states)
        rows = np.arange(len(batch))
        actions = batch.actions.astype(np.int64)
        td = q_all[rows, actions] - y
        loss_el, dl = huber(td, self.config.huber_delta)
        loss = float(loss_el.mean())
        d_q = np.zeros_like(q_all)
        d_q[rows, actions] = dl / len(batch)
        grads, _ = self.q_net.backward(tape, d_q)
        return loss, grads

    def update(self, batch: Batch) -> dict[str, float]:
        y = self.targets(batch)
        loss, grads = self.loss_and_grads(batch, y)
        check_finite("DQN loss", loss)
        try:
            params, self.adam = adam_step(self.q_net.params(), grads, self.adam, self.q_net.param_names())
        except FloatingPointError as exc:
            raise TrainingDiverged(str(exc)) from exc
        self.q_net = self.q_net.with_params(params)
        self.update_count += 1
        if self.update_count % self.config.target_sync == 0:
            self.target_q_net = self.q_net.copy()
        return {"critic_loss": loss}

    def networks(self) -> dict[str, Mlp]:
        return {"q_net": self.q_net, "target_q_net": self.target_q_net}

    def checkpoint_extra(self) -> dict[str, object]:
        return {"update_count": self.update_count}


def dqn_targets(batch: Batch, learner: DqnLearner) -> np.ndarray:
    return learner.targets(batch)


def dqn_update(batch: Batch, learner: DqnLearner) -> float:
    return learner.update(batch)["critic_loss"]
