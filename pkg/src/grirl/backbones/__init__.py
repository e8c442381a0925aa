"""Off-policy update rules. None of them can see where a transition came from."""

from __future__ import annotations

import numpy as np

from grirl.backbones.common import TrainingDiverged, huber, polyak, read_manifest, write_checkpoint
from grirl.backbones.ddpg import DdpgConfig, DdpgLearner, DdpgPolicy, ddpg_update
from grirl.backbones.dqn import DqnConfig, DqnLearner, DqnPolicy, dqn_targets, dqn_update, epsilon_at
from grirl.backbones.sac import SacConfig, SacLearner, SacPolicy, sac_update
from grirl.envs.spaces import Box, Discrete

BACKBONES = ("dqn", "ddpg", "sac")
CONFIG_TYPES = {"dqn": DqnConfig, "ddpg": DdpgConfig, "sac": SacConfig}


def make_learner(kind: str, obs_dim: int, action_spec, config, rng: np.random.Generator):
    if kind == "dqn":
        if not isinstance(action_spec, Discrete):
            raise ValueError("dqn needs a discrete action space")
        return DqnLearner(obs_dim, action_spec.n, config, rng)
    if kind in ("ddpg", "sac"):
        if not isinstance(action_spec, Box):
            raise ValueError(f"{kind} needs a continuous action space")
        cls = DdpgLearner if kind == "ddpg" else SacLearner
        return cls(obs_dim, action_spec.dim, config, rng)
    raise ValueError(f"unknown backbone {kind!r}; expected one of {BACKBONES}")


def act(learner, observation, mode: str, rng: np.random.Generator, env_steps: int = 0):
    if mode not in ("explore", "exploit"):
        raise ValueError(f"mode must be 'explore' or 'exploit', got {mode!r}")
    return learner.act(observation, mode == "explore", rng, env_steps)


__all__ = [
    "BACKBONES",
    "CONFIG_TYPES",
    "DdpgConfig",
    "DdpgLearner",
    "DdpgPolicy",
    "DqnConfig",
    "DqnLearner",
    "DqnPolicy",
    "SacConfig",
    "SacLearner",
    "SacPolicy",
    "TrainingDiverged",
    "act",
    "ddpg_update",
    "dqn_targets",
    "dqn_update",
    "epsilon_at",
    "huber",
    "make_learner",
    "polyak",
    "read_manifest",
    "sac_update",
    "write_checkpoint",
]
