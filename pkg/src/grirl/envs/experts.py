"""Scripted expert controllers that produce demonstration data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from grirl.envs.pendulum import Pendulum
from grirl.envs.trackdrive import LOOKAHEADS, _LOOKAHEAD_SCALE, TrackDrive2D


@dataclass(frozen=True)
class PendulumEnergyController:
    """Energy pumping toward the upright energy, then a PD balance law near the top."""

    max_torque: float = 2.0
    g: float = 10.0
    length: float = 1.0
    mass: float = 1.0
    k_angle: float = 10.0
    k_rate: float = 2.0
    k_energy: float = 2.0
    balance_cos: float = math.cos(0.5)

    kind = "PendulumEnergyController"
    env_id = Pendulum.env_id

    def energy(self, theta: float, omega: float) -> float:
        inertia = self.mass * self.length**2 / 3.0
        return 0.5 * inertia * omega**2 + 0.5 * self.mass * self.g * self.length * math.cos(theta)

    def continuous_action(self, observation) -> float:
        cos_t, sin_t, omega = (float(v) for v in observation)
        theta = math.atan2(sin_t, cos_t)
        if cos_t >= self.balance_cos:
            u = -(self.k_angle * theta + self.k_rate * omega)
        else:
            deficit = 0.5 * self.mass * self.g * self.length - self.energy(theta, omega)
            # dE/dt = u * omega, so push along omega while energy is short
            direction = 1.0 if omega >= 0.0 else -1.0
            u = self.k_energy * deficit * direction
        return min(max(u, -self.max_torque), self.max_torque)

    def act(self, observation) -> np.ndarray:
        return np.array([self.continuous_action(observation)])


@dataclass(frozen=True)
class PurePursuitDriver:
    """Pure-pursuit steering and bang-bang speed control, snapped to the action grid."""

    steer_values: tuple[float, ...]
    accel_table: tuple[float, ...]
    k_steer: float
    max_speed: float
    v_target: float = 5.0
    lookahead: float = 4.0
    speed_band: float = 0.5

    kind = "PurePursuitDriver"
    env_id = TrackDrive2D.env_id

    @classmethod
    def for_env(cls, env: TrackDrive2D, **kwargs) -> PurePursuitDriver:
        return cls(tuple(env.steer_values), env.accel_table, env.k_steer, env.max_speed, env.v_target, **kwargs)

    @property
    def n_throttle(self) -> int:
        return len(self.accel_table)

    def continuous_action(self, observation) -> tuple[float, float]:
        obs = np.asarray(observation, dtype=np.float64)
        k = LOOKAHEADS.index(self.lookahead)
        tx, ty = obs[4 + 2 * k] * _LOOKAHEAD_SCALE, obs[5 + 2 * k] * _LOOKAHEAD_SCALE
        dist_sq = tx * tx + ty * ty
        curvature = 2.0 * ty / dist_sq if dist_sq > 1e-9 else 0.0
        steer = min(max(curvature / self.k_steer, -1.0), 1.0)
        speed = obs[3] * self.max_speed
        if speed < self.v_target - self.speed_band:
            accel = max(self.accel_table)
        elif speed > self.v_target + self.speed_band:
            accel = min(self.accel_table)
        else:
            accel = 0.0
        return steer, accel

    def snap(self, steer: float, accel: float) -> int:
        # np.argmin returns the first minimum, so ties go to the lower index
        steer_idx = int(np.argmin(np.abs(np.asarray(self.steer_values) - steer)))
        throttle_idx = int(np.argmin(np.abs(np.asarray(self.accel_table) - accel)))
        return steer_idx * self.n_throttle + throttle_idx

    def act(self, observation) -> int:
        return self.snap(*self.continuous_action(observation))


ExpertPolicy = PendulumEnergyController | PurePursuitDriver


def expert_action(policy: ExpertPolicy, observation):
    return policy.act(observation)


def expert_for(env) -> ExpertPolicy:
    if isinstance(env, Pendulum):
        return PendulumEnergyController(max_torque=env.max_torque, g=env.g, length=env.length, mass=env.mass)
    if isinstance(env, TrackDrive2D):
        return PurePursuitDriver.for_env(env)
    raise TypeError(f"no scripted expert for {type(env).__name__}")
