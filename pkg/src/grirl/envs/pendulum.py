"""Torque-limited inverted pendulum with theta = 0 upright."""

from __future__ import annotations

import math

import numpy as np

from grirl.envs.spaces import Box


class EpisodeOverError(RuntimeError):
    pass


def wrap_angle(theta: float) -> float:
    """Wrap to [-pi, pi)."""
    return ((theta + math.pi) % (2.0 * math.pi)) - math.pi


class Pendulum:
    env_id = "pendulum-v0"
    obs_dim = 3

    def __init__(
        self,
        g: float = 10.0,
        length: float = 1.0,
        mass: float = 1.0,
        dt: float = 0.05,
        max_torque: float = 2.0,
        max_speed: float = 8.0,
        horizon: int = 200,
    ):
        self.g = g
        self.length = length
        self.mass = mass
        self.dt = dt
        self.max_torque = max_torque
        self.max_speed = max_speed
        self.horizon = horizon
        self.action_spec = Box((-max_torque,), (max_torque,))
        self.theta = 0.0
        self.omega = 0.0
        self.t = 0
        self.done = True
        self.step_calls = 0

    def set_state(self, theta: float, omega: float) -> np.ndarray:
        self.theta = wrap_angle(float(theta))
        self.omega = float(omega)
        self.t = 0
        self.done = False
        return self.observation()

    def reset(self, seed: int | None = None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-math.pi, math.pi)
        omega = rng.uniform(-1.0, 1.0)
        return self.set_state(theta, omega)

    def observation(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta), self.omega])

    def energy(self) -> float:
        """Mechanical energy of a uniform rod about its pivot (upright rest = m g l / 2)."""
        inertia = self.mass * self.length**2 / 3.0
        return 0.5 * inertia * self.omega**2 + self.mass * self.g * 0.5 * self.length * math.cos(self.theta)

    def step(self, action):
        if self.done:
            raise EpisodeOverError("step() called on a finished episode; call reset()")
        u = np.asarray(action, dtype=np.float64).reshape(-1)
        if u.shape != (1,) or not math.isfinite(u[0]) or abs(u[0]) > self.max_torque:
            raise ValueError(f"torque must be a single finite value in [-{self.max_torque}, {self.max_torque}], got {action!r}")
        u = float(u[0])
        th, om = self.theta, self.omega
        reward = -(wrap_angle(th) ** 2 + 0.1 * om**2 + 0.001 * u**2)

        acc = 3.0 * self.g / (2.0 * self.length) * math.sin(th) + 3.0 * u / (self.mass * self.length**2)
        om = min(max(om + acc * self.dt, -self.max_speed), self.max_speed)
        self.theta = wrap_angle(th + om * self.dt)
        self.omega = om
        self.t += 1
        self.step_calls += 1
        self.done = self.t >= self.horizon
        return self.observation(), reward, self.done
