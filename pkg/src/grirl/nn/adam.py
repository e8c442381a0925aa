"""Adam with bias-corrected moment estimates, applied functionally."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass(frozen=True)
class AdamState:
    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step_count: int = 0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params, learning_rate: float = 3e-4, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
        return cls(
            tuple(np.zeros_like(p, dtype=np.float64) for p in params),
            tuple(np.zeros_like(p, dtype=np.float64) for p in params),
            0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        )


def adam_step(params, grads, state: AdamState, names=None):
    """Return ``(new_params, new_state)``; inputs are left untouched."""
    if not (len(params) == len(grads) == len(state.first_moment) == len(state.second_moment)):
        raise ValueError("params, grads and Adam moments must have the same length")
    for i, (p, g, m) in enumerate(zip(params, grads, state.first_moment)):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(m):
            raise ValueError(f"parameter {i}: shape {np.shape(p)} vs grad {np.shape(g)} vs moment {np.shape(m)}")
        if not np.isfinite(g).all():
            label = names[i] if names is not None else f"parameter {i}"
            raise NonFiniteGradientError(f"non-finite gradient in {label}")

    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        new_params.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(tuple(new_m), tuple(new_v), t, state.learning_rate, b1, b2, state.epsilon)
    return new_params, new_state
