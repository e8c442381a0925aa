"""Tanh-squashed diagonal Gaussian policy head used by SAC."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianSample:
    action: np.ndarray
    log_prob: np.ndarray
    pre_squash: np.ndarray
    std: np.ndarray
    noise: np.ndarray
    in_clamp: np.ndarray


def log1m_tanh_sq(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2) without cancellation for large |u|."""
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def gaussian_sample_and_logprob(mean, log_std, noise) -> GaussianSample:
    """Reparameterised sample ``tanh(mean + std * noise)`` and its log-density.

    Accepts ``(d,)`` or ``(batch, d)`` arrays; ``log_prob`` sums over the last axis.
    """
    mean = np.asarray(mean, dtype=np.float64)
    raw = np.asarray(log_std, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != mean.shape or raw.shape != mean.shape:
        raise ValueError(f"noise {noise.shape} / log_std {raw.shape} must match mean {mean.shape}")
    ls = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(ls)
    u = mean + std * noise
    action = np.tanh(u)
    gauss = -0.5 * noise * noise - ls - _HALF_LOG_2PI
    log_prob = np.sum(gauss - log1m_tanh_sq(u), axis=-1)
    in_clamp = (raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)
    return GaussianSample(action, log_prob, u, std, noise, in_clamp)


def gaussian_backward(sample: GaussianSample, d_action, d_log_prob):
    """Gradients of a scalar loss w.r.t. ``mean`` and the unclamped ``log_std``.

    ``d_action`` has the action's shape; ``d_log_prob`` the shape of ``log_prob``.
    The noise is held fixed (reparameterisation).
    """
    d_action = np.asarray(d_action, dtype=np.float64)
    d_lp = np.asarray(d_log_prob, dtype=np.float64)[..., None]
    a = sample.action
    # d/du of -log(1 - tanh(u)^2) is 2 tanh(u)
    d_u = d_action * (1.0 - a * a) + d_lp * 2.0 * a
    d_mean = d_u
    d_log_std = (d_u * sample.std * sample.noise - d_lp) * sample.in_clamp
    return d_mean, d_log_std
