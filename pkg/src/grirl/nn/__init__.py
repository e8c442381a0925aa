"""Dense-network numerics: MLPs, Adam, and the squashed Gaussian head."""

from grirl.nn.adam import AdamState, NonFiniteGradientError, adam_step
from grirl.nn.checkpoint import CheckpointFormatError, load_mlp, mlp_from_bytes, mlp_to_bytes, save_mlp
from grirl.nn.gaussian import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    GaussianSample,
    gaussian_backward,
    gaussian_sample_and_logprob,
)
from grirl.nn.kernels import BACKEND
from grirl.nn.mlp import Mlp, Tape

__all__ = [
    "AdamState",
    "BACKEND",
    "CheckpointFormatError",
    "GaussianSample",
    "LOG_STD_MAX",
    "LOG_STD_MIN",
    "Mlp",
    "NonFiniteGradientError",
    "Tape",
    "adam_step",
    "gaussian_backward",
    "gaussian_sample_and_logprob",
    "load_mlp",
    "mlp_from_bytes",
    "mlp_to_bytes",
    "save_mlp",
]
