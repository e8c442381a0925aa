"""Pure numpy dense-layer kernels; same contract as the compiled module."""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, act: int):
    if w.shape[1] != x.shape[1] or b.shape[0] != w.shape[0]:
        raise ValueError(f"dense_forward: weight {w.shape[0]}x{w.shape[1]} vs input width {x.shape[1]}")
    pre = x @ w.T + b
    if act == 0:
        return pre, pre
    if act == 1:
        return pre, np.maximum(pre, 0.0)
    return pre, np.tanh(pre)


def dense_backward(dout, x, w, pre, out, act: int, need_dx: bool):
    if dout.shape != (x.shape[0], w.shape[0]):
        raise ValueError(
            f"dense_backward: gradient {dout.shape[0]}x{dout.shape[1]}, expected {x.shape[0]}x{w.shape[0]}"
        )
    if act == 0:
        dz = dout
    elif act == 1:
        dz = np.where(pre > 0.0, dout, 0.0)
    else:
        dz = dout * (1.0 - out * out)
    dw = dz.T @ x
    db = dz.sum(axis=0)
    dx = dz @ w if need_dx else None
    return dw, db, dx
