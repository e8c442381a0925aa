"""Dense multilayer perceptrons with hand-derived backpropagation.

Weights are stored ``(out_features, in_features)`` so that row ``i`` holds
the incoming weights of output unit ``i``. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from grirl.nn import kernels

ACTIVATIONS = {"identity": 0, "relu": 1, "tanh": 2}


@dataclass(frozen=True)
class Tape:
    """Activations recorded by :meth:`Mlp.forward_train` for one batch."""

    layer_sizes: tuple[int, ...]
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    outputs: list[np.ndarray]
    squeeze: bool


@dataclass
class Mlp:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    _codes: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or any(s <= 0 for s in self.layer_sizes):
            raise ValueError(f"layer_sizes must hold >= 2 positive ints, got {self.layer_sizes}")
        if self.hidden_activation not in ("relu", "tanh"):
            raise ValueError(f"hidden activation must be relu or tanh, got {self.hidden_activation!r}")
        if self.output_activation not in ("identity", "tanh"):
            raise ValueError(f"output activation must be identity or tanh, got {self.output_activation!r}")
        n_layers = len(self.layer_sizes) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ValueError(f"expected {n_layers} weight/bias pairs")
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[layer + 1], self.layer_sizes[layer])
            if w.shape != shape or b.shape != (shape[0],):
                raise ValueError(
                    f"layer {layer}: weight {w.shape} / bias {b.shape}, expected {shape} / ({shape[0]},)"
                )
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]
        hidden = ACTIVATIONS[self.hidden_activation]
        self._codes = tuple([hidden] * (n_layers - 1) + [ACTIVATIONS[self.output_activation]])

    @classmethod
    def init(
        cls,
        layer_sizes,
        rng: np.random.Generator,
        hidden_activation: str = "relu",
        output_activation: str = "identity",
    ) -> Mlp:
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
        sizes = tuple(int(s) for s in layer_sizes)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases, hidden_activation, output_activation)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def _as_batch(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.layer_sizes[0]:
            got = x.shape[-1] if x.ndim else 0
            raise ValueError(f"input size mismatch: expected {self.layer_sizes[0]}, got {got}")
        return np.ascontiguousarray(x), squeeze

    def forward(self, x) -> np.ndarray:
        a, squeeze = self._as_batch(x)
        for w, b, act in zip(self.weights, self.biases, self._codes):
            _, a = kernels.dense_forward(a, w, b, act)
        return a[0] if squeeze else a

    __call__ = forward

    def forward_train(self, x) -> tuple[np.ndarray, Tape]:
        a, squeeze = self._as_batch(x)
        inputs, pres, outs = [], [], []
        for w, b, act in zip(self.weights, self.biases, self._codes):
            inputs.append(a)
            z, a = kernels.dense_forward(a, w, b, act)
            pres.append(z)
            outs.append(a)
        tape = Tape(self.layer_sizes, inputs, pres, outs, squeeze)
        return (a[0] if squeeze else a), tape

    def backward(self, tape: Tape | None, output_gradient, need_input_grad: bool = False):
        """Backpropagate ``output_gradient`` through the recorded pass.

        Returns ``(grads, input_grad)`` where ``grads`` follows the
        :meth:`params` ordering and ``input_grad`` is None unless requested.
        """
        if tape is None:
            raise RuntimeError("backward called without cached activations; use forward_train first")
        if tape.layer_sizes != self.layer_sizes:
            raise RuntimeError(f"tape recorded for layers {tape.layer_sizes}, net has {self.layer_sizes}")
        g = np.asarray(output_gradient, dtype=np.float64)
        if tape.squeeze and g.ndim == 1:
            g = g[None, :]
        if g.shape != tape.outputs[-1].shape:
            raise ValueError(f"output gradient shape {g.shape}, expected {tape.outputs[-1].shape}")
        g = np.ascontiguousarray(g)
        grads: list[np.ndarray] = [None] * (2 * self.n_layers)  # type: ignore[list-item]
        for layer in range(self.n_layers - 1, -1, -1):
            need_dx = layer > 0 or need_input_grad
            dw, db, dx = kernels.dense_backward(
                g,
                tape.inputs[layer],
                self.weights[layer],
                tape.pre[layer],
                tape.outputs[layer],
                self._codes[layer],
                need_dx,
            )
            grads[2 * layer] = dw
            grads[2 * layer + 1] = db
            g = dx
        if need_input_grad and tape.squeeze:
            g = g[0]
        return grads, (g if need_input_grad else None)

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def param_names(self) -> list[str]:
        names = []
        for layer in range(self.n_layers):
            names.extend((f"layer {layer} weights", f"layer {layer} biases"))
        return names

    def with_params(self, params: list[np.ndarray]) -> Mlp:
        return Mlp(
            self.layer_sizes,
            [params[2 * i] for i in range(self.n_layers)],
            [params[2 * i + 1] for i in range(self.n_layers)],
            self.hidden_activation,
            self.output_activation,
        )

    def copy(self) -> Mlp:
        return self.with_params([p.copy() for p in self.params()])

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())
