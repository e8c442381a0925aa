from __future__ import annotations

from pathlib import Path

import numpy as np

from grirl.nn import Mlp, save_mlp


class TrainingDiverged(FloatingPointError):
    """A loss or parameter went non-finite; the run must stop."""


def check_finite(what: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise TrainingDiverged(f"non-finite {what}: {value!r}" if np.ndim(value) == 0 else f"non-finite {what}")


def polyak(target_params, online_params, tau: float) -> list[np.ndarray]:
    """theta_t <- tau * theta + (1 - tau) * theta_t; tau = 1 copies the online net."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if tau == 1.0:
        return [p.copy() for p in online_params]
    return [tau * p + (1.0 - tau) * t for t, p in zip(target_params, online_params)]


def huber(x: np.ndarray, delta: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise Huber loss and its derivative."""
    ax = np.abs(x)
    quad = ax <= delta
    loss = np.where(quad, 0.5 * x * x, delta * (ax - 0.5 * delta))
    grad = np.where(quad, x, delta * np.sign(x))
    return loss, grad


def write_checkpoint(directory, networks: dict[str, Mlp], extra: dict[str, object]) -> None:
    """One GRNN file per network plus ``manifest.txt`` (name, sizes, activations, counters)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for name, net in networks.items():
        save_mlp(net, directory / f"{name}.grnn")
        sizes = ",".join(str(s) for s in net.layer_sizes)
        lines.append(f"network {name} {name}.grnn sizes={sizes} hidden={net.hidden_activation} "
                     f"output={net.output_activation}")
    for key, value in extra.items():
        lines.append(f"{key} {value!r}" if isinstance(value, float) else f"{key} {value}")
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")


def read_manifest(directory) -> tuple[dict[str, dict[str, str]], dict[str, str]]:
    networks, extra = {}, {}
    for line in (Path(directory) / "manifest.txt").read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "network":
            fields = dict(p.split("=", 1) for p in parts[3:])
            fields["file"] = parts[2]
            networks[parts[1]] = fields
        else:
            extra[parts[0]] = " ".join(parts[1:])
    return networks, extra


def mlp_layers(n_in: int, hidden, n_out: int) -> tuple[int, ...]:
    return (int(n_in), *[int(h) for h in hidden], int(n_out))
