"""GRNN parameter files.

Layout (little-endian): magic ``GRNN``, u32 version, u32 layer count, one u32
per layer size, then float64 values layer by layer, weights row-major followed
by biases. Activations are not part of the file; callers record them
elsewhere (the learner manifest does).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from grirl.nn.mlp import Mlp

MAGIC = b"GRNN"
VERSION = 1
_F64 = np.dtype("<f8")


class CheckpointFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def mlp_to_bytes(net: Mlp) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(net.layer_sizes))]
    parts.append(struct.pack(f"<{len(net.layer_sizes)}I", *net.layer_sizes))
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype=_F64).tobytes())
        parts.append(np.ascontiguousarray(b, dtype=_F64).tobytes())
    return b"".join(parts)


def mlp_from_bytes(data: bytes, hidden_activation: str = "relu", output_activation: str = "identity") -> Mlp:
    if len(data) < 4:
        raise CheckpointFormatError("file too short for magic", len(data))
    if data[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", 0)
    if len(data) < 12:
        raise CheckpointFormatError("truncated header", len(data))
    version, n_sizes = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported version {version}", 4)
    if n_sizes < 2:
        raise CheckpointFormatError(f"layer count {n_sizes} < 2", 8)
    off = 12
    if len(data) < off + 4 * n_sizes:
        raise CheckpointFormatError("truncated layer sizes", len(data))
    sizes = struct.unpack_from(f"<{n_sizes}I", data, off)
    off += 4 * n_sizes
    if any(s == 0 for s in sizes):
        raise CheckpointFormatError(f"zero layer size in {sizes}", 12)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        n_w = fan_in * fan_out
        need = 8 * (n_w + fan_out)
        if len(data) < off + need:
            raise CheckpointFormatError("truncated parameter block", len(data))
        weights.append(np.frombuffer(data, _F64, n_w, off).reshape(fan_out, fan_in).astype(np.float64))
        off += 8 * n_w
        biases.append(np.frombuffer(data, _F64, fan_out, off).astype(np.float64))
        off += 8 * fan_out
    if off != len(data):
        raise CheckpointFormatError(f"{len(data) - off} trailing bytes", off)
    return Mlp(sizes, weights, biases, hidden_activation, output_activation)


def save_mlp(net: Mlp, path) -> None:
    Path(path).write_bytes(mlp_to_bytes(net))


def load_mlp(path, hidden_activation: str = "relu", output_activation: str = "identity") -> Mlp:
    return mlp_from_bytes(Path(path).read_bytes(), hidden_activation, output_activation)
