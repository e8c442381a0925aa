from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Discrete:
    n: int

    def contains(self, action) -> bool:
        return isinstance(action, (int, np.integer)) and 0 <= int(action) < self.n

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n))


@dataclass(frozen=True)
class Box:
    """Continuous action space of dimension ``dim`` with per-component bounds."""

    low: tuple[float, ...]
    high: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.low) != len(self.high) or not self.low:
            raise ValueError("low/high must be non-empty and equally long")

    @property
    def dim(self) -> int:
        return len(self.low)

    def contains(self, action) -> bool:
        a = np.asarray(action, dtype=np.float64)
        return (
            a.shape == (self.dim,)
            and bool(np.isfinite(a).all())
            and bool(np.all(a >= np.asarray(self.low)))
            and bool(np.all(a <= np.asarray(self.high)))
        )

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(np.asarray(self.low), np.asarray(self.high))

    def to_unit(self, action) -> np.ndarray:
        """Map env-native actions onto [-1, 1]^d."""
        low, high = np.asarray(self.low), np.asarray(self.high)
        return 2.0 * (np.asarray(action, dtype=np.float64) - low) / (high - low) - 1.0

    def from_unit(self, action) -> np.ndarray:
        low, high = np.asarray(self.low), np.asarray(self.high)
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        return low + 0.5 * (a + 1.0) * (high - low)


ActionSpec = Discrete | Box
