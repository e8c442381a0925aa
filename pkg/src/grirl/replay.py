"""Shared replay buffer.

Exploration and demonstration transitions are stored side by side and drawn by
the same uniform rule. The source tag lives in a separate array that only the
diagnostic methods read; :class:`Batch`, the type learners receive, has no
source field.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class Source(enum.IntEnum):
    EXPLORATION = 0
    DEMONSTRATION = 1


class BufferNotReady(RuntimeError):
    """Raised by :meth:`ReplayBuffer.sample` while size < min_buffer."""


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray | int
    reward: float
    next_state: np.ndarray
    done: bool
    source: Source = Source.EXPLORATION


@dataclass(frozen=True)
class Episode:
    """Column-wise storage of consecutive transitions from one source."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    source: Source = Source.EXPLORATION

    def __len__(self) -> int:
        return len(self.rewards)

    @classmethod
    def from_transitions(cls, transitions) -> Episode:
        transitions = list(transitions)
        if not transitions:
            raise ValueError("episode must contain at least one transition")
        sources = {t.source for t in transitions}
        if len(sources) != 1:
            raise ValueError("an episode comes from a single source")
        return cls(
            np.array([t.state for t in transitions], dtype=np.float64),
            np.array([t.action for t in transitions]),
            np.array([t.reward for t in transitions], dtype=np.float64),
            np.array([t.next_state for t in transitions], dtype=np.float64),
            np.array([t.done for t in transitions], dtype=bool),
            sources.pop(),
        )

    def transitions(self):
        for i in range(len(self)):
            a = self.actions[i]
            yield Transition(
                self.states[i],
                int(a) if np.ndim(a) == 0 else a,
                float(self.rewards[i]),
                self.next_states[i],
                bool(self.dones[i]),
                self.source,
            )

    def with_rewards(self, rewards) -> Episode:
        return Episode(self.states, self.actions, np.asarray(rewards, dtype=np.float64).reshape(-1),
                       self.next_states, self.dones, self.source)


@dataclass(frozen=True)
class Batch:
    """What a learner sees: no source information."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


class ReplayBuffer:
    """Bounded FIFO ring of transitions, safe for many writers and readers.

    ``action_dim`` is None for discrete (integer index) actions, otherwise the
    length of the continuous action vector.
    """

    def __init__(self, capacity: int, obs_dim: int, action_dim: int | None = None, min_buffer: int = 1):
        if capacity <= 0 or obs_dim <= 0:
            raise ValueError("capacity and obs_dim must be positive")
        if min_buffer < 1:
            raise ValueError("min_buffer must be >= 1")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.action_dim = action_dim
        self.min_buffer = int(min_buffer)
        self._states = np.zeros((capacity, obs_dim))
        self._next_states = np.zeros((capacity, obs_dim))
        if action_dim is None:
            self._actions = np.zeros(capacity, dtype=np.int64)
        else:
            self._actions = np.zeros((capacity, action_dim))
        self._rewards = np.zeros(capacity)
        self._dones = np.zeros(capacity, dtype=bool)
        self._sources = np.zeros(capacity, dtype=np.uint8)
        self._head = 0
        self._size = 0
        self.insertion_count = 0
        # diagnostics only: how many sampled rows came from demonstrations
        self.demo_draws = 0
        self.total_draws = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self._size

    @property
    def discrete(self) -> bool:
        return self.action_dim is None

    def _check(self, ep: Episode) -> None:
        n = len(ep)
        if ep.states.shape != (n, self.obs_dim) or ep.next_states.shape != (n, self.obs_dim):
            raise ValueError(
                f"observation dimension mismatch: buffer holds {self.obs_dim}, "
                f"episode states {ep.states.shape}, next_states {ep.next_states.shape}"
            )
        want = (n,) if self.discrete else (n, self.action_dim)
        if ep.actions.shape != want:
            raise ValueError(f"action shape {ep.actions.shape}, expected {want}")
        if ep.dones.shape != (n,):
            raise ValueError(f"dones shape {ep.dones.shape}, expected {(n,)}")

    def append_episode(self, episode) -> int:
        """Append a whole episode atomically; returns the new size."""
        ep = episode if isinstance(episode, Episode) else Episode.from_transitions(episode)
        self._check(ep)
        n = len(ep)
        if n > self.capacity:
            ep = Episode(ep.states[-self.capacity:], ep.actions[-self.capacity:], ep.rewards[-self.capacity:],
                         ep.next_states[-self.capacity:], ep.dones[-self.capacity:], ep.source)
            skipped, n = n - self.capacity, self.capacity
        else:
            skipped = 0
        with self._lock:
            idx = (self._head + np.arange(n)) % self.capacity
            self._states[idx] = ep.states
            self._next_states[idx] = ep.next_states
            self._actions[idx] = ep.actions
            self._rewards[idx] = ep.rewards
            self._dones[idx] = ep.dones
            self._sources[idx] = int(ep.source)
            self._head = (self._head + n) % self.capacity
            self._size = min(self._size + n, self.capacity)
            self.insertion_count += n + skipped
            return self._size

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform draws with replacement over the current contents."""
        with self._lock:
            size = self._size
            if size < self.min_buffer:
                raise BufferNotReady(f"buffer holds {size} transitions, learning starts at {self.min_buffer}")
            # slots [0, size) are exactly the live entries, full ring or not
            idx = rng.integers(0, size, size=batch_size)
            self.demo_draws += int(self._sources[idx].sum())
            self.total_draws += int(batch_size)
            return Batch(
                self._states[idx],
                self._actions[idx],
                self._rewards[idx],
                self._next_states[idx],
                self._dones[idx],
            )

    # diagnostics -----------------------------------------------------------
    def _order(self) -> np.ndarray:
        start = self._head if self._size == self.capacity else 0
        return (start + np.arange(self._size)) % self.capacity

    def demo_fraction(self) -> float:
        with self._lock:
            if self._size == 0:
                raise ValueError("demo_fraction of an empty buffer")
            return float(self._sources[: self._size].mean())

    def contents(self) -> tuple[Batch, np.ndarray]:
        """Snapshot of all entries oldest first, with their source tags."""
        with self._lock:
            order = self._order()
            batch = Batch(
                self._states[order],
                self._actions[order],
                self._rewards[order],
                self._next_states[order],
                self._dones[order],
            )
            return batch, self._sources[order].copy()

    def dump(self, path, env_id: str = "", action_spec=None) -> None:
        from grirl.demodata import buffer_dump_bytes

        batch, sources = self.contents()
        Path(path).write_bytes(buffer_dump_bytes(batch, sources, self, env_id, action_spec))


def load_buffer_dump(path):
    """Parse a buffer dump written by :meth:`ReplayBuffer.dump`."""
    from grirl.demodata import parse_buffer_dump

    return parse_buffer_dump(Path(path).read_bytes())

