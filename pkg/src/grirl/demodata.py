"""Demonstration datasets: recording, GRID binary files, corruption, r_demo streams.

File layout, all little-endian::

    "GRID"  u32 version=1
    u16 len + UTF-8 env id
    u8 action tag: 0 -> u32 n | 1 -> u32 d, d float64 lows, d float64 highs
    u32 obs_dim  u32 episode_count
    per episode: u32 length, then `length` records of
        obs_dim f64 state | action (u32 index or d f64) | f64 reward |
        obs_dim f64 next state | u8 done

Buffer dumps (magic "GRIB") use the same header with a u32 transition count in
place of episodes and append a u8 source byte to each record.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from grirl.envs.spaces import Box, Discrete
from grirl.replay import Batch, Episode, Source

MAGIC = b"GRID"
DUMP_MAGIC = b"GRIB"
VERSION = 1


class DatasetFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ExpertMismatchError(ValueError):
    pass


class DemoStreamExhausted(RuntimeError):
    pass


@dataclass(eq=False)
class DemoDataset:
    env_id: str
    action_spec: Discrete | Box
    obs_dim: int
    episodes: list[Episode] = field(default_factory=list)

    def __post_init__(self) -> None:
        for k, ep in enumerate(self.episodes):
            if len(ep) == 0:
                raise ValueError(f"episode {k} is empty")
            if ep.dones[:-1].any():
                raise ValueError(f"episode {k} has done=True before its final transition")

    @property
    def n_transitions(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    @property
    def observed_max_step_reward(self) -> float:
        if not self.episodes:
            raise ValueError("dataset has no transitions")
        return float(max(ep.rewards.max() for ep in self.episodes))

    def episode_returns(self) -> np.ndarray:
        return np.array([ep.rewards.sum() for ep in self.episodes])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DemoDataset):
            return NotImplemented
        return dataset_to_bytes(self) == dataset_to_bytes(other)


# r_demo -------------------------------------------------------------------

@dataclass(frozen=True)
class Fixed:
    value: float


@dataclass(frozen=True)
class DatasetMax:
    pass


RdemoPolicy = Fixed | DatasetMax


def resolve_rdemo(policy: RdemoPolicy, dataset: DemoDataset | None = None) -> float:
    if isinstance(policy, Fixed):
        value = float(policy.value)
        if not math.isfinite(value):
            raise ValueError(f"fixed r_demo must be finite, got {policy.value!r}")
        return value
    if isinstance(policy, DatasetMax):
        if dataset is None or not dataset.episodes:
            raise ValueError("dataset_max r_demo needs a non-empty dataset")
        return dataset.observed_max_step_reward
    raise TypeError(f"unknown r_demo policy {policy!r}")


def parse_rdemo(text: str) -> RdemoPolicy:
    text = text.strip()
    if text == "dataset_max":
        return DatasetMax()
    if text.startswith("fixed:"):
        return Fixed(float(text[len("fixed:"):]))
    if text.startswith("fixed(") and text.endswith(")"):
        return Fixed(float(text[len("fixed("):-1]))
    raise ValueError(f"r_demo must be 'dataset_max' or 'fixed:<value>', got {text!r}")


def format_rdemo(policy: RdemoPolicy) -> str:
    return "dataset_max" if isinstance(policy, DatasetMax) else f"fixed:{float(policy.value)!r}"


# recording ----------------------------------------------------------------

def record(env, expert, n_transitions: int, seed: int) -> DemoDataset:
    """Run whole expert episodes until at least ``n_transitions`` are stored."""
    if n_transitions <= 0:
        raise ValueError("n_transitions must be positive")
    if getattr(expert, "env_id", None) != env.env_id:
        raise ExpertMismatchError(f"{type(expert).__name__} drives {expert.env_id!r}, env is {env.env_id!r}")
    rng = np.random.default_rng(seed)
    episodes: list[Episode] = []
    total = 0
    while total < n_transitions:
        obs = env.reset(int(rng.integers(2**31)))
        states, actions, rewards, nexts, dones = [], [], [], [], []
        done = False
        while not done:
            action = expert.act(obs)
            nxt, reward, done = env.step(action)
            states.append(obs)
            actions.append(action)
            rewards.append(reward)
            nexts.append(nxt)
            dones.append(done)
            obs = nxt
        episodes.append(
            Episode(
                np.array(states),
                np.array(actions, dtype=np.int64 if isinstance(env.action_spec, Discrete) else np.float64),
                np.array(rewards, dtype=np.float64),
                np.array(nexts),
                np.array(dones, dtype=bool),
                Source.DEMONSTRATION,
            )
        )
        total += len(states)
    return DemoDataset(env.env_id, env.action_spec, env.obs_dim, episodes)


def corrupt(dataset: DemoDataset, fraction: float, seed: int) -> DemoDataset:
    """Replace the actions of floor(fraction * N) uniformly chosen transitions.

    Discrete replacements are drawn from the other n - 1 actions so that every
    chosen transition really changes; continuous ones uniformly in the bounds.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    n = dataset.n_transitions
    k = min(n, int(math.floor(fraction * n + 1e-9)))
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=k, replace=False)) if k else np.zeros(0, dtype=np.int64)
    spec = dataset.action_spec
    flat = np.concatenate([ep.actions for ep in dataset.episodes]) if dataset.episodes else None
    if k:
        flat = flat.copy()
        if isinstance(spec, Discrete):
            if spec.n < 2:
                raise ValueError("cannot corrupt a single-action space")
            offset = rng.integers(1, spec.n, size=k)
            flat[chosen] = (flat[chosen] + offset) % spec.n
        else:
            flat[chosen] = rng.uniform(np.asarray(spec.low), np.asarray(spec.high), size=(k, spec.dim))
    out, start = [], 0
    for ep in dataset.episodes:
        stop = start + len(ep)
        actions = flat[start:stop] if k else ep.actions
        out.append(Episode(ep.states, actions, ep.rewards, ep.next_states, ep.dones, ep.source))
        start = stop
    return DemoDataset(dataset.env_id, spec, dataset.obs_dim, out)


class DemoStream:
    """Endless supply of demonstration episodes with rewards replaced by r_demo.

    Each cycle visits every episode once in a freshly shuffled order;
    transitions inside an episode keep their recorded order.
    """

    def __init__(self, dataset: DemoDataset, policy: RdemoPolicy, seed: int = 0,
                 cycle: bool = True, action_transform=None):
        self.dataset = dataset
        self.r_demo = resolve_rdemo(policy, dataset)
        self.cycle = cycle
        self.action_transform = action_transform
        self._rng = np.random.default_rng(seed)
        self._order: list[int] = []
        self.cycles_started = 0
        self.episodes_emitted = 0
        if not dataset.episodes:
            raise ValueError("cannot stream an empty dataset")

    def next_episode(self) -> Episode:
        if not self._order:
            if self.cycles_started and not self.cycle:
                raise DemoStreamExhausted("non-cycling demonstration stream is exhausted")
            self._order = list(self._rng.permutation(len(self.dataset.episodes)))
            self.cycles_started += 1
        ep = self.dataset.episodes[self._order.pop(0)]
        actions = ep.actions if self.action_transform is None else self.action_transform(ep.actions)
        self.episodes_emitted += 1
        return Episode(
            ep.states,
            actions,
            np.full(len(ep), self.r_demo),
            ep.next_states,
            ep.dones,
            Source.DEMONSTRATION,
        )

    def __iter__(self):
        while True:
            try:
                ep = self.next_episode()
            except DemoStreamExhausted:
                return
            yield from ep.transitions()


def as_demo_transitions(dataset: DemoDataset, policy: RdemoPolicy, seed: int = 0, cycle: bool = True):
    return iter(DemoStream(dataset, policy, seed, cycle))


# binary format --------------------------------------------------------------

def _record_dtype(obs_dim: int, spec, with_source: bool = False) -> np.dtype:
    if isinstance(spec, Discrete):
        action = ("action", "<u4")
    else:
        action = ("action", "<f8", (spec.dim,))
    fields = [("state", "<f8", (obs_dim,)), action, ("reward", "<f8"), ("next_state", "<f8", (obs_dim,)),
              ("done", "u1")]
    if with_source:
        fields.append(("source", "u1"))
    return np.dtype(fields)


def _header(magic: bytes, env_id: str, spec, obs_dim: int, count: int) -> bytes:
    name = env_id.encode("utf-8")
    parts = [magic, struct.pack("<IH", VERSION, len(name)), name]
    if isinstance(spec, Discrete):
        parts.append(struct.pack("<BI", 0, spec.n))
    else:
        parts.append(struct.pack("<BI", 1, spec.dim))
        parts.append(np.asarray(spec.low, dtype="<f8").tobytes())
        parts.append(np.asarray(spec.high, dtype="<f8").tobytes())
    parts.append(struct.pack("<II", obs_dim, count))
    return b"".join(parts)


def _pack(dtype, states, actions, rewards, next_states, dones, sources=None) -> bytes:
    rec = np.zeros(len(rewards), dtype=dtype)
    rec["state"] = states
    rec["action"] = actions
    rec["reward"] = rewards
    rec["next_state"] = next_states
    rec["done"] = dones
    if sources is not None:
        rec["source"] = sources
    return rec.tobytes()


def dataset_to_bytes(dataset: DemoDataset) -> bytes:
    dtype = _record_dtype(dataset.obs_dim, dataset.action_spec)
    parts = [_header(MAGIC, dataset.env_id, dataset.action_spec, dataset.obs_dim, len(dataset.episodes))]
    for ep in dataset.episodes:
        parts.append(struct.pack("<I", len(ep)))
        parts.append(_pack(dtype, ep.states, ep.actions, ep.rewards, ep.next_states, ep.dones))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.data):
            raise DatasetFormatError(f"truncated {what}: need {n} bytes, {len(self.data) - self.off} left", self.off)
        chunk = self.data[self.off:self.off + n]
        self.off += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _read_header(r: _Reader, magic: bytes):
    got = r.take(4, "magic")
    if got != magic:
        raise DatasetFormatError(f"bad magic {got!r}, expected {magic!r}", 0)
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}", 4)
    (name_len,) = r.unpack("<H", "env id length")
    at = r.off
    try:
        env_id = r.take(name_len, "env id").decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DatasetFormatError("env id is not valid UTF-8", at) from exc
    at = r.off
    (tag,) = r.unpack("<B", "action tag")
    if tag == 0:
        (n,) = r.unpack("<I", "action count")
        spec = Discrete(n)
    elif tag == 1:
        (d,) = r.unpack("<I", "action dimension")
        if d == 0:
            raise DatasetFormatError("continuous action dimension 0", at + 1)
        bounds = np.frombuffer(r.take(16 * d, "action bounds"), dtype="<f8")
        spec = Box(tuple(float(v) for v in bounds[:d]), tuple(float(v) for v in bounds[d:]))
    else:
        raise DatasetFormatError(f"unknown action tag {tag}", at)
    obs_dim, count = r.unpack("<II", "obs_dim/count")
    if obs_dim == 0:
        raise DatasetFormatError("obs_dim is 0", r.off - 8)
    return env_id, spec, obs_dim, count


def dataset_from_bytes(data: bytes) -> DemoDataset:
    r = _Reader(data)
    env_id, spec, obs_dim, n_episodes = _read_header(r, MAGIC)
    dtype = _record_dtype(obs_dim, spec)
    episodes = []
    for k in range(n_episodes):
        at = r.off
        (length,) = r.unpack("<I", f"length of episode {k}")
        if length == 0:
            raise DatasetFormatError(f"episode {k} has length 0", at)
        body_at = r.off
        rec = np.frombuffer(r.take(length * dtype.itemsize, f"episode {k} records"), dtype=dtype)
        dones = rec["done"]
        if np.any(dones > 1):
            raise DatasetFormatError(f"episode {k}: done byte not 0/1", body_at)
        if isinstance(spec, Discrete) and np.any(rec["action"] >= spec.n):
            raise DatasetFormatError(f"episode {k}: action index out of range", body_at)
        actions = rec["action"].astype(np.int64) if isinstance(spec, Discrete) else rec["action"].astype(np.float64)
        try:
            episodes.append(
                Episode(
                    rec["state"].astype(np.float64),
                    actions,
                    rec["reward"].astype(np.float64),
                    rec["next_state"].astype(np.float64),
                    dones.astype(bool),
                    Source.DEMONSTRATION,
                )
            )
        except ValueError as exc:  # pragma: no cover
            raise DatasetFormatError(str(exc), body_at) from exc
    if r.off != len(data):
        raise DatasetFormatError(f"{len(data) - r.off} trailing bytes after last episode", r.off)
    try:
        return DemoDataset(env_id, spec, obs_dim, episodes)
    except ValueError as exc:
        raise DatasetFormatError(str(exc), 0) from exc


def save(dataset: DemoDataset, path) -> None:
    Path(path).write_bytes(dataset_to_bytes(dataset))


def load(path) -> DemoDataset:
    return dataset_from_bytes(Path(path).read_bytes())


def count_records(data: bytes) -> tuple[int, int]:
    """Independent recount: walk the episode length fields to the end of the file.

    Returns ``(sum of declared lengths, records actually present)``.
    """
    r = _Reader(data)
    _, spec, obs_dim, n_episodes = _read_header(r, MAGIC)
    rec_size = 8 * obs_dim * 2 + 8 + 1 + (4 if isinstance(spec, Discrete) else 8 * spec.dim)
    declared = present = 0
    for _ in range(n_episodes):
        (length,) = r.unpack("<I", "episode length")
        declared += length
        avail = (len(data) - r.off) // rec_size
        present += min(length, avail)
        r.off += length * rec_size
    return declared, present


def buffer_dump_bytes(batch: Batch, sources, buffer, env_id: str = "", action_spec=None) -> bytes:
    if action_spec is None:
        action_spec = Discrete(0) if buffer.discrete else Box((-1.0,) * buffer.action_dim, (1.0,) * buffer.action_dim)
    dtype = _record_dtype(buffer.obs_dim, action_spec, with_source=True)
    head = _header(DUMP_MAGIC, env_id, action_spec, buffer.obs_dim, len(batch))
    body = _pack(dtype, batch.states, batch.actions, batch.rewards, batch.next_states, batch.dones, sources)
    return head + body


def parse_buffer_dump(data: bytes):
    """Returns ``(batch, sources, env_id, action_spec)``."""
    r = _Reader(data)
    env_id, spec, obs_dim, count = _read_header(r, DUMP_MAGIC)
    dtype = _record_dtype(obs_dim, spec, with_source=True)
    rec = np.frombuffer(r.take(count * dtype.itemsize, "buffer records"), dtype=dtype)
    if r.off != len(data):
        raise DatasetFormatError(f"{len(data) - r.off} trailing bytes", r.off)
    actions = rec["action"].astype(np.int64) if isinstance(spec, Discrete) else rec["action"].astype(np.float64)
    batch = Batch(
        rec["state"].astype(np.float64),
        actions,
        rec["reward"].astype(np.float64),
        rec["next_state"].astype(np.float64),
        rec["done"].astype(bool),
    )
    return batch, rec["source"].copy(), env_id, spec
