"""Kinematic-bicycle car on a closed polyline track with a discrete action grid.

The default track (``tracks/default.txt``) is a 60 m x 40 m rectangle whose
corners are cut by 10 m chamfers, giving 8 segments driven counter-clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from grirl.envs.pendulum import EpisodeOverError, wrap_angle
from grirl.envs.spaces import Discrete

LOOKAHEADS = (4.0, 8.0, 12.0)
_LOOKAHEAD_SCALE = 12.0


class TrackFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Track:
    waypoints: np.ndarray  # (N, 2), closed implicitly
    half_width: float = 2.0

    def __post_init__(self) -> None:
        wp = np.asarray(self.waypoints, dtype=np.float64)
        if wp.ndim != 2 or wp.shape[1] != 2 or len(wp) < 3:
            raise TrackFormatError("track needs at least 3 (x, y) waypoints")
        if not self.half_width > 0:
            raise TrackFormatError(f"half width must be positive, got {self.half_width}")
        seg = np.roll(wp, -1, axis=0) - wp
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lengths <= 0):
            raise TrackFormatError("consecutive waypoints must differ")
        object.__setattr__(self, "waypoints", wp)
        object.__setattr__(self, "_seg", seg)
        object.__setattr__(self, "_len", lengths)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(lengths)]))
        object.__setattr__(self, "_angle", np.arctan2(seg[:, 1], seg[:, 0]))

    @property
    def n_segments(self) -> int:
        return len(self.waypoints)

    @property
    def perimeter(self) -> float:
        return float(self._cum[-1])

    def segment_heading(self, i: int) -> float:
        return float(self._angle[i])

    def project(self, x: float, y: float):
        """Nearest point on the polyline: (segment, arc length, signed lateral offset, track heading).

        Lateral offset is positive to the left of the driving direction.
        """
        rel = np.array([x, y]) - self.waypoints
        t = np.clip((rel * self._seg).sum(axis=1) / (self._len**2), 0.0, 1.0)
        closest = self.waypoints + t[:, None] * self._seg
        d2 = ((np.array([x, y]) - closest) ** 2).sum(axis=1)
        # at a shared vertex prefer the segment that starts there
        i = int(np.argmin(d2 + 1e-12 * t))
        dist = math.sqrt(d2[i])
        cross = self._seg[i, 0] * rel[i, 1] - self._seg[i, 1] * rel[i, 0]
        lateral = dist if cross >= 0 else -dist
        s = self._cum[i] + t[i] * self._len[i]
        return i, float(s), lateral, float(self._angle[i])

    def point_at(self, s: float) -> np.ndarray:
        s = s % self.perimeter
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, self.n_segments - 1)
        frac = (s - self._cum[i]) / self._len[i]
        return self.waypoints[i] + frac * self._seg[i]

    @classmethod
    def load(cls, path) -> Track:
        return cls.parse(Path(path).read_text(), str(path))

    @classmethod
    def parse(cls, text: str, name: str = "<track>") -> Track:
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [(n, ln) for n, ln in enumerate(lines, 1) if ln and not ln.startswith("#")]
        if not lines:
            raise TrackFormatError(f"{name}: empty track file")
        n, head = lines[0]
        parts = head.split()
        if len(parts) != 2 or parts[0] != "halfwidth":
            raise TrackFormatError(f"{name}:{n}: expected 'halfwidth <meters>' header")
        try:
            half_width = float(parts[1])
        except ValueError as exc:
            raise TrackFormatError(f"{name}:{n}: bad half width {parts[1]!r}") from exc
        points = []
        for n, ln in lines[1:]:
            xy = ln.split()
            if len(xy) != 2:
                raise TrackFormatError(f"{name}:{n}: expected 'x y', got {ln!r}")
            try:
                points.append((float(xy[0]), float(xy[1])))
            except ValueError as exc:
                raise TrackFormatError(f"{name}:{n}: non-numeric waypoint {ln!r}") from exc
        return cls(np.array(points), half_width)

    def dumps(self) -> str:
        rows = [f"halfwidth {float(self.half_width)!r}"]
        rows += [f"{float(x)!r} {float(y)!r}" for x, y in self.waypoints]
        return "\n".join(rows) + "\n"


def default_track() -> Track:
    text = resources.files("grirl.envs").joinpath("tracks/default.txt").read_text()
    return Track.parse(text, "default.txt")


class TrackDrive2D:
    env_id = "trackdrive-v0"
    obs_dim = 4 + 2 * len(LOOKAHEADS)

    def __init__(
        self,
        track: Track | None = None,
        n_steer: int = 27,
        accel_table: tuple[float, ...] = (-6.0, 0.0, 2.0, 4.0),
        dt: float = 0.1,
        horizon: int = 1000,
        wheelbase: float = 2.5,
        max_steer_angle: float = 1.0,
        max_speed: float = 10.0,
        v_target: float = 5.0,
    ):
        if n_steer < 2 or len(accel_table) < 1:
            raise ValueError("need at least 2 steering values and 1 throttle value")
        self.track = track if track is not None else default_track()
        self.n_steer = n_steer
        self.accel_table = tuple(float(a) for a in accel_table)
        self.n_throttle = len(self.accel_table)
        self.steer_values = np.linspace(-1.0, 1.0, n_steer)
        self.dt = dt
        self.horizon = horizon
        # curvature (1/m) produced by steer = +-1
        self.k_steer = max_steer_angle / wheelbase
        self.max_speed = max_speed
        self.v_target = v_target
        self.action_spec = Discrete(n_steer * self.n_throttle)
        self.x = self.y = self.heading = self.speed = 0.0
        self.t = 0
        self.done = True
        self.step_calls = 0

    # action grid ---------------------------------------------------------
    def compose(self, steer_idx: int, throttle_idx: int) -> int:
        if not (0 <= steer_idx < self.n_steer and 0 <= throttle_idx < self.n_throttle):
            raise ValueError(f"steer/throttle index ({steer_idx}, {throttle_idx}) out of range")
        return steer_idx * self.n_throttle + throttle_idx

    def decompose(self, action: int) -> tuple[int, int]:
        if not self.action_spec.contains(action):
            raise ValueError(f"action index {action!r} not in [0, {self.action_spec.n})")
        return divmod(int(action), self.n_throttle)

    def nearest_steer_index(self, steer: float) -> int:
        return int(np.argmin(np.abs(self.steer_values - steer)))

    def nearest_throttle_index(self, accel: float) -> int:
        return int(np.argmin(np.abs(np.asarray(self.accel_table) - accel)))

    # dynamics ------------------------------------------------------------
    def set_pose(self, x: float, y: float, heading: float, speed: float = 0.0) -> np.ndarray:
        self.x, self.y, self.heading, self.speed = float(x), float(y), wrap_angle(heading), float(speed)
        self.t = 0
        self.done = False
        return self.observation()

    def reset(self, seed: int | None = None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        i = int(rng.integers(self.track.n_segments))
        x, y = self.track.waypoints[i]
        return self.set_pose(x, y, self.track.segment_heading(i), 0.0)

    def lateral_and_heading_error(self) -> tuple[float, float]:
        _, _, lateral, track_heading = self.track.project(self.x, self.y)
        return lateral, wrap_angle(self.heading - track_heading)

    def observation(self) -> np.ndarray:
        _, s, lateral, track_heading = self.track.project(self.x, self.y)
        herr = wrap_angle(self.heading - track_heading)
        obs = [lateral / self.track.half_width, math.sin(herr), math.cos(herr), self.speed / self.max_speed]
        c, sn = math.cos(self.heading), math.sin(self.heading)
        for dist in LOOKAHEADS:
            px, py = self.track.point_at(s + dist)
            dx, dy = px - self.x, py - self.y
            obs.append((c * dx + sn * dy) / _LOOKAHEAD_SCALE)
            obs.append((-sn * dx + c * dy) / _LOOKAHEAD_SCALE)
        return np.array(obs)

    def step(self, action):
        if self.done:
            raise EpisodeOverError("step() called on a finished episode; call reset()")
        steer_idx, throttle_idx = self.decompose(action)
        steer = self.steer_values[steer_idx]
        accel = self.accel_table[throttle_idx]

        self.heading = wrap_angle(self.heading + self.speed * steer * self.k_steer * self.dt)
        self.speed = min(max(self.speed + accel * self.dt, 0.0), self.max_speed)
        self.x += self.speed * math.cos(self.heading) * self.dt
        self.y += self.speed * math.sin(self.heading) * self.dt
        self.t += 1
        self.step_calls += 1

        obs = self.observation()
        lateral = obs[0] * self.track.half_width
        if abs(lateral) > self.track.half_width:
            self.done = True
            return obs, 0.0, True
        reward = (
            max(0.0, 1.0 - abs(lateral) / self.track.half_width)
            * max(0.0, obs[2])
            * min(self.speed / self.v_target, 1.0)
        )
        self.done = self.t >= self.horizon
        return obs, reward, self.done

    def off_track(self) -> bool:
        lateral, _ = self.lateral_and_heading_error()
        return abs(lateral) > self.track.half_width
