"""Built-in environments and their scripted experts."""

from grirl.envs.experts import ExpertPolicy, PendulumEnergyController, PurePursuitDriver, expert_action, expert_for
from grirl.envs.pendulum import EpisodeOverError, Pendulum, wrap_angle
from grirl.envs.spaces import ActionSpec, Box, Discrete
from grirl.envs.trackdrive import Track, TrackDrive2D, TrackFormatError, default_track

ENV_IDS = (Pendulum.env_id, TrackDrive2D.env_id)


def make_env(env_id: str, **kwargs):
    if env_id == Pendulum.env_id:
        return Pendulum(**kwargs)
    if env_id == TrackDrive2D.env_id:
        track = kwargs.pop("track_path", None)
        if track is not None:
            kwargs["track"] = Track.load(track)
        return TrackDrive2D(**kwargs)
    raise ValueError(f"unknown env id {env_id!r}; expected one of {ENV_IDS}")


__all__ = [
    "ENV_IDS",
    "ActionSpec",
    "Box",
    "Discrete",
    "EpisodeOverError",
    "ExpertPolicy",
    "Pendulum",
    "PendulumEnergyController",
    "PurePursuitDriver",
    "Track",
    "TrackDrive2D",
    "TrackFormatError",
    "default_track",
    "expert_action",
    "expert_for",
    "make_env",
    "wrap_angle",
]
