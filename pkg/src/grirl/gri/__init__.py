"""GRI orchestration: exploration and demonstration agents feeding one buffer."""

from grirl.gri.core import (
    MODES,
    AgentKind,
    EpisodeStats,
    GriConfig,
    RunAborted,
    StepCounter,
    collect_exploration_episode,
    eval_seeds,
    evaluate,
    inject_demonstration_episode,
    select_source,
    sqil_mode_transform,
)
from grirl.gri.distributed import train_distributed
from grirl.gri.runner import METRICS_COLUMNS, MetricsRow, RunResult, train

__all__ = [
    "METRICS_COLUMNS",
    "MODES",
    "AgentKind",
    "EpisodeStats",
    "GriConfig",
    "MetricsRow",
    "RunAborted",
    "RunResult",
    "StepCounter",
    "collect_exploration_episode",
    "eval_seeds",
    "evaluate",
    "inject_demonstration_episode",
    "select_source",
    "sqil_mode_transform",
    "train",
    "train_distributed",
]
