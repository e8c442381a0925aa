"""Static SVG reward curves."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from grirl.gri import MetricsRow  # noqa: E402


@dataclass(frozen=True)
class Curve:
    label: str
    steps: np.ndarray
    mean: np.ndarray
    std: np.ndarray | None  # None for a single run: no band is drawn
    n_runs: int


def group_curve(label: str, runs: list[list[MetricsRow]]) -> Curve:
    """Mean and sample std across runs at the env_steps every run logged."""
    if not runs:
        raise ValueError(f"group {label!r} has no runs")
    common = set(r.env_steps for r in runs[0])
    for rows in runs[1:]:
        common &= {r.env_steps for r in rows}
    steps = np.array(sorted(common), dtype=np.int64)
    values = np.array([[r.mean_eval_return for r in rows if r.env_steps in common] for rows in runs])
    if len(runs) == 1:
        return Curve(label, steps, values[0], None, 1)
    return Curve(label, steps, values.mean(axis=0), values.std(axis=0, ddof=1), len(runs))


def render(curves: list[Curve], out_path, expert_level: float | None = None, title: str = ""):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for c in curves:
        (line,) = ax.plot(c.steps, c.mean, label=c.label if c.n_runs == 1 else f"{c.label} (n={c.n_runs})")
        if c.std is not None:
            ax.fill_between(c.steps, c.mean - c.std, c.mean + c.std, color=line.get_color(), alpha=0.2)
    if expert_level is not None:
        ax.axhline(expert_level, color="black", linestyle="--", linewidth=1, label="expert")
    ax.set_xlabel("environment steps")
    ax.set_ylabel("mean evaluation return")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    # fixed salt and no date: identical inputs give byte-identical SVG
    with matplotlib.rc_context({"svg.hashsalt": "grirl"}):
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path
