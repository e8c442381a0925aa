"""Run directories.

A run directory holds ``config.snapshot`` (the resolved config), ``metrics.csv``,
``checkpoints/`` (one GRNN file per network plus a manifest), ``demo.ref``
(dataset path and SHA-256) and ``status`` (``running``, ``completed`` or
``failed: <reason>``).
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import traceback
from dataclasses import dataclass
from pathlib import Path

from grirl import demodata
from grirl.backbones import write_checkpoint
from grirl.envs import make_env
from grirl.gri import train
from grirl.harness.config import TrainConfig, dump_config, resolved
from grirl.harness.metrics import MetricsWriter


@dataclass(frozen=True)
class RunOutcome:
    seed: int
    run_dir: str
    ok: bool
    final_return: float
    error: str = ""


def seed_dir(root, seed: int) -> Path:
    return Path(root) / f"seed_{seed}"


def load_demos(cfg: TrainConfig):
    if not cfg.demo_path:
        return None
    dataset = demodata.load(cfg.demo_path)
    if cfg.demo_corrupt_fraction > 0:
        dataset = demodata.corrupt(dataset, cfg.demo_corrupt_fraction, cfg.demo_corrupt_seed)
    return dataset


def env_factory(cfg: TrainConfig):
    env_kwargs = dict(cfg.env)
    return lambda: make_env(cfg.env_id, **env_kwargs)


def run_seed(cfg: TrainConfig, seed: int, run_dir, dataset=None) -> RunOutcome:
    """Train one seed into ``run_dir``. Failures are recorded, not raised."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    status = run_dir / "status"
    status.write_text("running\n")
    one = dataclasses.replace(resolved(cfg), seeds=(seed,))
    (run_dir / "config.snapshot").write_text(dump_config(one))
    try:
        if dataset is None:
            dataset = load_demos(cfg)
        if cfg.demo_path:
            digest = hashlib.sha256(Path(cfg.demo_path).read_bytes()).hexdigest()
            (run_dir / "demo.ref").write_text(f"path {cfg.demo_path}\nsha256 {digest}\n")
        with MetricsWriter(run_dir / "metrics.csv") as writer:
            result = train(
                cfg.gri_config(),
                cfg.backbone,
                cfg.backbone_config(),
                env_factory(cfg),
                seed,
                dataset,
                on_row=writer.write,
                wall_clock=cfg.wall_clock,
                stop_at_return=cfg.stop_at_return,
            )
        extra = dict(result.learner.checkpoint_extra())
        extra.update(env_steps=result.env_steps, updates=result.updates,
                     exploration_episodes=result.exploration_episodes, demo_episodes=result.demo_episodes)
        write_checkpoint(run_dir / "checkpoints", result.learner.networks(), extra)
    except Exception as exc:  # noqa: BLE001 - a failed run is reported in its status file
        reason = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        status.write_text(f"failed: {reason}\n")
        (run_dir / "error.txt").write_text(traceback.format_exc())
        return RunOutcome(seed, str(run_dir), False, math.nan, reason)
    final = result.rows[-1].mean_eval_return if result.rows else math.nan
    status.write_text("completed\n")
    return RunOutcome(seed, str(run_dir), True, final)


def run_all(cfg: TrainConfig, out_root, jobs: int = 1) -> list[RunOutcome]:
    """One run per configured seed, in ``out_root/seed_<s>``."""
    tasks = [(cfg, s, seed_dir(out_root, s)) for s in cfg.seeds]
    return run_many(tasks, jobs)


def _run_task(task) -> RunOutcome:
    cfg, seed, run_dir = task
    return run_seed(cfg, seed, run_dir)


def run_many(tasks, jobs: int = 1) -> list[RunOutcome]:
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks))


def read_status(run_dir) -> str:
    path = Path(run_dir) / "status"
    return path.read_text().strip() if path.exists() else "missing"
