"""``grirl`` command line: record, train, sweep, plot, inspect.

Exit codes: 0 success, 1 usage or validation error, 2 runtime abort.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from grirl import demodata
from grirl.envs import ENV_IDS, expert_for, make_env
from grirl.harness.config import ConfigError, TrainConfig, load_config
from grirl.harness.metrics import MetricsFormatError, read_metrics
from grirl.harness.plot import group_curve, render
from grirl.harness.runs import read_status, run_all, run_many, seed_dir
from grirl.nn import CheckpointFormatError, mlp_from_bytes

EXIT_OK, EXIT_USAGE, EXIT_ABORT = 0, 1, 2
SUMMARY_COLUMNS = ("p_demo", "label", "runs", "failed", "mean_final_return", "std_final_return")


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"grirl: {msg}", file=sys.stderr)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _apply_overrides(cfg: TrainConfig, args) -> TrainConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seeds"] = (args.seed,)
    if getattr(args, "mode", None) is not None:
        changes["mode"] = args.mode
    p = getattr(args, "p_demo", None)
    if isinstance(p, float):
        changes["p_demo"] = p
    cfg = dataclasses.replace(cfg, **changes)
    from grirl.harness.config import validate

    problems = validate(cfg)
    if cfg.demo_path and not Path(cfg.demo_path).is_file():
        problems.append(f"run.demo_path {cfg.demo_path} does not exist")
    if problems:
        raise ConfigError(problems)
    return cfg


def _default_out(config_path: str) -> Path:
    return Path("runs") / Path(config_path).stem


# record -------------------------------------------------------------------

def cmd_record(args) -> int:
    if args.n <= 0:
        raise UsageError("--n must be a positive number of transitions")
    if args.env not in ENV_IDS:
        raise UsageError(f"--env must be one of {', '.join(ENV_IDS)}")
    env = make_env(args.env)
    expert = expert_for(env)
    if args.expert not in ("auto", type(expert).__name__):
        raise UsageError(f"expert {args.expert!r} cannot drive {args.env}; use {type(expert).__name__}")
    dataset = demodata.record(env, expert, args.n, args.seed)
    if args.corrupt:
        dataset = demodata.corrupt(dataset, args.corrupt, args.corrupt_seed)
    demodata.save(dataset, args.out)
    returns = dataset.episode_returns()
    print(f"wrote {args.out}")
    print(f"episodes {len(dataset.episodes)}")
    print(f"transitions {dataset.n_transitions}")
    print(f"max_step_reward {dataset.observed_max_step_reward!r}")
    print(f"mean_episode_return {float(returns.mean())!r}")
    return EXIT_OK


# train / sweep ------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = Path(args.out) if args.out else _default_out(args.config)
    outcomes = run_all(cfg, out, args.jobs)
    for o in outcomes:
        state = f"final mean_eval_return {o.final_return!r}" if o.ok else f"FAILED {o.error}"
        print(f"seed {o.seed}: {state} ({o.run_dir})")
    return EXIT_OK if all(o.ok for o in outcomes) else EXIT_ABORT


def sweep_label(p_demo: float) -> str:
    return "vanilla" if p_demo == 0 else f"p_demo={p_demo:g}"


def summarize(groups: list[tuple[float, list]]) -> list[dict[str, str]]:
    """Per p_demo: mean and sample std of final returns over successful seeds.

    The std field is left empty when fewer than two seeds succeeded.
    """
    rows = []
    for p, outcomes in groups:
        finals = np.array([o.final_return for o in outcomes if o.ok])
        rows.append({
            "p_demo": repr(float(p)),
            "label": sweep_label(p),
            "runs": str(len(outcomes)),
            "failed": str(sum(not o.ok for o in outcomes)),
            "mean_final_return": repr(float(finals.mean())) if len(finals) else "",
            "std_final_return": repr(float(finals.std(ddof=1))) if len(finals) > 1 else "",
        })
    return rows


def cmd_sweep(args) -> int:
    values = args.values
    if len(values) < 2:
        raise UsageError("sweep needs at least two --p-demo values")
    if len(set(values)) != len(values):
        raise UsageError("--p-demo values must be distinct")
    base = load_config(args.config)
    if args.seed is not None:
        base = dataclasses.replace(base, seeds=(args.seed,))
    if args.mode is not None:
        base = dataclasses.replace(base, mode=args.mode)
    configs = [_apply_overrides(dataclasses.replace(base, p_demo=p), argparse.Namespace()) for p in values]
    out = Path(args.out) if args.out else _default_out(args.config)
    tasks, index = [], []
    for p, cfg in zip(values, configs):
        for s in cfg.seeds:
            tasks.append((cfg, s, seed_dir(out / f"p_demo_{p:g}", s)))
            index.append(p)
    outcomes = run_many(tasks, args.jobs)
    groups = [(p, [o for o, q in zip(outcomes, index) if q == p]) for p in values]

    out.mkdir(parents=True, exist_ok=True)
    rows = summarize(groups)
    with (out / "summary.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(",".join(row[c] for c in SUMMARY_COLUMNS))

    curves = []
    for p, outs in groups:
        runs = [read_metrics(Path(o.run_dir) / "metrics.csv") for o in outs if o.ok]
        if runs:
            curves.append(group_curve(sweep_label(p), runs))
    if curves:
        expert = _expert_level(base.demo_path) if base.demo_path else None
        plot_path = render(curves, out / f"{base.env_id}_overlay.svg", expert, f"{base.env_id} ({base.backbone})")
        print(f"plot {plot_path}")
    return EXIT_OK if all(o.ok for o in outcomes) else EXIT_ABORT


# plot ---------------------------------------------------------------------

def _expert_level(demo_path) -> float:
    return float(demodata.load(demo_path).episode_returns().mean())


def collect_groups(paths) -> list[tuple[str, list[Path]]]:
    groups = []
    for p in map(Path, paths):
        if (p / "metrics.csv").is_file():
            groups.append((p.name, [p / "metrics.csv"]))
        elif p.is_file() and p.suffix == ".csv":
            groups.append((p.stem, [p]))
        else:
            files = sorted(p.glob("seed_*/metrics.csv"))
            if not files:
                raise UsageError(f"no metrics.csv under {p}")
            groups.append((p.name, files))
    return groups


def cmd_plot(args) -> int:
    curves = []
    for label, files in collect_groups(args.runs):
        curves.append(group_curve(label, [read_metrics(f) for f in files]))
    expert = _expert_level(args.expert_demo) if args.expert_demo else None
    out = render(curves, args.out, expert, args.title or "")
    print(f"plot {out}")
    return EXIT_OK


# inspect ------------------------------------------------------------------

def _describe_rewards(rewards: np.ndarray) -> str:
    if not len(rewards):
        return "none"
    return f"min {rewards.min()!r} mean {rewards.mean()!r} max {rewards.max()!r}"


def inspect_path(path: Path) -> list[str]:
    if path.is_dir():
        lines = [f"run {path}", f"status {read_status(path)}"]
        if (path / "metrics.csv").is_file():
            rows = read_metrics(path / "metrics.csv")
            lines.append(f"metrics rows {len(rows)}")
            if rows:
                last = rows[-1]
                lines.append(f"last env_steps {last.env_steps} mean_eval_return {last.mean_eval_return!r}")
        return lines
    data = path.read_bytes()
    magic = data[:4]
    if magic == demodata.MAGIC:
        ds = demodata.dataset_from_bytes(data)
        rewards = np.concatenate([e.rewards for e in ds.episodes])
        returns = ds.episode_returns()
        return [
            f"dataset {path}",
            f"env_id {ds.env_id}",
            f"action_spec {ds.action_spec}",
            f"obs_dim {ds.obs_dim}",
            f"episodes {len(ds.episodes)}",
            f"transitions {ds.n_transitions}",
            f"max_step_reward {ds.observed_max_step_reward!r}",
            f"mean_episode_return {float(returns.mean())!r}",
            f"step rewards {_describe_rewards(rewards)}",
        ]
    if magic == demodata.DUMP_MAGIC:
        batch, sources, env_id, spec = demodata.parse_buffer_dump(data)
        demo = sources == 1
        return [
            f"buffer dump {path}",
            f"env_id {env_id}",
            f"transitions {len(batch)}",
            f"demo_fraction {float(demo.mean()) if len(demo) else math.nan!r}",
            f"demonstration rewards {_describe_rewards(batch.rewards[demo])}",
            f"exploration rewards {_describe_rewards(batch.rewards[~demo])}",
        ]
    if magic == b"GRNN":
        net = mlp_from_bytes(data)
        n_params = sum(p.size for p in net.params())
        return [f"checkpoint {path}", f"layer_sizes {','.join(map(str, net.layer_sizes))}", f"parameters {n_params}"]
    raise UsageError(f"{path}: unrecognized file (magic {magic!r})")


def cmd_inspect(args) -> int:
    for line in inspect_path(Path(args.path)):
        print(line)
    return EXIT_OK


# entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grirl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("record", help="record an expert demonstration dataset")
    p.add_argument("--env", required=True)
    p.add_argument("--expert", default="auto", help="expert class name; 'auto' picks the env's scripted expert")
    p.add_argument("--n", type=int, required=True, help="minimum number of transitions (whole episodes)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--corrupt", type=float, default=0.0, help="fraction of actions to replace with random ones")
    p.add_argument("--corrupt-seed", type=int, default=0)
    p.set_defaults(func=cmd_record)

    for name, func, helptext in (("train", cmd_train, "train one run per seed"),
                                 ("sweep", cmd_sweep, "sweep p_demo values over every seed")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=int, help="run only this seed")
        p.add_argument("--mode", choices=("gri", "vanilla", "sqil"))
        p.add_argument("--jobs", type=int, default=1, help="runs executed in parallel")
        if name == "train":
            p.add_argument("--p-demo", type=float)
        else:
            p.add_argument("--p-demo", dest="values", type=_float_list, required=True,
                           help="comma-separated p_demo values, e.g. 0,0.1,0.2,0.4")
        p.set_defaults(func=func)

    p = sub.add_parser("plot", help="plot mean_eval_return curves to SVG")
    p.add_argument("runs", nargs="+", help="run directories, seed-group directories or metrics.csv files")
    p.add_argument("--out", required=True)
    p.add_argument("--expert-demo", help="dataset whose mean episode return is drawn as the expert level")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("inspect", help="print dataset, buffer dump, checkpoint or run statistics")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError, MetricsFormatError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (demodata.DatasetFormatError, CheckpointFormatError, demodata.ExpertMismatchError, OSError) as exc:
        _err(str(exc))
        return EXIT_ABORT
    except KeyboardInterrupt:
        _err("interrupted")
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
