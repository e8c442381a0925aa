"""Experiment configs, run directories, metrics CSVs, plots and the command line."""

from grirl.harness.config import ConfigError, TrainConfig, dump_config, load_config, parse_config, resolved, validate
from grirl.harness.metrics import HEADER, MetricsFormatError, MetricsWriter, read_metrics, write_metrics
from grirl.harness.runs import RunOutcome, run_all, run_seed

__all__ = [
    "HEADER",
    "ConfigError",
    "MetricsFormatError",
    "MetricsWriter",
    "RunOutcome",
    "TrainConfig",
    "dump_config",
    "load_config",
    "parse_config",
    "read_metrics",
    "resolved",
    "run_all",
    "run_seed",
    "validate",
    "write_metrics",
]
