"""Experiment harness: validated run configuration, the training loop with
metrics and checkpointing, constraint sweeps, and the command-line entry
point."""

from dcmac.harness.config import (
    CommConfig,
    ConfigError,
    EnvConfig,
    EvalConfig,
    NetConfig,
    RunConfig,
    TrainConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from dcmac.harness.metrics import METRICS_HEADER, MetricsRow, read_metrics, write_metrics
from dcmac.harness.checkpoint import CheckpointError, checkpoint_load, checkpoint_save
from dcmac.harness.run import build_env, build_schedule, build_state, run_train, trace_episode

__all__ = [
    "CommConfig",
    "ConfigError",
    "EnvConfig",
    "EvalConfig",
    "NetConfig",
    "RunConfig",
    "TrainConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "METRICS_HEADER",
    "MetricsRow",
    "read_metrics",
    "write_metrics",
    "CheckpointError",
    "checkpoint_load",
    "checkpoint_save",
    "build_env",
    "build_schedule",
    "build_state",
    "run_train",
    "trace_episode",
]
