"""Evaluation metrics records and their CSV serialization. The header and
the 6-significant-digit float format are a fixed contract so downstream
tooling can parse any run's output."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

METRICS_HEADER = (
    "env_step,episode,mode,success_rate,mean_return,loss_total,loss_rl,loss_td,"
    "loss_demand_g,loss_demand,epsilon,msgs_per_step,bandwidth_util,wall_seconds"
)


@dataclass
class MetricsRow:
    env_step: int
    episode: int
    mode: str
    success_rate: float
    mean_return: float
    loss_total: float
    loss_rl: float
    loss_td: float
    loss_demand_g: float
    loss_demand: float
    epsilon: float
    msgs_per_step: float
    bandwidth_util: float
    wall_seconds: float

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValueError(f"success_rate {self.success_rate} outside [0, 1]")
        if not 0.0 <= self.bandwidth_util <= 1.0:
            raise ValueError(f"bandwidth_util {self.bandwidth_util} outside [0, 1]")


def _format(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return f"{value:.6g}"


def write_metrics(rows: list[MetricsRow], path) -> None:
    lines = [METRICS_HEADER]
    names = [f.name for f in fields(MetricsRow)]
    for row in rows:
        lines.append(",".join(_format(getattr(row, name)) for name in names))
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics(path) -> list[MetricsRow]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise ValueError(f"{path}: unrecognized metrics header")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 14:
            raise ValueError(f"{path}:{lineno}: expected 14 fields, got {len(parts)}")
        rows.append(
            MetricsRow(
                env_step=int(parts[0]),
                episode=int(parts[1]),
                mode=parts[2],
                success_rate=float(parts[3]),
                mean_return=float(parts[4]),
                loss_total=float(parts[5]),
                loss_rl=float(parts[6]),
                loss_td=float(parts[7]),
                loss_demand_g=float(parts[8]),
                loss_demand=float(parts[9]),
                epsilon=float(parts[10]),
                msgs_per_step=float(parts[11]),
                bandwidth_util=float(parts[12]),
                wall_seconds=float(parts[13]),
            )
        )
    return rows
