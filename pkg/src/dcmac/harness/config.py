"""Run configuration: five settings blocks plus a master seed, loaded from
JSON with a strict schema. Unknown keys and out-of-range values are rejected
with the full key path, because a silently ignored typo in a loss weight
would invalidate an experiment."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Invalid run configuration; the message starts with the key path."""


@dataclass(frozen=True)
class EnvConfig:
    name: str = "hallway"
    # hallway geometry: one corridor length per agent
    lengths: tuple[int, ...] = (4, 6)
    # foraging geometry
    grid_size: int = 8
    n_agents: int = 3
    n_foods: int = 2
    load_level: int = 2
    sight_radius: int = 2
    # None keeps the environment's own default
    episode_limit: int | None = None


@dataclass(frozen=True)
class NetConfig:
    d_hidden: int = 64
    d_tiny: int = 8
    d_dem: int = 16
    d_att: int = 32
    d_mix: int = 32
    # None means 1/sqrt(d_att)
    temperature: float | None = None


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    lr: float = 5e-4
    batch_size: int = 32
    buffer_size: int = 5000
    target_update_interval: int = 200
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    anneal_steps: int = 50_000
    total_env_steps: int = 150_000
    lambda_td: float = 1.0
    lambda_demand_g: float = 0.1
    lambda_demand: float = 0.1
    collector: str = "guidance"
    demand_sampling: str = "sample"
    zero_messages: bool = False
    losses: str = "all"
    grad_clip: float | None = 10.0


@dataclass(frozen=True)
class CommConfig:
    rho: float = 1.0
    tiny_period: int = 1


@dataclass(frozen=True)
class EvalConfig:
    interval: int = 5000
    n_episodes: int = 32
    modes: tuple[str, ...] = ("test", "guidance")
    # Timing in metrics rows breaks byte-for-byte reproducibility, so it is
    # opt-in; with it off the wall_seconds column is written as 0.
    record_timing: bool = False


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = EnvConfig()
    net: NetConfig = NetConfig()
    train: TrainConfig = TrainConfig()
    comm: CommConfig = CommConfig()
    eval: EvalConfig = EvalConfig()
    seed: int = 0


_BLOCKS = {
    "env": EnvConfig,
    "net": NetConfig,
    "train": TrainConfig,
    "comm": CommConfig,
    "eval": EvalConfig,
}

_TUPLE_FIELDS = {"lengths", "modes"}


def _coerce(path: str, name: str, value, target_type):
    """JSON-typed value -> dataclass field value, with strict typing. Ints
    are accepted where floats are expected; bools are never numbers."""
    if name in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: must be a list")
        return tuple(value)
    if value is None:
        return None
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: must be true or false")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{path}: must be a number, not a boolean")
    if target_type is int:
        if not isinstance(value, int):
            raise ConfigError(f"{path}: must be an integer")
        return value
    if target_type is float:
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: must be a number")
        return float(value)
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: must be a string")
        return value
    return value


_FIELD_TYPES = {
    bool: bool,
    int: int,
    float: float,
    str: str,
}


def _base_type(field: dataclasses.Field):
    """The concrete scalar type of a field, unwrapping X | None annotations."""
    ann = field.type if not isinstance(field.type, str) else field.type
    text = str(ann)
    if "str" in text:
        return str
    if "bool" in text:
        return bool
    if "float" in text:
        return float
    if "int" in text:
        return int
    return None


def _build_block(block_name: str, cls, sub: dict):
    if not isinstance(sub, dict):
        raise ConfigError(f"{block_name}: must be an object of settings")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in sub.items():
        if key not in fields:
            raise ConfigError(f"{block_name}.{key}: unknown key")
        kwargs[key] = _coerce(f"{block_name}.{key}", key, value, _base_type(fields[key]))
    return cls(**kwargs)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root: must be a JSON object")
    for key in raw:
        if key not in _BLOCKS and key != "seed":
            raise ConfigError(f"{key}: unknown key")
    blocks = {name: _build_block(name, cls, raw.get(name, {})) for name, cls in _BLOCKS.items()}
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    cfg = RunConfig(seed=seed, **blocks)
    validate_config(cfg)
    return cfg


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["env"]["lengths"] = list(out["env"]["lengths"])
    out["eval"]["modes"] = list(out["eval"]["modes"])
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate_config(cfg: RunConfig) -> None:
    env, net, tr, comm, ev = cfg.env, cfg.net, cfg.train, cfg.comm, cfg.eval

    _require(env.name in ("hallway", "foraging"), "env.name: must be 'hallway' or 'foraging'")
    if env.name == "hallway":
        _require(len(env.lengths) >= 2, "env.lengths: need at least two corridors")
        _require(all(isinstance(v, int) and v >= 1 for v in env.lengths),
                 "env.lengths: every entry must be a positive integer")
    else:
        _require(env.grid_size >= 3, "env.grid_size: must be >= 3")
        _require(env.n_agents >= 2, "env.n_agents: must be >= 2")
        _require(env.n_foods >= 1, "env.n_foods: must be >= 1")
        _require(1 <= env.load_level <= env.n_agents,
                 "env.load_level: must be in [1, n_agents]")
        _require(env.sight_radius >= 1, "env.sight_radius: must be >= 1")
    _require(env.episode_limit is None or env.episode_limit >= 1,
             "env.episode_limit: must be >= 1")

    for dim in ("d_hidden", "d_tiny", "d_dem", "d_att", "d_mix"):
        _require(getattr(net, dim) >= 1, f"net.{dim}: must be a positive integer")
    _require(net.temperature is None or net.temperature > 0, "net.temperature: must be > 0")

    _require(0.0 <= tr.gamma < 1.0, "train.gamma: must be in [0, 1)")
    _require(tr.lr > 0, "train.lr: must be > 0")
    _require(tr.batch_size >= 1, "train.batch_size: must be >= 1")
    _require(tr.buffer_size >= tr.batch_size, "train.buffer_size: must be >= batch_size")
    _require(tr.target_update_interval >= 1, "train.target_update_interval: must be >= 1")
    _require(0.0 <= tr.epsilon_end <= tr.epsilon_start <= 1.0,
             "train.epsilon_end: need 0 <= epsilon_end <= epsilon_start <= 1")
    _require(tr.anneal_steps >= 1, "train.anneal_steps: must be >= 1")
    _require(tr.total_env_steps >= 1, "train.total_env_steps: must be >= 1")
    for lam in ("lambda_td", "lambda_demand_g", "lambda_demand"):
        _require(getattr(tr, lam) >= 0, f"train.{lam}: must be >= 0")
    _require(tr.collector in ("guidance", "target"), "train.collector: must be 'guidance' or 'target'")
    _require(tr.demand_sampling in ("sample", "mean"),
             "train.demand_sampling: must be 'sample' or 'mean'")
    _require(tr.losses in ("all", "rl_only"), "train.losses: must be 'all' or 'rl_only'")
    _require(tr.grad_clip is None or tr.grad_clip > 0, "train.grad_clip: must be > 0")

    _require(0.0 < comm.rho <= 1.0, "comm.rho: must be in (0, 1]")
    _require(comm.tiny_period >= 1, "comm.tiny_period: must be >= 1")

    _require(ev.interval >= 1, "eval.interval: must be >= 1")
    _require(ev.n_episodes >= 1, "eval.n_episodes: must be >= 1")
    _require(len(ev.modes) >= 1, "eval.modes: need at least one mode")
    for mode in ev.modes:
        _require(mode in ("test", "guidance"), f"eval.modes: unknown mode {mode!r}")

    _require(cfg.seed >= 0, "seed: must be >= 0")
