"""Environment interface types shared by all environments."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an environment instance.

    entity_shape is the (rows, cols) layout the feature extractor uses to
    view one observation as a set of entity rows; rows * cols must equal
    obs_dim.
    """

    n_agents: int
    obs_dim: int
    n_actions: int
    state_dim: int
    episode_limit: int
    entity_shape: tuple[int, int]

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError(f"n_agents must be >= 2, got {self.n_agents}")
        if self.n_actions < 2:
            raise ValueError(f"n_actions must be >= 2, got {self.n_actions}")
        if self.episode_limit < 1:
            raise ValueError(f"episode_limit must be >= 1, got {self.episode_limit}")
        rows, cols = self.entity_shape
        if rows * cols != self.obs_dim:
            raise ValueError(f"entity_shape {self.entity_shape} does not cover obs_dim {self.obs_dim}")


@dataclass
class StepResult:
    obs: np.ndarray        # (n_agents, obs_dim)
    state: np.ndarray      # (state_dim,)
    reward: float
    terminated: bool
    available: np.ndarray  # (n_agents, n_actions) bool

    def __post_init__(self):
        if not self.available.any(axis=1).all():
            raise ValueError("every agent needs at least one available action")


def build_env(name: str, **kwargs):
    """Construct an environment by config name."""
    from dcmac.envs.foraging import ForagingGrid
    from dcmac.envs.hallway import Hallway

    if name == "hallway":
        return Hallway(**kwargs)
    if name == "forage":
        return ForagingGrid(**kwargs)
    raise ValueError(f"unknown environment name: {name!r}")


def dump_episode_jsonl(episode, path) -> None:
    """Write an episode as JSON lines, one step per line."""
    with open(path, "w") as fh:
        for t in range(episode.length):
            row = {
                "t": t,
                "obs": episode.obs[t].tolist(),
                "state": episode.state[t].tolist(),
                "actions": episode.actions[t].tolist(),
                "reward": float(episode.rewards[t]),
                "terminated": bool(episode.terminated[t]),
            }
            fh.write(json.dumps(row) + "\n")
