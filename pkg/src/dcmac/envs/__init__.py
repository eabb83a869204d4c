"""Cooperative Dec-POMDP environments and episode storage."""

from dcmac.envs.base import EnvSpec, StepResult, build_env, dump_episode_jsonl
from dcmac.envs.hallway import Hallway, scripted_optimal_actions
from dcmac.envs.foraging import ForagingGrid
from dcmac.envs.replay import Episode, EpisodeBatch, ReplayBuffer

__all__ = [
    "EnvSpec",
    "StepResult",
    "build_env",
    "dump_episode_jsonl",
    "Hallway",
    "scripted_optimal_actions",
    "ForagingGrid",
    "Episode",
    "EpisodeBatch",
    "ReplayBuffer",
]
