"""Episode records, padded batches, and the FIFO replay buffer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Episode:
    """One complete episode. obs/state carry T+1 entries (the final entry is
    the observation after the last transition); the comm seed regenerates
    the exact per-step communication noise used when the episode ran."""

    obs: np.ndarray         # (T+1, n_agents, obs_dim)
    state: np.ndarray       # (T+1, state_dim)
    actions: np.ndarray     # (T, n_agents) int64
    rewards: np.ndarray     # (T,)
    terminated: np.ndarray  # (T,) float 0/1
    comm_seed: int

    @property
    def length(self) -> int:
        return self.actions.shape[0]

    @property
    def ret(self) -> float:
        return float(self.rewards.sum())


@dataclass
class EpisodeBatch:
    """Episodes padded to the longest length in the batch. mask[b, t] is 1
    for valid steps and forms a prefix of ones; padded rewards are 0."""

    obs: np.ndarray         # (B, T+1, n_agents, obs_dim)
    state: np.ndarray       # (B, T+1, state_dim)
    actions: np.ndarray     # (B, T, n_agents) int64
    rewards: np.ndarray     # (B, T)
    terminated: np.ndarray  # (B, T)
    mask: np.ndarray        # (B, T)
    comm_seeds: np.ndarray  # (B,) int64
    lengths: np.ndarray     # (B,) int64

    @property
    def size(self) -> int:
        return self.obs.shape[0]

    @property
    def max_length(self) -> int:
        return self.actions.shape[1]


def batch_episodes(episodes: list[Episode]) -> EpisodeBatch:
    if not episodes:
        raise ValueError("cannot batch zero episodes")
    b = len(episodes)
    t_max = max(ep.length for ep in episodes)
    _, n, obs_dim = episodes[0].obs.shape
    state_dim = episodes[0].state.shape[1]
    obs = np.zeros((b, t_max + 1, n, obs_dim))
    state = np.zeros((b, t_max + 1, state_dim))
    actions = np.zeros((b, t_max, n), dtype=np.int64)
    rewards = np.zeros((b, t_max))
    terminated = np.zeros((b, t_max))
    mask = np.zeros((b, t_max))
    comm_seeds = np.zeros(b, dtype=np.int64)
    lengths = np.zeros(b, dtype=np.int64)
    for k, ep in enumerate(episodes):
        t = ep.length
        obs[k, : t + 1] = ep.obs
        state[k, : t + 1] = ep.state
        actions[k, :t] = ep.actions
        rewards[k, :t] = ep.rewards
        terminated[k, :t] = ep.terminated
        mask[k, :t] = 1.0
        comm_seeds[k] = ep.comm_seed
        lengths[k] = t
    return EpisodeBatch(obs, state, actions, rewards, terminated, mask, comm_seeds, lengths)


class ReplayBuffer:
    """Ring buffer of complete episodes with uniform without-replacement
    batch sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._store: list[Episode] = []
        self._insertions = 0

    def __len__(self) -> int:
        return len(self._store)

    def push(self, episode: Episode) -> None:
        if episode.length < 1 or episode.terminated[-1] != 1.0:
            raise ValueError("only complete (terminated) episodes can be stored")
        if len(self._store) < self.capacity:
            self._store.append(episode)
        else:
            self._store[self._insertions % self.capacity] = episode
        self._insertions += 1

    def episodes(self) -> list[Episode]:
        return list(self._store)

    def sample(self, batch_size: int, rng: np.random.Generator) -> EpisodeBatch:
        if batch_size > len(self._store):
            raise ValueError(f"buffer holds {len(self._store)} episodes, need {batch_size}")
        idx = rng.choice(len(self._store), size=batch_size, replace=False)
        return batch_episodes([self._store[i] for i in idx])
