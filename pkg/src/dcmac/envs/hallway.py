"""Hallway: each agent walks its own corridor and the team scores only when
all agents stand on the goal cell in the same step."""

from __future__ import annotations

import numpy as np

from dcmac.envs.base import EnvSpec, StepResult

LEFT, RIGHT, STAY = 0, 1, 2


class Hallway:
    """Agent i lives on positions {0..length_i}; 0 is the shared goal.

    Reaching the goal simultaneously scores 1 and ends the episode. If a
    strict subset of agents stands at the goal after a move, the episode
    ends in failure. All three actions are always available.
    """

    def __init__(self, lengths=(4, 6), episode_limit: int = 40):
        lengths = tuple(int(x) for x in lengths)
        if len(lengths) < 2:
            raise ValueError("hallway needs at least two agents")
        if any(x < 2 for x in lengths):
            raise ValueError(f"corridor lengths must be >= 2, got {lengths}")
        self.lengths = lengths
        obs_dim = max(lengths) + 1
        self.spec = EnvSpec(
            n_agents=len(lengths),
            obs_dim=obs_dim,
            n_actions=3,
            state_dim=len(lengths) * obs_dim,
            episode_limit=episode_limit,
            entity_shape=(1, obs_dim),
        )
        self._positions: np.ndarray | None = None
        self._t = 0
        self._done = True

    @property
    def positions(self) -> np.ndarray:
        return self._positions.copy()

    def reset(self, rng: np.random.Generator) -> StepResult:
        self._positions = np.array([rng.integers(1, ell + 1) for ell in self.lengths], dtype=np.int64)
        self._t = 0
        self._done = False
        return self._result(0.0, False)

    def step(self, actions) -> StepResult:
        if self._done:
            raise RuntimeError("step called on a terminated episode")
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.spec.n_agents,) or actions.min() < 0 or actions.max() >= 3:
            raise ValueError(f"invalid hallway actions {actions}")
        for i, a in enumerate(actions):
            if a == LEFT:
                self._positions[i] = max(self._positions[i] - 1, 0)
            elif a == RIGHT:
                self._positions[i] = min(self._positions[i] + 1, self.lengths[i])
        self._t += 1
        at_goal = self._positions == 0
        if at_goal.all():
            reward, terminated = 1.0, True
        elif at_goal.any():
            reward, terminated = 0.0, True
        elif self._t >= self.spec.episode_limit:
            reward, terminated = 0.0, True
        else:
            reward, terminated = 0.0, False
        self._done = terminated
        return self._result(reward, terminated)

    def _result(self, reward: float, terminated: bool) -> StepResult:
        obs = np.zeros((self.spec.n_agents, self.spec.obs_dim))
        obs[np.arange(self.spec.n_agents), self._positions] = 1.0
        return StepResult(
            obs=obs,
            state=obs.reshape(-1).copy(),
            reward=reward,
            terminated=terminated,
            available=np.ones((self.spec.n_agents, 3), dtype=bool),
        )


def scripted_optimal_actions(positions) -> np.ndarray:
    """Synchronized descent: only the agents farthest from the goal move
    left, so everyone arrives on the same step. Scores 1 from any start."""
    positions = np.asarray(positions)
    farthest = positions.max()
    return np.where(positions == farthest, LEFT, STAY).astype(np.int64)
