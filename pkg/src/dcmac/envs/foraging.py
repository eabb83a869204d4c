"""Foraging grid: level-1 agents jointly load foods whose level equals the
number of loaders required; the team return is the cleared fraction."""

from __future__ import annotations

import numpy as np

from dcmac.envs.base import EnvSpec, StepResult

UP, DOWN, LEFT, RIGHT, STAY, LOAD = 0, 1, 2, 3, 4, 5
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}


class ForagingGrid:
    """Square grid with point agents (level 1) and static foods.

    A food is collected when the levels of 4-adjacent agents choosing
    `load` in the same step sum to at least the food level. Rewards are
    normalized so a fully cleared episode returns exactly 1. Movement
    conflicts resolve to stay; simultaneous claims on one cell go to the
    lowest agent index.
    """

    def __init__(
        self,
        grid_size: int = 8,
        n_agents: int = 3,
        n_foods: int = 2,
        load_level: int = 2,
        sight_radius: int = 2,
        episode_limit: int = 50,
    ):
        if grid_size < 3:
            raise ValueError(f"grid_size must be >= 3, got {grid_size}")
        if grid_size * grid_size < n_agents + n_foods:
            raise ValueError("not enough cells for all agents and foods")
        if load_level < 1 or load_level > n_agents:
            raise ValueError(f"load_level {load_level} not satisfiable by {n_agents} level-1 agents")
        self.grid_size = grid_size
        self.n_foods = n_foods
        self.load_level = load_level
        self.sight_radius = sight_radius
        window = (2 * sight_radius + 1) ** 2
        # One entity row per window cell (agent channel, food channel), plus
        # a leading row carrying the agent's own normalized position.
        self.spec = EnvSpec(
            n_agents=n_agents,
            obs_dim=2 + 2 * window,
            n_actions=6,
            state_dim=2 * grid_size * grid_size,
            episode_limit=episode_limit,
            entity_shape=(window + 1, 2),
        )
        self._agents: np.ndarray | None = None    # (n, 2) row, col
        self._foods: np.ndarray | None = None     # (f, 2)
        self._alive: np.ndarray | None = None     # (f,) bool
        self._t = 0
        self._done = True

    @property
    def agent_positions(self) -> np.ndarray:
        return self._agents.copy()

    @property
    def food_positions(self) -> np.ndarray:
        return self._foods.copy()

    @property
    def foods_alive(self) -> np.ndarray:
        return self._alive.copy()

    def reset(self, rng: np.random.Generator) -> StepResult:
        n = self.spec.n_agents
        cells = rng.choice(self.grid_size * self.grid_size, size=n + self.n_foods, replace=False)
        coords = np.stack([cells // self.grid_size, cells % self.grid_size], axis=1).astype(np.int64)
        self._agents = coords[:n]
        self._foods = coords[n:]
        self._alive = np.ones(self.n_foods, dtype=bool)
        self._t = 0
        self._done = False
        return self._result(0.0, False)

    def step(self, actions) -> StepResult:
        if self._done:
            raise RuntimeError("step called on a terminated episode")
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.spec.n_agents,) or actions.min() < 0 or actions.max() >= 6:
            raise ValueError(f"invalid foraging actions {actions}")

        occupied = {tuple(p) for p in self._agents}
        food_cells = {tuple(p) for p, alive in zip(self._foods, self._alive) if alive}
        claimed: set[tuple[int, int]] = set()
        new_positions = self._agents.copy()
        for i, a in enumerate(actions):
            if a not in _MOVES:
                continue
            dr, dc = _MOVES[a]
            target = (int(self._agents[i, 0]) + dr, int(self._agents[i, 1]) + dc)
            in_grid = 0 <= target[0] < self.grid_size and 0 <= target[1] < self.grid_size
            if in_grid and target not in occupied and target not in food_cells and target not in claimed:
                new_positions[i] = target
                claimed.add(target)
        self._agents = new_positions

        reward = 0.0
        for k in range(self.n_foods):
            if not self._alive[k]:
                continue
            loaders = 0
            for i, a in enumerate(actions):
                if a == LOAD and abs(self._agents[i, 0] - self._foods[k, 0]) + abs(self._agents[i, 1] - self._foods[k, 1]) == 1:
                    loaders += 1
            if loaders >= self.load_level:
                self._alive[k] = False
                reward += 1.0 / self.n_foods
        self._t += 1
        terminated = bool(not self._alive.any() or self._t >= self.spec.episode_limit)
        self._done = terminated
        return self._result(reward, terminated)

    def _result(self, reward: float, terminated: bool) -> StepResult:
        n = self.spec.n_agents
        g = self.grid_size
        r = self.sight_radius
        agent_cells = {tuple(p) for p in self._agents}
        food_cells = {tuple(p) for p, alive in zip(self._foods, self._alive) if alive}

        obs = np.zeros((n, self.spec.obs_dim))
        for i in range(n):
            row, col = self._agents[i]
            obs[i, 0] = row / (g - 1)
            obs[i, 1] = col / (g - 1)
            k = 2
            for dr in range(-r, r + 1):
                for dc in range(-r, r + 1):
                    cell = (int(row) + dr, int(col) + dc)
                    if 0 <= cell[0] < g and 0 <= cell[1] < g:
                        if cell in agent_cells:
                            obs[i, k] = 0.5
                        if cell in food_cells:
                            obs[i, k + 1] = 1.0
                    k += 2

        state = np.zeros(self.spec.state_dim)
        for row, col in self._agents:
            state[2 * (row * g + col)] = 0.5
        for (row, col), alive in zip(self._foods, self._alive):
            if alive:
                state[2 * (row * g + col) + 1] = 1.0

        return StepResult(
            obs=obs,
            state=state,
            reward=reward,
            terminated=terminated,
            available=np.ones((n, 6), dtype=bool),
        )
