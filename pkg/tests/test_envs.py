"""Hallway, ForagingGrid, the replay buffer, and episode serialization."""

import json

import numpy as np
import pytest
from scipy import stats

from dcmac.envs import (
    Episode,
    ForagingGrid,
    Hallway,
    ReplayBuffer,
    build_env,
    dump_episode_jsonl,
    scripted_optimal_actions,
)
from dcmac.envs import foraging as fg
from dcmac.envs.hallway import LEFT as H_LEFT
from dcmac.envs.hallway import RIGHT as H_RIGHT
from dcmac.envs.hallway import STAY as H_STAY
from dcmac.envs.replay import batch_episodes


def _random_hallway_episode(seed=0, lengths=(4, 6)):
    env = Hallway(lengths)
    rng = np.random.default_rng(seed)
    res = env.reset(rng)
    obs, states = [res.obs], [res.state]
    actions, rewards, terms = [], [], []
    while not res.terminated:
        act = rng.integers(0, 3, size=env.spec.n_agents)
        res = env.step(act)
        obs.append(res.obs)
        states.append(res.state)
        actions.append(act)
        rewards.append(res.reward)
        terms.append(1.0 if res.terminated else 0.0)
    return Episode(
        obs=np.array(obs),
        state=np.array(states),
        actions=np.array(actions),
        rewards=np.array(rewards),
        terminated=np.array(terms),
        comm_seed=seed,
    )


def test_hallway_spec_dimensions():
    env = Hallway((4, 6))
    assert env.spec.obs_dim == 7
    assert env.spec.state_dim == 14
    assert env.spec.n_actions == 3
    assert env.spec.entity_shape == (1, 7)


def test_hallway_rejects_short_corridors():
    with pytest.raises(ValueError):
        Hallway((1, 5))


def test_hallway_reset_positions_start_off_goal():
    env = Hallway((4, 6))
    rng = np.random.default_rng(0)
    for _ in range(200):
        env.reset(rng)
        pos = env.positions
        assert (pos >= 1).all()
        assert (pos <= np.array([4, 6])).all()


def test_hallway_reset_distribution_uniform():
    env = Hallway((4, 6))
    rng = np.random.default_rng(1)
    counts = [np.zeros(4), np.zeros(6)]
    for _ in range(10_000):
        env.reset(rng)
        pos = env.positions
        counts[0][pos[0] - 1] += 1
        counts[1][pos[1] - 1] += 1
    for c in counts:
        assert stats.chisquare(c).pvalue > 0.01


def test_hallway_simultaneous_goal_scores():
    env = Hallway((4, 6))
    env.reset(np.random.default_rng(2))
    env._positions = np.array([1, 1])
    res = env.step([H_LEFT, H_LEFT])
    assert res.reward == 1.0
    assert res.terminated


def test_hallway_right_clamps_at_corridor_end():
    env = Hallway((4, 6))
    env.reset(np.random.default_rng(3))
    env._positions = np.array([4, 6])
    res = env.step([H_RIGHT, H_RIGHT])
    assert not res.terminated
    assert np.array_equal(env.positions, [4, 6])
    assert res.obs[0, 4] == 1.0 and res.obs[1, 6] == 1.0


def test_hallway_left_clamps_at_goal():
    env = Hallway((4, 6))
    env.reset(np.random.default_rng(4))
    env._positions = np.array([0, 3])
    res = env.step([H_LEFT, H_STAY])
    # The clamped agent stays at 0; a strict subset at goal fails the team.
    assert res.obs[0, 0] == 1.0
    assert res.terminated and res.reward == 0.0


def test_hallway_lone_arrival_fails_exhaustively():
    # Every start and every 3-step joint action sequence on lengths (3, 3):
    # reward 1 exactly when both agents stand at 0 together, never else.
    for p0 in range(1, 4):
        for p1 in range(1, 4):
            for seq in range(9**3):
                plan = [(seq // 9**k) % 9 for k in range(3)]
                env = Hallway((3, 3), episode_limit=10)
                env.reset(np.random.default_rng(0))
                env._positions = np.array([p0, p1])
                total = 0.0
                for joint in plan:
                    res = env.step([joint % 3, joint // 3])
                    total += res.reward
                    both_at_goal = (env.positions == 0).all()
                    assert (res.reward == 1.0) == both_at_goal
                    if res.terminated:
                        break
                assert total in (0.0, 1.0)


def test_hallway_step_after_termination_raises():
    env = Hallway((4, 6))
    env.reset(np.random.default_rng(5))
    env._positions = np.array([1, 1])
    env.step([H_LEFT, H_LEFT])
    with pytest.raises(RuntimeError):
        env.step([H_STAY, H_STAY])


def test_hallway_limit_terminates_without_reward():
    env = Hallway((4, 6), episode_limit=3)
    env.reset(np.random.default_rng(6))
    res = env.step([H_STAY, H_STAY])
    res = env.step([H_STAY, H_STAY])
    assert not res.terminated
    res = env.step([H_STAY, H_STAY])
    assert res.terminated and res.reward == 0.0


def test_hallway_deterministic_given_seed():
    a = _random_hallway_episode(seed=7)
    b = _random_hallway_episode(seed=7)
    assert np.array_equal(a.obs, b.obs)
    assert np.array_equal(a.actions, b.actions)
    assert np.array_equal(a.rewards, b.rewards)


def test_scripted_descent_scores_from_every_start():
    lengths = (4, 6)
    for p0 in range(1, 5):
        for p1 in range(1, 7):
            env = Hallway(lengths)
            env.reset(np.random.default_rng(0))
            env._positions = np.array([p0, p1])
            total, done = 0.0, False
            while not done:
                res = env.step(scripted_optimal_actions(env.positions))
                total += res.reward
                done = res.terminated
            assert total == 1.0, (p0, p1)


def test_forage_spec_dimensions():
    env = ForagingGrid(grid_size=8, n_agents=2, n_foods=1, load_level=2, sight_radius=2)
    assert env.spec.obs_dim == 52
    assert env.spec.n_actions == 6
    assert env.spec.state_dim == 128
    assert env.spec.entity_shape == (26, 2)


def test_forage_rejects_impossible_placement():
    with pytest.raises(ValueError):
        ForagingGrid(grid_size=3, n_agents=5, n_foods=5)


def test_forage_reset_entities_on_distinct_cells():
    env = ForagingGrid()
    rng = np.random.default_rng(8)
    for _ in range(100):
        env.reset(rng)
        cells = [tuple(p) for p in env.agent_positions] + [tuple(p) for p in env.food_positions]
        assert len(set(cells)) == len(cells)


def test_forage_reset_placement_uniform():
    env = ForagingGrid(grid_size=8, n_agents=3, n_foods=2)
    rng = np.random.default_rng(9)
    counts = np.zeros((5, 64))
    for _ in range(10_000):
        env.reset(rng)
        for e, (r, c) in enumerate(list(env.agent_positions) + list(env.food_positions)):
            counts[e, r * 8 + c] += 1
    for e in range(5):
        assert stats.chisquare(counts[e]).pvalue > 0.01


def _forage_with_layout(agents, foods, **kwargs):
    env = ForagingGrid(**kwargs)
    env.reset(np.random.default_rng(0))
    env._agents = np.array(agents, dtype=np.int64)
    env._foods = np.array(foods, dtype=np.int64)
    env._alive = np.ones(len(foods), dtype=bool)
    return env


def test_forage_joint_load_collects_and_normalizes():
    env = _forage_with_layout([(2, 1), (2, 3)], [(2, 2)], grid_size=6, n_agents=2, n_foods=1)
    res = env.step([fg.LOAD, fg.LOAD])
    assert res.reward == 1.0
    assert res.terminated


def test_forage_lone_load_does_nothing():
    env = _forage_with_layout([(2, 1), (5, 5)], [(2, 2)], grid_size=6, n_agents=2, n_foods=1)
    res = env.step([fg.LOAD, fg.STAY])
    assert res.reward == 0.0
    assert not res.terminated
    assert env.foods_alive.all()


def test_forage_collision_lowest_index_wins():
    env = _forage_with_layout([(0, 0), (0, 2)], [(4, 4)], grid_size=6, n_agents=2, n_foods=1)
    res = env.step([fg.RIGHT, fg.LEFT])  # both target (0, 1)
    assert np.array_equal(env.agent_positions, [(0, 1), (0, 2)])
    assert not res.terminated


def test_forage_blocked_moves_resolve_to_stay():
    env = _forage_with_layout([(0, 0), (0, 1)], [(1, 0)], grid_size=6, n_agents=2, n_foods=1)
    # Agent 0: off-grid up -> stay; agent 1: onto agent 0's cell -> stay.
    env.step([fg.UP, fg.LEFT])
    assert np.array_equal(env.agent_positions, [(0, 0), (0, 1)])
    env.step([fg.DOWN, fg.STAY])  # onto the food cell -> stay
    assert np.array_equal(env.agent_positions, [(0, 0), (0, 1)])


def test_forage_returns_bounded_over_random_rollouts():
    env = ForagingGrid(grid_size=5, n_agents=2, n_foods=1, load_level=2, sight_radius=2, episode_limit=25)
    rng = np.random.default_rng(10)
    for _ in range(300):
        res = env.reset(rng)
        total = 0.0
        while not res.terminated:
            res = env.step(rng.integers(0, 6, size=2))
            total += res.reward
        assert 0.0 <= total <= 1.0


def test_forage_collected_cell_frees_up():
    env = _forage_with_layout([(2, 1), (2, 3)], [(2, 2), (4, 4)], grid_size=6, n_agents=2, n_foods=2)
    res = env.step([fg.LOAD, fg.LOAD])
    assert res.reward == 0.5
    assert not res.terminated
    # The collected food's cell frees up for movement.
    env.step([fg.RIGHT, fg.STAY])
    assert np.array_equal(env.agent_positions[0], (2, 2))


def test_forage_observation_window_codes():
    env = _forage_with_layout([(2, 2), (2, 4)], [(2, 3)], grid_size=6, n_agents=2, n_foods=1, sight_radius=1)
    res = env._result(0.0, False)
    obs = res.obs[0]
    assert obs[0] == 2 / 5 and obs[1] == 2 / 5
    # 3x3 window around (2,2), row-major; center pair index 4, east pair index 5.
    window = obs[2:].reshape(9, 2)
    assert window[4, 0] == 0.5          # self
    assert window[5, 1] == 1.0          # food to the east
    assert window[5, 0] == 0.0
    assert window.sum() == 1.5          # nothing else in sight


def test_forage_step_after_termination_raises():
    env = _forage_with_layout([(2, 1), (2, 3)], [(2, 2)], grid_size=6, n_agents=2, n_foods=1)
    env.step([fg.LOAD, fg.LOAD])
    with pytest.raises(RuntimeError):
        env.step([fg.STAY, fg.STAY])


def test_build_env_factory():
    assert isinstance(build_env("hallway", lengths=(4, 6)), Hallway)
    assert isinstance(build_env("forage", grid_size=5), ForagingGrid)
    with pytest.raises(ValueError):
        build_env("chess")


def test_buffer_push_then_sample_roundtrip():
    buf = ReplayBuffer(capacity=4)
    ep = _random_hallway_episode(seed=11)
    buf.push(ep)
    batch = buf.sample(1, np.random.default_rng(0))
    assert batch.size == 1
    assert batch.lengths[0] == ep.length
    assert np.array_equal(batch.actions[0, : ep.length], ep.actions)
    assert np.array_equal(batch.obs[0, : ep.length + 1], ep.obs)


def test_buffer_fifo_eviction():
    buf = ReplayBuffer(capacity=2)
    eps = [_random_hallway_episode(seed=s) for s in (1, 2, 3)]
    for ep in eps:
        buf.push(ep)
    seeds = {ep.comm_seed for ep in buf.episodes()}
    assert seeds == {2, 3}
    assert len(buf) == 2


def test_buffer_rejects_undersized_sample():
    buf = ReplayBuffer(capacity=4)
    buf.push(_random_hallway_episode(seed=12))
    with pytest.raises(ValueError):
        buf.sample(2, np.random.default_rng(0))


def test_buffer_rejects_incomplete_episode():
    ep = _random_hallway_episode(seed=13)
    ep.terminated[-1] = 0.0
    with pytest.raises(ValueError):
        ReplayBuffer(4).push(ep)


def test_buffer_sampling_uniform():
    buf = ReplayBuffer(capacity=50)
    for s in range(50):
        buf.push(_random_hallway_episode(seed=s))
    rng = np.random.default_rng(14)
    counts = np.zeros(50)
    for _ in range(2000):
        batch = buf.sample(10, rng)
        for s in batch.comm_seeds:
            counts[s] += 1
    assert stats.chisquare(counts).pvalue > 0.01


def test_batch_padding_invariants():
    eps = [_random_hallway_episode(seed=s) for s in (15, 16, 17, 18)]
    batch = batch_episodes(eps)
    t_max = max(ep.length for ep in eps)
    assert batch.max_length == t_max
    for k, ep in enumerate(eps):
        t = ep.length
        # Mask is a ones-prefix that ends exactly at the terminal step.
        assert np.array_equal(batch.mask[k, :t], np.ones(t))
        assert np.array_equal(batch.mask[k, t:], np.zeros(t_max - t))
        assert batch.terminated[k, t - 1] == 1.0
        assert np.array_equal(batch.rewards[k, t:], np.zeros(t_max - t))
        assert np.array_equal(batch.state[k, t + 1 :], np.zeros((t_max - t, batch.state.shape[2])))


def test_episode_jsonl_dump(tmp_path):
    ep = _random_hallway_episode(seed=19)
    path = tmp_path / "episode.jsonl"
    dump_episode_jsonl(ep, path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(lines) == ep.length
    assert lines[0]["t"] == 0
    assert lines[-1]["terminated"] is True
    assert lines[0]["obs"] == ep.obs[0].tolist()
    assert [row["reward"] for row in lines] == ep.rewards.tolist()
