"""Training: guidance-side value learning, distillation of the behavior
network toward the guidance policy, the two demand-alignment losses, and
constrained evaluation.

One train step samples a batch of episodes, computes every detached target
quantity in a gradient-free pass (bootstrap values from the periodic
parameter copy, guidance totals at guidance-greedy actions, demand labels),
then builds the live graph and takes a single Adam step over the union of
trained parameters. Holding the targets as plain arrays is equivalent to
stop-gradient and keeps the whole objective finite-difference checkable.

The communication replay regenerates each episode's demand noise from its
stored seed, so training is fully deterministic under a fixed master seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dcmac.agentnet import (
    AgentParams,
    CommSchedule,
    CommState,
    comm_round,
    select_action,
)
from dcmac.envs.base import EnvSpec
from dcmac.envs.replay import Episode, EpisodeBatch, ReplayBuffer
from dcmac.guidance import (
    DemandInferParams,
    GlobalDemandParams,
    GuidanceParams,
    MixerParams,
    demand_infer,
    global_demand,
    guidance_encode,
    guidance_q,
    qmix_mix,
)
from dcmac.numcore import (
    AdamState,
    GaussianParams,
    Tensor,
    adam_step,
    backward,
    gauss_kl,
    global_norm_clip,
    no_grad,
    zero_grad,
)
from dcmac.numcore.tensor import concat, reshape, tsum


@dataclass
class LossBreakdown:
    l_rl: float
    l_td: float
    l_demand_g: float
    l_demand: float
    total: float
    lambda_td: float
    lambda_demand_g: float
    lambda_demand: float


@dataclass
class TrainState:
    spec: EnvSpec
    schedule: CommSchedule
    guidance: GuidanceParams
    guidance_mixer: MixerParams
    guidance_target: GuidanceParams
    guidance_target_mixer: MixerParams
    agent: AgentParams
    target_mixer: MixerParams
    global_demand: GlobalDemandParams
    demand_infer: DemandInferParams
    opt: AdamState
    gamma: float = 0.99
    batch_size: int = 32
    target_update_interval: int = 200
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    anneal_steps: int = 50_000
    lambda_td: float = 1.0
    lambda_demand_g: float = 0.1
    lambda_demand: float = 0.1
    collector: str = "guidance"
    demand_sampling: str = "sample"
    zero_messages: bool = False
    losses: str = "all"
    grad_clip: float | None = None
    env_steps: int = 0
    train_steps: int = 0
    episode_count: int = 0

    def live_named_params(self) -> list[tuple[str, Tensor]]:
        """Every trained parameter; the periodic target copies are excluded."""
        out = self.guidance.named_params("guidance")
        out += self.guidance_mixer.named_params("guidance_mixer")
        out += self.agent.named_params("agent")
        out += self.target_mixer.named_params("target_mixer")
        out += self.global_demand.named_params("global_demand")
        out += self.demand_infer.named_params("demand_infer")
        return out

    def guidance_named_params(self) -> list[tuple[str, Tensor]]:
        return self.guidance.named_params("guidance") + self.guidance_mixer.named_params("guidance_mixer")


def _copy_group(src: list[tuple[str, Tensor]], dst: list[tuple[str, Tensor]]) -> None:
    for (_, s), (_, d) in zip(src, dst):
        d.data[:] = s.data


def refresh_target(state: TrainState) -> None:
    _copy_group(state.guidance.named_params(""), state.guidance_target.named_params(""))
    _copy_group(state.guidance_mixer.named_params(""), state.guidance_target_mixer.named_params(""))


def init_train_state(
    rng: np.random.Generator,
    spec: EnvSpec,
    schedule: CommSchedule,
    d_hidden: int = 64,
    d_tiny: int = 8,
    d_dem: int = 16,
    d_att: int = 32,
    d_mix: int = 32,
    temperature: float | None = None,
    lr: float = 5e-4,
    **hyper,
) -> TrainState:
    entity_cols = spec.entity_shape[1]
    state = TrainState(
        spec=spec,
        schedule=schedule,
        guidance=GuidanceParams.init(rng, entity_cols, spec.n_agents, spec.n_actions, d_hidden),
        guidance_mixer=MixerParams.init(rng, spec.state_dim, spec.n_agents, d_mix),
        guidance_target=GuidanceParams.init(rng, entity_cols, spec.n_agents, spec.n_actions, d_hidden),
        guidance_target_mixer=MixerParams.init(rng, spec.state_dim, spec.n_agents, d_mix),
        agent=AgentParams.init(rng, entity_cols, spec.n_actions, d_hidden, d_tiny, d_dem, d_att, temperature),
        target_mixer=MixerParams.init(rng, spec.state_dim, spec.n_agents, d_mix),
        global_demand=GlobalDemandParams.init(rng, d_hidden, d_dem),
        demand_infer=DemandInferParams.init(rng, d_hidden, spec.n_actions, d_dem),
        opt=AdamState(lr=lr),
        **hyper,
    )
    state.opt = AdamState.init(state.live_named_params(), lr=lr)
    refresh_target(state)
    return state


def anneal_epsilon(step: int, start: float = 1.0, end: float = 0.05, anneal_steps: int = 50_000) -> float:
    if step >= anneal_steps:
        return end
    return start + (end - start) * (max(step, 0) / anneal_steps)


def _noise_block(comm_seed: int, episode_limit: int, n: int, d_dem: int) -> np.ndarray:
    """The full per-episode demand-noise tape, regenerated from the seed."""
    gen = np.random.default_rng(comm_seed)
    return gen.standard_normal((episode_limit + 1, n, n, d_dem))


def collect_episode(
    env,
    state: TrainState,
    buffer: ReplayBuffer | None,
    rng: np.random.Generator,
    comm_seed: int,
    action_fn=None,
) -> Episode:
    """Roll out one episode and record it. Actions come from the configured
    collector policy (epsilon-greedy), or from ``action_fn(t, step_result)``
    when given (scripted rollouts share the same recording path)."""
    spec = state.spec
    n = spec.n_agents
    res = env.reset(rng)
    obs_hist, state_hist = [res.obs], [res.state]
    actions_hist, reward_hist, term_hist = [], [], []
    noise = None
    if state.collector == "target" and action_fn is None and state.demand_sampling == "sample":
        noise = _noise_block(comm_seed, spec.episode_limit, n, state.agent.d_dem)

    with no_grad():
        hidden = [Tensor(np.zeros((1, state.guidance.d_hidden))) for _ in range(n)]
        comm_state = CommState()
        t = 0
        while not res.terminated:
            eps = anneal_epsilon(state.env_steps + t, state.epsilon_start, state.epsilon_end, state.anneal_steps)
            if action_fn is not None:
                acts = np.asarray(action_fn(t, res), dtype=np.int64)
            elif state.collector == "guidance":
                obs_t = [Tensor(res.obs[i][None]) for i in range(n)]
                hidden = [
                    guidance_encode(state.guidance, obs_t[i], hidden[i], spec.entity_shape) for i in range(n)
                ]
                acts = np.array(
                    [
                        select_action(guidance_q(state.guidance, hidden, i).data[0], res.available[i], eps, rng)
                        for i in range(n)
                    ],
                    dtype=np.int64,
                )
            elif state.collector == "target":
                obs_t = [Tensor(res.obs[i][None]) for i in range(n)]
                step_noise = noise[t][None] if noise is not None else None
                result, hidden, comm_state = comm_round(
                    state.agent, spec, state.schedule, comm_state, obs_t, hidden, t, step_noise,
                    zero_messages=state.zero_messages,
                )
                acts = np.array(
                    [
                        select_action(result.q_loc[i].data[0], res.available[i], eps, rng)
                        for i in range(n)
                    ],
                    dtype=np.int64,
                )
            else:
                raise ValueError(f"unknown collector {state.collector!r}")
            res = env.step(acts)
            obs_hist.append(res.obs)
            state_hist.append(res.state)
            actions_hist.append(acts)
            reward_hist.append(res.reward)
            term_hist.append(1.0 if res.terminated else 0.0)
            t += 1

    episode = Episode(
        obs=np.array(obs_hist),
        state=np.array(state_hist),
        actions=np.array(actions_hist),
        rewards=np.array(reward_hist),
        terminated=np.array(term_hist),
        comm_seed=comm_seed,
    )
    if buffer is not None:
        buffer.push(episode)
    state.env_steps += episode.length
    state.episode_count += 1
    return episode


@dataclass
class _Targets:
    """Detached quantities for one batch, all plain float arrays. Holding
    them fixed while the live graph is rebuilt is what makes each loss term
    act on exactly its own parameter group."""

    guidance_h: list[list[np.ndarray]]      # [t][agent] (B, d_hidden)
    greedy_actions: np.ndarray              # (B, T, n) guidance-greedy actions
    y: np.ndarray                           # (B, T) bootstrap TD targets
    qg_total_greedy: np.ndarray             # (B, T) guidance mixer at greedy actions
    demand_labels: list[list[tuple[np.ndarray, np.ndarray]]]  # [t][agent] (mean, log_var)
    mask_total: float


def _stack_steps(arr: np.ndarray, t_max: int) -> np.ndarray:
    """(B, T, ...) -> (T * B, ...) with rows grouped step-major."""
    moved = np.moveaxis(arr[:, :t_max], 0, 1)
    return moved.reshape(t_max * arr.shape[0], *arr.shape[2:])


def compute_targets(state: TrainState, batch: EpisodeBatch) -> _Targets:
    spec = state.spec
    n = spec.n_agents
    b, t_max = batch.size, batch.max_length
    d_hid = state.guidance.d_hidden
    mask_total = float(batch.mask.sum())
    if t_max == 0 or mask_total == 0.0:
        raise ValueError("batch has no valid steps")

    with no_grad():
        # Online guidance unroll with all agents stacked into the row axis
        # (agent-major blocks); the shared encoder makes the rows independent.
        h = Tensor(np.zeros((n * b, d_hid)))
        steps = []
        for t in range(t_max):
            obs_t = batch.obs[:, t].transpose(1, 0, 2).reshape(n * b, -1)
            h = guidance_encode(state.guidance, Tensor(obs_t), h, spec.entity_shape)
            steps.append(h.data)
        h_all = np.stack(steps).reshape(t_max, n, b, d_hid)
        guidance_h = [[h_all[t, i] for i in range(n)] for t in range(t_max)]

        # The joint head has no recurrence, so it runs once per agent over
        # every step at once.
        joint = [Tensor(np.ascontiguousarray(h_all[:, i]).reshape(t_max * b, d_hid)) for i in range(n)]
        qs = [guidance_q(state.guidance, joint, i).data for i in range(n)]
        rows = np.arange(t_max * b)
        greedy_flat = np.stack([q.argmax(axis=-1) for q in qs], axis=1)
        chosen = np.stack([qs[i][rows, greedy_flat[:, i]] for i in range(n)], axis=1)
        states_flat = _stack_steps(batch.state, t_max)
        qg_flat = qmix_mix(state.guidance_mixer, Tensor(chosen), Tensor(states_flat)).data
        greedy = greedy_flat.reshape(t_max, b, n).transpose(1, 0, 2)
        qg_total_greedy = qg_flat.reshape(t_max, b).T

        gp = global_demand(state.global_demand, Tensor(h_all.reshape(t_max * n * b, d_hid)))
        means = gp.mean.data.reshape(t_max, n, b, -1)
        lvs = gp.log_var.data.reshape(t_max, n, b, -1)
        demand_labels = [[(means[t, i], lvs[t, i]) for i in range(n)] for t in range(t_max)]

        # Periodic-copy unroll for the bootstrap target y; only steps 1..T
        # feed the target total.
        ht = Tensor(np.zeros((n * b, d_hid)))
        tgt_steps = []
        for t in range(t_max + 1):
            obs_t = batch.obs[:, t].transpose(1, 0, 2).reshape(n * b, -1)
            ht = guidance_encode(state.guidance_target, Tensor(obs_t), ht, spec.entity_shape)
            if t >= 1:
                tgt_steps.append(ht.data)
        ht_all = np.stack(tgt_steps).reshape(t_max, n, b, d_hid)
        joint_t = [Tensor(np.ascontiguousarray(ht_all[:, i]).reshape(t_max * b, d_hid)) for i in range(n)]
        best = np.stack(
            [guidance_q(state.guidance_target, joint_t, i).data.max(axis=-1) for i in range(n)], axis=1
        )
        next_states = np.moveaxis(batch.state[:, 1 : t_max + 1], 0, 1).reshape(t_max * b, -1)
        q_minus_flat = qmix_mix(state.guidance_target_mixer, Tensor(best), Tensor(next_states)).data
        q_tot_minus = q_minus_flat.reshape(t_max, b).T

    y = batch.rewards + state.gamma * (1.0 - batch.terminated) * q_tot_minus
    return _Targets(
        guidance_h=guidance_h,
        greedy_actions=greedy,
        y=y,
        qg_total_greedy=qg_total_greedy,
        demand_labels=demand_labels,
        mask_total=mask_total,
    )


def _unroll_guidance(state: TrainState, batch: EpisodeBatch) -> list[Tensor]:
    """Guidance Q values with gradients: one (T * B, n_actions) tensor per
    agent, rows grouped step-major. The recurrent unroll stacks all agents
    into the row axis; the joint head then runs once per agent over every
    step."""
    spec = state.spec
    n = spec.n_agents
    b, t_max = batch.size, batch.max_length
    d_hid = state.guidance.d_hidden
    h = Tensor(np.zeros((n * b, d_hid)))
    steps = []
    for t in range(t_max):
        obs_t = batch.obs[:, t].transpose(1, 0, 2).reshape(n * b, -1)
        h = guidance_encode(state.guidance, Tensor(obs_t), h, spec.entity_shape)
        steps.append(h)
    cube = reshape(concat(steps, axis=0), (t_max, n, b, d_hid))
    per_agent_h = [reshape(cube[:, i], (t_max * b, d_hid)) for i in range(n)]
    return [guidance_q(state.guidance, per_agent_h, i) for i in range(n)]


def _replay_comm(state: TrainState, batch: EpisodeBatch) -> tuple[list[list[Tensor]], list[GaussianParams]]:
    """Re-run the recorded communication rounds with gradients, feeding each
    episode its stored noise tape. The per-step demand distributions come
    back as the round's stacked ordered-pair blocks."""
    spec = state.spec
    n = spec.n_agents
    b, t_max = batch.size, batch.max_length
    blocks = None
    if state.demand_sampling == "sample":
        blocks = [_noise_block(int(seed), spec.episode_limit, n, state.agent.d_dem) for seed in batch.comm_seeds]
    hidden = [Tensor(np.zeros((b, state.agent.d_hidden))) for _ in range(n)]
    comm_state = CommState()
    qloc, demand_params = [], []
    for t in range(t_max):
        noise = np.stack([blk[t] for blk in blocks]) if blocks is not None else None
        obs_t = [Tensor(batch.obs[:, t, i]) for i in range(n)]
        result, hidden, comm_state = comm_round(
            state.agent, spec, state.schedule, comm_state, obs_t, hidden, t, noise,
            zero_messages=state.zero_messages,
        )
        qloc.append(result.q_loc)
        demand_params.append(result.demand_params_stacked)
    return qloc, demand_params


def _chosen(q: Tensor, actions: np.ndarray, n_actions: int) -> Tensor:
    """Per-row Q value of the given action indices, as (B, 1)."""
    one_hot = np.zeros((actions.shape[0], n_actions))
    one_hot[np.arange(actions.shape[0]), actions] = 1.0
    return tsum(q * one_hot, axis=-1, keepdims=True)


def _loss_rl(state: TrainState, batch: EpisodeBatch, online_q: list[Tensor], tg: _Targets) -> Tensor:
    """Masked mean squared TD error of the guidance total at the recorded
    actions against the fixed bootstrap target. All steps mix in one call."""
    n = state.spec.n_agents
    t_max = batch.max_length
    acts = _stack_steps(batch.actions, t_max)
    vals = concat([_chosen(online_q[i], acts[:, i], state.spec.n_actions) for i in range(n)], axis=-1)
    q_tot = qmix_mix(state.guidance_mixer, vals, Tensor(_stack_steps(batch.state, t_max)))
    err = Tensor(tg.y.T.reshape(-1)) - q_tot
    return tsum(err * err * batch.mask.T.reshape(-1)) * (1.0 / tg.mask_total)


def _loss_td_distill(state: TrainState, batch: EpisodeBatch, qloc: list[list[Tensor]], tg: _Targets) -> Tensor:
    """Distillation: behavior total at recorded actions chases the fixed
    guidance total at guidance-greedy actions."""
    n = state.spec.n_agents
    t_max = batch.max_length
    acts = _stack_steps(batch.actions, t_max)
    per_agent = [concat([qloc[t][i] for t in range(t_max)], axis=0) for i in range(n)]
    vals = concat([_chosen(per_agent[i], acts[:, i], state.spec.n_actions) for i in range(n)], axis=-1)
    q_tot_b = qmix_mix(state.target_mixer, vals, Tensor(_stack_steps(batch.state, t_max)))
    err = Tensor(tg.qg_total_greedy.T.reshape(-1)) - q_tot_b
    return tsum(err * err * batch.mask.T.reshape(-1)) * (1.0 / tg.mask_total)


def _loss_demand_g(state: TrainState, batch: EpisodeBatch, tg: _Targets) -> Tensor:
    """KL from the oracle demand to the action-conditioned demand, summed
    over ordered pairs. Both demand modules receive gradients; the encoder
    hidden states enter as constants. Every (step, agent) row goes through
    one stacked pass."""
    n = state.spec.n_agents
    b, t_max = batch.size, batch.max_length
    h = Tensor(np.concatenate([tg.guidance_h[t][j] for t in range(t_max) for j in range(n)]))
    acts = tg.greedy_actions.transpose(1, 2, 0).reshape(-1)
    p = global_demand(state.global_demand, h)
    q = demand_infer(state.demand_infer, h, acts)
    kl = gauss_kl(p, q)
    mask = np.broadcast_to(batch.mask.T[:, None, :], (t_max, n, b)).reshape(-1)
    return tsum(kl * mask) * (float(n - 1) / tg.mask_total)


def _loss_demand(
    state: TrainState, batch: EpisodeBatch, demand_params: list[GaussianParams], tg: _Targets
) -> Tensor:
    """KL from each parsed demand to the fixed oracle label, one stacked
    pass over every (step, receiver, sender) row. Gradients reach the parser
    and, through the tiny messages, the behavior trunk."""
    n = state.spec.n_agents
    b, t_max = batch.size, batch.max_length
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    parsed = GaussianParams(
        mean=concat([dp.mean for dp in demand_params], axis=0),
        log_var=concat([dp.log_var for dp in demand_params], axis=0),
    )
    label = GaussianParams(
        mean=Tensor(np.concatenate([tg.demand_labels[t][j][0] for t in range(t_max) for _, j in pairs])),
        log_var=Tensor(np.concatenate([tg.demand_labels[t][j][1] for t in range(t_max) for _, j in pairs])),
    )
    kl = gauss_kl(parsed, label)
    mask = np.broadcast_to(batch.mask.T[:, None, :], (t_max, len(pairs), b)).reshape(-1)
    return tsum(kl * mask) * (1.0 / tg.mask_total)


def compute_losses(state: TrainState, batch: EpisodeBatch, targets: _Targets | None = None) -> tuple[LossBreakdown, Tensor]:
    tg = targets if targets is not None else compute_targets(state, batch)
    online_q = _unroll_guidance(state, batch)
    l_rl = _loss_rl(state, batch, online_q, tg)
    if state.losses == "rl_only":
        return (
            LossBreakdown(
                l_rl=float(l_rl.data),
                l_td=0.0,
                l_demand_g=0.0,
                l_demand=0.0,
                total=float(l_rl.data),
                lambda_td=state.lambda_td,
                lambda_demand_g=state.lambda_demand_g,
                lambda_demand=state.lambda_demand,
            ),
            l_rl,
        )
    qloc, demand_params = _replay_comm(state, batch)
    l_td = _loss_td_distill(state, batch, qloc, tg)
    l_dg = _loss_demand_g(state, batch, tg)
    l_d = _loss_demand(state, batch, demand_params, tg)
    total = l_rl + state.lambda_td * l_td + state.lambda_demand_g * l_dg + state.lambda_demand * l_d
    breakdown = LossBreakdown(
        l_rl=float(l_rl.data),
        l_td=float(l_td.data),
        l_demand_g=float(l_dg.data),
        l_demand=float(l_d.data),
        total=float(total.data),
        lambda_td=state.lambda_td,
        lambda_demand_g=state.lambda_demand_g,
        lambda_demand=state.lambda_demand,
    )
    return breakdown, total


def loss_rl(batch: EpisodeBatch, state: TrainState) -> Tensor:
    return _loss_rl(state, batch, _unroll_guidance(state, batch), compute_targets(state, batch))


def loss_td_distill(batch: EpisodeBatch, state: TrainState) -> Tensor:
    qloc, _ = _replay_comm(state, batch)
    return _loss_td_distill(state, batch, qloc, compute_targets(state, batch))


def loss_demand_g(batch: EpisodeBatch, state: TrainState) -> Tensor:
    return _loss_demand_g(state, batch, compute_targets(state, batch))


def loss_demand(batch: EpisodeBatch, state: TrainState) -> Tensor:
    _, demand_params = _replay_comm(state, batch)
    return _loss_demand(state, batch, demand_params, compute_targets(state, batch))


def train_step(state: TrainState, buffer: ReplayBuffer, rng: np.random.Generator) -> LossBreakdown:
    batch = buffer.sample(state.batch_size, rng)
    breakdown, total = compute_losses(state, batch)
    live = state.live_named_params()
    zero_grad([p for _, p in live])
    backward(total)
    if state.grad_clip is not None and state.grad_clip > 0:
        global_norm_clip(live, state.grad_clip)
    adam_step(state.opt, live)
    state.train_steps += 1
    if state.train_steps % state.target_update_interval == 0:
        refresh_target(state)
    return breakdown


def evaluate(
    state: TrainState,
    env,
    mode: str,
    rho: float | None,
    n_episodes: int,
    rng: np.random.Generator,
    action_fn=None,
) -> dict:
    """Greedy rollouts. ``test`` runs the decentralized communication
    pipeline (only the behavior parameters); ``guidance`` runs the
    full-observability policy and sends nothing. ``action_fn(t, step_result)``
    substitutes a scripted policy while keeping the metrics path."""
    if mode not in ("test", "guidance"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    spec = state.spec
    n = spec.n_agents
    schedule = state.schedule
    if rho is not None and mode == "test":
        schedule = CommSchedule(n_agents=n, rho=rho, tiny_period=state.schedule.tiny_period)

    successes = 0
    returns = []
    msg_count = 0.0
    step_count = 0
    with no_grad():
        for _ in range(n_episodes):
            res = env.reset(rng)
            noise = None
            if mode == "test" and action_fn is None and state.demand_sampling == "sample":
                noise = _noise_block(
                    int(rng.integers(0, 2**63 - 1)), spec.episode_limit, n, state.agent.d_dem
                )
            hidden_dim = state.agent.d_hidden if mode == "test" else state.guidance.d_hidden
            hidden = [Tensor(np.zeros((1, hidden_dim))) for _ in range(n)]
            comm_state = CommState()
            total = 0.0
            t = 0
            while not res.terminated:
                if action_fn is not None:
                    acts = np.asarray(action_fn(t, res), dtype=np.int64)
                elif mode == "test":
                    obs_t = [Tensor(res.obs[i][None]) for i in range(n)]
                    step_noise = noise[t][None] if noise is not None else None
                    result, hidden, comm_state = comm_round(
                        state.agent, spec, schedule, comm_state, obs_t, hidden, t, step_noise,
                        zero_messages=state.zero_messages,
                    )
                    acts = [
                        select_action(result.q_loc[i].data[0], res.available[i], 0.0, rng) for i in range(n)
                    ]
                    msg_count += float(result.link.sum())
                else:
                    obs_t = [Tensor(res.obs[i][None]) for i in range(n)]
                    hidden = [
                        guidance_encode(state.guidance, obs_t[i], hidden[i], spec.entity_shape)
                        for i in range(n)
                    ]
                    acts = [
                        select_action(guidance_q(state.guidance, hidden, i).data[0], res.available[i], 0.0, rng)
                        for i in range(n)
                    ]
                res = env.step(acts)
                total += res.reward
                t += 1
                step_count += 1
            returns.append(total)
            if total >= 1.0 - 1e-9:
                successes += 1

    msgs_per_step = msg_count / max(step_count, 1)
    return {
        "success_rate": successes / n_episodes,
        "mean_return": float(np.mean(returns)),
        "msgs_per_step": msgs_per_step,
        "bandwidth_util": msgs_per_step / (n * (n - 1)),
    }


def training_grad_check(seed: int = 0, eps: float = 1e-6):
    """Finite-difference check of the full objective on a small fixed batch.
    Targets are computed once and held fixed, matching what one optimizer
    step actually differentiates. Deterministic demands keep the loss a
    smooth function of the parameters."""
    from dcmac.envs.hallway import Hallway
    from dcmac.numcore import grad_check

    env = Hallway(lengths=(2, 2), episode_limit=3)
    rng = np.random.default_rng(seed)
    state = init_train_state(
        rng,
        env.spec,
        CommSchedule(n_agents=2, rho=1.0),
        d_hidden=3,
        d_tiny=2,
        d_dem=2,
        d_att=2,
        d_mix=2,
        demand_sampling="mean",
    )
    buffer = ReplayBuffer(capacity=8)
    for k in range(2):
        collect_episode(env, state, buffer, rng, comm_seed=1000 + k)
    batch = buffer.sample(2, rng)
    targets = compute_targets(state, batch)

    def scalar_fn():
        return compute_losses(state, batch, targets)[1]

    return grad_check(scalar_fn, state.live_named_params(), eps=eps)
