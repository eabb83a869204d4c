"""The shared per-agent behavior network and the per-step communication
round.

Every agent runs the same pipeline with one shared parameter set: extract
features from the local observation, update the recurrent history, emit a
tiny broadcast, parse every teammate's tiny into a demand distribution,
generate Q-bias messages customized to each teammate, score link relevance,
prune links to the bandwidth budget, and assemble the message-biased local
Q values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dcmac.envs.base import EnvSpec
from dcmac.numcore.gaussian import GaussianParams, reparam_sample
from dcmac.numcore.layers import GRUParams, Linear, SelfAttentionParams, gru_cell, self_attention, tanh
from dcmac.numcore.tensor import Tensor, ShapeError, clip, concat, matmul, reshape, softmax, swapaxes, tsum

LOG_VAR_MIN, LOG_VAR_MAX = -10.0, 10.0


@dataclass
class AgentParams:
    """One copy shared by all agents."""

    extractor: SelfAttentionParams
    gru: GRUParams
    q_head: Linear
    tiny_gen: Linear
    demand_parser: Linear
    msg_gen: Linear
    w_q: Tensor
    w_k: Tensor
    temperature: float
    d_hidden: int
    d_tiny: int
    d_dem: int
    n_actions: int

    @staticmethod
    def init(
        rng: np.random.Generator,
        entity_cols: int,
        n_actions: int,
        d_hidden: int = 64,
        d_tiny: int = 8,
        d_dem: int = 16,
        d_att: int = 32,
        temperature: float | None = None,
    ) -> "AgentParams":
        if min(entity_cols, n_actions, d_hidden, d_tiny, d_dem, d_att) < 1:
            raise ValueError("all dimensions must be positive")
        bq = 1.0 / np.sqrt(d_hidden)
        bk = 1.0 / np.sqrt(d_dem)
        return AgentParams(
            extractor=SelfAttentionParams.init(rng, entity_cols, d_hidden),
            gru=GRUParams.init(rng, d_hidden, d_hidden),
            q_head=Linear.init(rng, d_hidden, n_actions),
            tiny_gen=Linear.init(rng, d_hidden, d_tiny),
            demand_parser=Linear.init(rng, d_tiny, 2 * d_dem),
            msg_gen=Linear.init(rng, d_hidden + d_dem, n_actions),
            w_q=Tensor(rng.uniform(-bq, bq, size=(d_hidden, d_att)), requires_grad=True),
            w_k=Tensor(rng.uniform(-bk, bk, size=(d_dem, d_att)), requires_grad=True),
            temperature=temperature if temperature is not None else 1.0 / math.sqrt(d_att),
            d_hidden=d_hidden,
            d_tiny=d_tiny,
            d_dem=d_dem,
            n_actions=n_actions,
        )

    def named_params(self, prefix: str = "agent") -> list[tuple[str, Tensor]]:
        out = self.extractor.named_params(f"{prefix}.extractor")
        out += self.gru.named_params(f"{prefix}.gru")
        out += self.q_head.named_params(f"{prefix}.q_head")
        out += self.tiny_gen.named_params(f"{prefix}.tiny_gen")
        out += self.demand_parser.named_params(f"{prefix}.demand_parser")
        out += self.msg_gen.named_params(f"{prefix}.msg_gen")
        out += [(f"{prefix}.w_q", self.w_q), (f"{prefix}.w_k", self.w_k)]
        return out


@dataclass
class CommSchedule:
    """Broadcast period and the per-agent outgoing-link budget
    C(i) = ceil(rho * (n - 1))."""

    n_agents: int
    rho: float = 1.0
    tiny_period: int = 1

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if self.tiny_period < 1:
            raise ValueError(f"tiny_period must be >= 1, got {self.tiny_period}")
        if self.n_agents < 2:
            raise ValueError("communication needs at least two agents")

    @property
    def budget(self) -> int:
        c = math.ceil(self.rho * (self.n_agents - 1))
        assert 1 <= c <= self.n_agents - 1
        return c


@dataclass
class CommState:
    """Per-episode broadcast cache: the latest tiny message per agent."""

    cache: list[Tensor] | None = None


@dataclass
class CommRoundResult:
    tiny: list[Tensor]                                   # visible broadcast per sender
    demand: dict[tuple[int, int], Tensor]                # (receiver i, sender j) -> d_ij
    demand_params: dict[tuple[int, int], GaussianParams]
    message: dict[tuple[int, int], Tensor]               # (sender i, receiver j) -> m_ij
    alpha: list[Tensor]                                  # per sender i: (B, n-1) over teammates
    link: np.ndarray                                     # (B, n, n), link[b, i, j] = i sends to j
    q_base: list[Tensor]
    q_loc: list[Tensor]
    demand_params_stacked: GaussianParams | None = None  # ordered-pair blocks, receiver-major


def teammates(n: int, i: int) -> list[int]:
    return [j for j in range(n) if j != i]


def extract(params: AgentParams, obs: Tensor, entity_shape: tuple[int, int]) -> Tensor:
    """Observation vector(s) -> feature vector via entity self-attention."""
    rows, cols = entity_shape
    if obs.shape[-1] != rows * cols:
        raise ShapeError("extract", obs.shape, entity_shape)
    batch = obs.shape[0]
    return self_attention(params.extractor, reshape(obs, (batch, rows, cols)))


def history(params: AgentParams, feat: Tensor, h_prev: Tensor) -> Tensor:
    return gru_cell(params.gru, feat, h_prev)


def gen_tiny(params: AgentParams, h: Tensor) -> Tensor:
    return tanh(params.tiny_gen(h))


def broadcast_tiny(
    schedule: CommSchedule, state: CommState, t: int, fresh: list[Tensor]
) -> tuple[CommState, list[Tensor]]:
    """Refresh the cache on schedule (always at t = 0); receivers see the
    cached tinies."""
    if t % schedule.tiny_period == 0 or state.cache is None:
        state = CommState(cache=list(fresh))
    return state, state.cache


def parse_demand(params: AgentParams, tiny: Tensor, noise: np.ndarray) -> tuple[GaussianParams, Tensor]:
    raw = params.demand_parser(tiny)
    gp = GaussianParams(
        mean=raw[..., : params.d_dem],
        log_var=clip(raw[..., params.d_dem :], LOG_VAR_MIN, LOG_VAR_MAX),
    )
    return gp, reparam_sample(gp, noise)


def gen_message(params: AgentParams, h_i: Tensor, d_ij: Tensor) -> Tensor:
    return params.msg_gen(concat([h_i, d_ij], axis=-1))


def correlate(params: AgentParams, h_i: Tensor, demands: list[Tensor]) -> Tensor:
    """Relevance weights over teammates: softmax of the scaled bilinear
    score temperature * (W_q h_i) . (W_k d_ij), normalized across j."""
    if not demands:
        raise ValueError("correlate needs at least one teammate")
    q = matmul(h_i, params.w_q)
    scores = []
    for d in demands:
        k = matmul(d, params.w_k)
        s = params.temperature * tsum(q * k, axis=-1, keepdims=True)
        scores.append(s)
    return softmax(concat(scores, axis=-1), axis=-1)


def prune(alpha: np.ndarray, budget: int) -> np.ndarray:
    """Binary top-k mask over the teammate axis; ties go to the lower
    teammate index. Treated as a constant in backward passes."""
    b, m = alpha.shape
    if not 1 <= budget <= m:
        raise ValueError(f"budget {budget} out of range for {m} teammates")
    # Stable sort on negated scores keeps lower indices first among ties.
    order = np.argsort(-alpha, axis=-1, kind="stable")
    mask = np.zeros_like(alpha)
    rows = np.repeat(np.arange(b), budget)
    mask[rows, order[:, :budget].reshape(-1)] = 1.0
    return mask


def assemble_q_loc(q_base: Tensor, incoming: list[Tensor], link_col: np.ndarray) -> Tensor:
    """q_loc = q_base + sum of incoming messages gated by their link bits
    (Q-bias aggregation). Gates are constants, so gradients flow only
    through selected messages."""
    out = q_base
    for msg, gate in zip(incoming, link_col.T):
        if msg.shape[-1] != q_base.shape[-1]:
            raise ShapeError("assemble_q_loc", msg.shape, q_base.shape)
        out = out + msg * gate[:, None]
    return out


def comm_round(
    params: AgentParams,
    spec: EnvSpec,
    schedule: CommSchedule,
    comm_state: CommState,
    obs: list[Tensor],
    h_prev: list[Tensor],
    t: int,
    noise: np.ndarray | None,
    zero_messages: bool = False,
) -> tuple[CommRoundResult, list[Tensor], CommState]:
    """One full communication round for all agents at step t.

    obs and h_prev hold one (B, dim) tensor per agent. noise is a
    (B, n, n, d_dem) array indexed [batch, receiver, sender]; None means
    deterministic demands (parser means).
    """
    n = spec.n_agents
    batch = obs[0].shape[0]
    pairs = [(i, j) for i in range(n) for j in teammates(n, i)]
    blocks = [slice(k * batch, (k + 1) * batch) for k in range(max(n, len(pairs)))]

    # Shared-parameter trunk over all agents at once, rows grouped
    # agent-major; per-agent views are slices of the stacked results.
    feat_all = extract(params, concat(obs, axis=0), spec.entity_shape)
    h_all = history(params, feat_all, concat(h_prev, axis=0))
    tiny_all = gen_tiny(params, h_all)
    hs = [h_all[blocks[i]] for i in range(n)]
    fresh = [tiny_all[blocks[i]] for i in range(n)]
    comm_state, visible = broadcast_tiny(schedule, comm_state, t, fresh)

    # Demand parsing for every ordered pair in one stacked pass. The parser
    # sees the sender's visible tiny; only the reparameterization noise
    # distinguishes receivers of the same sender.
    vis_pairs = concat([visible[j] for _, j in pairs], axis=0)
    if noise is not None:
        eps = np.concatenate([noise[:, i, j] for i, j in pairs])
    else:
        eps = np.zeros((len(pairs) * batch, params.d_dem))
    gp_all, d_all = parse_demand(params, vis_pairs, eps)
    demand: dict[tuple[int, int], Tensor] = {}
    demand_params: dict[tuple[int, int], GaussianParams] = {}
    for k, (i, j) in enumerate(pairs):
        demand_params[(i, j)] = GaussianParams(
            mean=gp_all.mean[blocks[k]], log_var=gp_all.log_var[blocks[k]]
        )
        demand[(i, j)] = d_all[blocks[k]]

    # Relevance scores: bilinear form between each receiver's history and
    # each parsed demand, then softmax per receiver over its teammates.
    # Receiver-major pair order makes each receiver's block contiguous.
    q_all = matmul(h_all, params.w_q)
    k_all = matmul(d_all, params.w_k)
    q_exp = concat([q_all[blocks[i]] for i, _ in pairs], axis=0)
    scores = params.temperature * tsum(q_exp * k_all, axis=-1, keepdims=True)
    score_rows = swapaxes(reshape(scores, (n, n - 1, batch)), 1, 2)
    alpha_all = softmax(score_rows, axis=-1)
    alpha = [alpha_all[i] for i in range(n)]

    budget = schedule.budget
    link = np.zeros((batch, n, n))
    for i in range(n):
        mask = prune(alpha[i].data, budget)
        for col, j in enumerate(teammates(n, i)):
            link[:, i, j] = mask[:, col]
    sent = link.sum(axis=2)
    if (sent > budget).any():
        raise RuntimeError(f"bandwidth budget violated: {sent.max()} > {budget}")

    # Q-bias messages for every ordered pair, one stacked pass.
    h_exp = concat([h_all[blocks[i]] for i, _ in pairs], axis=0)
    m_all = params.msg_gen(concat([h_exp, d_all], axis=-1))
    if zero_messages:
        m_all = m_all * 0.0
    message: dict[tuple[int, int], Tensor] = {
        (i, j): m_all[blocks[k]] for k, (i, j) in enumerate(pairs)
    }

    q_base_all = params.q_head(h_all)
    q_base = [q_base_all[blocks[i]] for i in range(n)]
    q_loc = []
    for i in range(n):
        senders = teammates(n, i)
        incoming = [message[(j, i)] for j in senders]
        q_loc.append(assemble_q_loc(q_base[i], incoming, link[:, senders, i]))

    result = CommRoundResult(
        tiny=visible,
        demand=demand,
        demand_params=demand_params,
        message=message,
        alpha=alpha,
        link=link,
        q_base=q_base,
        q_loc=q_loc,
        demand_params_stacked=gp_all,
    )
    return result, hs, comm_state


def select_action(q_values: np.ndarray, available: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over available actions; greedy ties go to the lowest
    index; unavailable actions are never chosen."""
    available = np.asarray(available, dtype=bool)
    legal = np.flatnonzero(available)
    if legal.size == 0:
        raise ValueError("no available action")
    if rng.random() < epsilon:
        return int(legal[rng.integers(legal.size)])
    masked = np.where(available, q_values, -np.inf)
    return int(np.argmax(masked))


def trace_row(result: CommRoundResult, t: int) -> dict:
    """Single-environment (B = 1) JSON-friendly trace of one round."""
    n = len(result.q_base)
    return {
        "t": t,
        "tiny": [r.data[0].tolist() for r in result.tiny],
        "alpha": [a.data[0].tolist() for a in result.alpha],
        "links": result.link[0].astype(int).tolist(),
        "message_norms": [
            [0.0 if i == j else float(np.linalg.norm(result.message[(i, j)].data[0])) for j in range(n)]
            for i in range(n)
        ],
        "q_loc": [q.data[0].tolist() for q in result.q_loc],
    }
