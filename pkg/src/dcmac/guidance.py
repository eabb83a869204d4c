"""Training-side networks: the joint-observation guidance policy, the
global demand and demand-inference modules, and the monotone mixing
network. None of these run during decentralized execution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dcmac.agentnet import LOG_VAR_MAX, LOG_VAR_MIN
from dcmac.numcore.gaussian import GaussianParams
from dcmac.numcore.layers import GRUParams, Linear, SelfAttentionParams, elu, gru_cell, relu, self_attention
from dcmac.numcore.tensor import Tensor, ShapeError, clip, concat, reshape, tabs, tsum


@dataclass
class GuidanceParams:
    """Per-agent encoder (same architecture as the behavior network,
    separate weights) plus a joint head over all hidden states and the
    agent id."""

    extractor: SelfAttentionParams
    gru: GRUParams
    head1: Linear
    head2: Linear
    n_agents: int
    d_hidden: int
    n_actions: int

    @staticmethod
    def init(
        rng: np.random.Generator,
        entity_cols: int,
        n_agents: int,
        n_actions: int,
        d_hidden: int = 64,
    ) -> "GuidanceParams":
        return GuidanceParams(
            extractor=SelfAttentionParams.init(rng, entity_cols, d_hidden),
            gru=GRUParams.init(rng, d_hidden, d_hidden),
            head1=Linear.init(rng, n_agents * d_hidden + n_agents, d_hidden),
            head2=Linear.init(rng, d_hidden, n_actions),
            n_agents=n_agents,
            d_hidden=d_hidden,
            n_actions=n_actions,
        )

    def named_params(self, prefix: str = "guidance") -> list[tuple[str, Tensor]]:
        out = self.extractor.named_params(f"{prefix}.extractor")
        out += self.gru.named_params(f"{prefix}.gru")
        out += self.head1.named_params(f"{prefix}.head1")
        out += self.head2.named_params(f"{prefix}.head2")
        return out


def guidance_encode(params: GuidanceParams, obs: Tensor, h_prev: Tensor, entity_shape: tuple[int, int]) -> Tensor:
    """One encoder step: entity attention over the observation, then GRU."""
    rows, cols = entity_shape
    if obs.shape[-1] != rows * cols:
        raise ShapeError("guidance_encode", obs.shape, entity_shape)
    feat = self_attention(params.extractor, reshape(obs, (obs.shape[0], rows, cols)))
    return gru_cell(params.gru, feat, h_prev)


def guidance_q(params: GuidanceParams, hidden: list[Tensor], agent: int) -> Tensor:
    """Q-values of agent i under full observability: the joint head reads
    every agent's hidden state plus the agent-id one-hot."""
    if len(hidden) != params.n_agents:
        raise ShapeError("guidance_q", (len(hidden),), (params.n_agents,))
    if not 0 <= agent < params.n_agents:
        raise ValueError(f"agent index {agent} out of range")
    batch = hidden[0].shape[0]
    one_hot = np.zeros((batch, params.n_agents))
    one_hot[:, agent] = 1.0
    joint = concat(hidden + [Tensor(one_hot)], axis=-1)
    return params.head2(relu(params.head1(joint)))


@dataclass
class GlobalDemandParams:
    """Oracle demand of agent j from its true hidden state."""

    net: Linear
    d_dem: int

    @staticmethod
    def init(rng: np.random.Generator, d_hidden: int, d_dem: int = 16) -> "GlobalDemandParams":
        return GlobalDemandParams(net=Linear.init(rng, d_hidden, 2 * d_dem), d_dem=d_dem)

    def named_params(self, prefix: str = "global_demand") -> list[tuple[str, Tensor]]:
        return self.net.named_params(f"{prefix}.net")


def global_demand(params: GlobalDemandParams, h_j: Tensor) -> GaussianParams:
    raw = params.net(h_j)
    return GaussianParams(
        mean=raw[..., : params.d_dem],
        log_var=clip(raw[..., params.d_dem :], LOG_VAR_MIN, LOG_VAR_MAX),
    )


@dataclass
class DemandInferParams:
    """Refined demand of agent j from its hidden state and chosen action."""

    net: Linear
    d_dem: int
    n_actions: int

    @staticmethod
    def init(rng: np.random.Generator, d_hidden: int, n_actions: int, d_dem: int = 16) -> "DemandInferParams":
        return DemandInferParams(
            net=Linear.init(rng, d_hidden + n_actions, 2 * d_dem),
            d_dem=d_dem,
            n_actions=n_actions,
        )

    def named_params(self, prefix: str = "demand_infer") -> list[tuple[str, Tensor]]:
        return self.net.named_params(f"{prefix}.net")


def demand_infer(params: DemandInferParams, h_j: Tensor, actions: np.ndarray) -> GaussianParams:
    """actions: integer array (B,) of agent j's actions, one-hot encoded
    into the conditioning block."""
    actions = np.asarray(actions)
    if actions.min() < 0 or actions.max() >= params.n_actions:
        raise ValueError(f"action index out of range: {actions}")
    batch = h_j.shape[0]
    one_hot = np.zeros((batch, params.n_actions))
    one_hot[np.arange(batch), actions] = 1.0
    raw = params.net(concat([h_j, Tensor(one_hot)], axis=-1))
    return GaussianParams(
        mean=raw[..., : params.d_dem],
        log_var=clip(raw[..., params.d_dem :], LOG_VAR_MIN, LOG_VAR_MAX),
    )


@dataclass
class MixerParams:
    """State-conditioned monotone mixer: absolute-valued hypernetwork
    weights guarantee dQ_tot/dq_i >= 0."""

    hyper_w1: Linear
    hyper_b1: Linear
    hyper_w2: Linear
    hyper_b2: Linear
    n_agents: int
    d_mix: int

    @staticmethod
    def init(rng: np.random.Generator, state_dim: int, n_agents: int, d_mix: int = 32) -> "MixerParams":
        return MixerParams(
            hyper_w1=Linear.init(rng, state_dim, n_agents * d_mix),
            hyper_b1=Linear.init(rng, state_dim, d_mix),
            hyper_w2=Linear.init(rng, state_dim, d_mix),
            hyper_b2=Linear.init(rng, state_dim, 1),
            n_agents=n_agents,
            d_mix=d_mix,
        )

    def named_params(self, prefix: str) -> list[tuple[str, Tensor]]:
        out = self.hyper_w1.named_params(f"{prefix}.hyper_w1")
        out += self.hyper_b1.named_params(f"{prefix}.hyper_b1")
        out += self.hyper_w2.named_params(f"{prefix}.hyper_w2")
        out += self.hyper_b2.named_params(f"{prefix}.hyper_b2")
        return out


def qmix_mix(mixer: MixerParams, qs: Tensor, state: Tensor) -> Tensor:
    """Mix per-agent chosen-action Qs (B, n) into Q_tot (B,):
    Q_tot = |w2(s)| . elu(|W1(s)| q + b1(s)) + b2(s)."""
    if qs.shape[-1] != mixer.n_agents:
        raise ShapeError("qmix_mix", qs.shape, (mixer.n_agents,))
    batch = qs.shape[0]
    w1 = reshape(tabs(mixer.hyper_w1(state)), (batch, mixer.n_agents, mixer.d_mix))
    b1 = mixer.hyper_b1(state)
    hidden = elu(tsum(reshape(qs, (batch, mixer.n_agents, 1)) * w1, axis=1) + b1)
    w2 = tabs(mixer.hyper_w2(state))
    b2 = mixer.hyper_b2(state)
    return tsum(w2 * hidden, axis=-1) + b2[:, 0]
