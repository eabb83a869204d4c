"""Network building blocks: affine maps, activations, a GRU cell, and
single-head self-attention with mean pooling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dcmac.numcore.tensor import Tensor, _make, as_tensor, matmul, reshape, softmax, swapaxes, tmean


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0

    def backward_fn(g):
        return (g * mask,)

    return _make(a.data * mask, (a,), backward_fn)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def backward_fn(g):
        return (g * (1.0 - data * data),)

    return _make(data, (a,), backward_fn)


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument never overflows; the two branches are
    # the standard stable split written without boolean indexing.
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0, e) / (1.0 + e)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    data = _sigmoid_np(a.data)

    def backward_fn(g):
        return (g * data * (1.0 - data),)

    return _make(data, (a,), backward_fn)


def elu(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    pos = x > 0
    # expm1 on the clamped input avoids overflow from evaluating exp on the
    # positive branch inside np.where.
    data = np.where(pos, x, np.expm1(np.minimum(x, 0.0)))

    def backward_fn(g):
        return (g * np.where(pos, 1.0, np.exp(np.minimum(x, 0.0))),)

    return _make(data, (a,), backward_fn)


@dataclass
class Linear:
    """Affine map ``x @ W + b`` with uniform fan-in initialization."""

    W: Tensor
    b: Tensor

    @staticmethod
    def init(rng: np.random.Generator, d_in: int, d_out: int) -> "Linear":
        bound = 1.0 / np.sqrt(d_in)
        W = Tensor(rng.uniform(-bound, bound, size=(d_in, d_out)), requires_grad=True)
        b = Tensor(rng.uniform(-bound, bound, size=(d_out,)), requires_grad=True)
        return Linear(W, b)

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.W) + self.b

    def named_params(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.W", self.W), (f"{prefix}.b", self.b)]


@dataclass
class GRUParams:
    """Fused-gate GRU cell weights; gate order along the last axis is
    (update z, reset r, candidate n)."""

    W_x: Tensor
    W_h: Tensor
    b: Tensor
    d_hidden: int

    @staticmethod
    def init(rng: np.random.Generator, d_in: int, d_hidden: int) -> "GRUParams":
        bound = 1.0 / np.sqrt(d_hidden)
        W_x = Tensor(rng.uniform(-bound, bound, size=(d_in, 3 * d_hidden)), requires_grad=True)
        W_h = Tensor(rng.uniform(-bound, bound, size=(d_hidden, 3 * d_hidden)), requires_grad=True)
        b = Tensor(rng.uniform(-bound, bound, size=(3 * d_hidden,)), requires_grad=True)
        return GRUParams(W_x, W_h, b, d_hidden)

    def named_params(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.W_x", self.W_x), (f"{prefix}.W_h", self.W_h), (f"{prefix}.b", self.b)]


def gru_cell(params: GRUParams, x: Tensor, h_prev: Tensor) -> Tensor:
    """One recurrence step, fused into a single graph node. Recurrent
    unrolls dominate the training graph, so the gate arithmetic runs in
    plain numpy with a hand-derived backward closure.

    z = sigmoid(x W_xz + h W_hz + b_z)
    r = sigmoid(x W_xr + h W_hr + b_r)
    n = tanh(x W_xn + b_n + r * (h W_hn))
    h' = (1 - z) * n + z * h
    """
    x, h_prev = as_tensor(x), as_tensor(h_prev)
    d = params.d_hidden
    w_x, w_h, bias = params.W_x, params.W_h, params.b
    xd, hd = x.data, h_prev.data
    gx = xd @ w_x.data + bias.data
    gh = hd @ w_h.data
    zr = _sigmoid_np(gx[..., : 2 * d] + gh[..., : 2 * d])
    z, r = zr[..., :d], zr[..., d:]
    ghn = gh[..., 2 * d :]
    n = np.tanh(gx[..., 2 * d :] + r * ghn)
    out = (1.0 - z) * n + z * hd

    def backward_fn(g):
        dz_pre = g * (hd - n) * z * (1.0 - z)
        dn_pre = g * (1.0 - z) * (1.0 - n * n)
        dr_pre = dn_pre * ghn * r * (1.0 - r)
        dgx = np.concatenate([dz_pre, dr_pre, dn_pre], axis=-1)
        dgh = np.concatenate([dz_pre, dr_pre, dn_pre * r], axis=-1)

        def need(p):
            return p.requires_grad or p.node is not None

        d_in = xd.shape[-1]
        x2 = xd.reshape(-1, d_in)
        h2 = hd.reshape(-1, d)
        dgx2 = dgx.reshape(-1, 3 * d)
        dgh2 = dgh.reshape(-1, 3 * d)
        return (
            dgx @ w_x.data.T if need(x) else None,
            dgh @ w_h.data.T + g * z if need(h_prev) else None,
            x2.T @ dgx2 if need(w_x) else None,
            h2.T @ dgh2 if need(w_h) else None,
            dgx2.sum(axis=0) if need(bias) else None,
        )

    return _make(out, (x, h_prev, w_x, w_h, bias), backward_fn)


@dataclass
class SelfAttentionParams:
    query: Linear
    key: Linear
    value: Linear
    d_out: int

    @staticmethod
    def init(rng: np.random.Generator, d_in: int, d_out: int) -> "SelfAttentionParams":
        return SelfAttentionParams(
            query=Linear.init(rng, d_in, d_out),
            key=Linear.init(rng, d_in, d_out),
            value=Linear.init(rng, d_in, d_out),
            d_out=d_out,
        )

    def named_params(self, prefix: str) -> list[tuple[str, Tensor]]:
        return (
            self.query.named_params(f"{prefix}.query")
            + self.key.named_params(f"{prefix}.key")
            + self.value.named_params(f"{prefix}.value")
        )


def self_attention(params: SelfAttentionParams, entities: Tensor) -> Tensor:
    """Single-head scaled dot-product self-attention over entity rows,
    mean-pooled to one vector per batch element.

    entities: (B, k, c) -> (B, d_out). A single row (k = 1) passes through
    as its value projection.
    """
    b, k, c = entities.shape
    if k == 1:
        # Softmax over one score is exactly 1.0, so attention reduces to the
        # value projection; query and key receive zero gradient either way.
        return params.value(reshape(entities, (b, c)))
    flat = reshape(entities, (b * k, c))
    q = reshape(params.query(flat), (b, k, params.d_out))
    kk = reshape(params.key(flat), (b, k, params.d_out))
    v = reshape(params.value(flat), (b, k, params.d_out))
    scores = matmul(q, swapaxes(kk, -1, -2)) * (1.0 / np.sqrt(params.d_out))
    attn = softmax(scores, axis=-1)
    mixed = matmul(attn, v)
    return tmean(mixed, axis=1)
