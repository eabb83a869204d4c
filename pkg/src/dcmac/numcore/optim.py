"""Adam with bias correction, plus global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dcmac.numcore.tensor import Tensor


class GradientError(RuntimeError):
    """Raised when a parameter's gradient is missing or not finite."""


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def init(named_params: list[tuple[str, Tensor]], lr: float = 5e-4) -> "AdamState":
        state = AdamState(lr=lr)
        for name, p in named_params:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(state: AdamState, named_params: list[tuple[str, Tensor]]) -> None:
    """Apply one Adam update in place. Every listed parameter must carry a
    finite gradient buffer (zeros count); a missing or non-finite gradient
    aborts with the parameter's name."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for name, p in named_params:
        g = p.grad
        if g is None:
            raise GradientError(f"{name}: no gradient buffer (call zero_grad and backward first)")
        if not np.all(np.isfinite(g)):
            raise GradientError(f"{name}: non-finite gradient")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def global_norm_clip(named_params: list[tuple[str, Tensor]], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is at most
    max_norm. Returns the pre-clip norm."""
    total = 0.0
    for _, p in named_params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for _, p in named_params:
            if p.grad is not None:
                p.grad *= scale
    return norm
