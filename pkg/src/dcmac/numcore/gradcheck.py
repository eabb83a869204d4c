"""Central-difference verification of autodiff gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from dcmac.numcore.optim import GradientError
from dcmac.numcore.tensor import Tensor, backward, no_grad, zero_grad


@dataclass
class GradCheckReport:
    loss: float
    max_error: float
    per_param: dict[str, float]

    def ok(self, tolerance: float = 1e-4) -> bool:
        return self.max_error < tolerance


def grad_check(
    scalar_fn: Callable[[], Tensor],
    named_params: list[tuple[str, Tensor]],
    eps: float = 1e-6,
) -> GradCheckReport:
    """Compare autodiff gradients of ``scalar_fn()`` against central
    differences over every coordinate of the given parameters.

    ``scalar_fn`` must rebuild its graph on each call and be deterministic
    (fix any sampling noise outside). Relative error uses a
    max(1, |analytic|) denominator. Parameters that are intentionally
    detached from the loss should not be listed.
    """
    zero_grad([p for _, p in named_params])
    loss = scalar_fn()
    loss_val = float(loss.data)
    if not np.isfinite(loss_val):
        raise GradientError("grad_check: loss is not finite")
    backward(loss)
    analytic = {name: np.array(p.grad, copy=True) for name, p in named_params}

    per_param: dict[str, float] = {}
    with no_grad():
        for name, p in named_params:
            worst = 0.0
            flat = p.data.reshape(-1)
            a_flat = analytic[name].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = float(scalar_fn().data)
                flat[i] = orig - eps
                f_minus = float(scalar_fn().data)
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2.0 * eps)
                rel = abs(a_flat[i] - numeric) / max(1.0, abs(a_flat[i]))
                worst = max(worst, rel)
            per_param[name] = worst
    return GradCheckReport(loss=loss_val, max_error=max(per_param.values()), per_param=per_param)
