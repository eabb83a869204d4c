"""Diagonal Gaussians: reparameterized sampling and closed-form KL."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dcmac.numcore.tensor import Tensor, as_tensor, texp, tsum


@dataclass
class GaussianParams:
    """Mean and log-variance of a diagonal Gaussian, last axis = dimension."""

    mean: Tensor
    log_var: Tensor


def reparam_sample(p: GaussianParams, noise: np.ndarray) -> Tensor:
    """mean + exp(log_var / 2) * noise, with gradients flowing through both
    mean and log_var. With zero noise this returns the mean bit-exactly."""
    eps = as_tensor(noise)
    return p.mean + texp(0.5 * p.log_var) * eps


def gauss_kl(p: GaussianParams, q: GaussianParams) -> Tensor:
    """KL(p || q) between diagonal Gaussians, summed over the last axis.

    0.5 * sum(lv_q - lv_p + exp(lv_p - lv_q) + (m_p - m_q)^2 * exp(-lv_q) - 1)

    Identical distributions give exactly zero.
    """
    diff = p.mean - q.mean
    ratio = texp(p.log_var - q.log_var)
    maha = diff * diff * texp(-1.0 * q.log_var)
    per_dim = q.log_var - p.log_var + ratio + maha - 1.0
    return 0.5 * tsum(per_dim, axis=-1)
