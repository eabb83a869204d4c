"""Dense float64 tensors with reverse-mode autodiff, plus the network blocks built on them."""

from dcmac.numcore.tensor import (
    Tensor,
    ShapeError,
    no_grad,
    grad_enabled,
    backward,
    zero_grad,
    stop_gradient,
    concat,
    softmax,
)
from dcmac.numcore.layers import (
    Linear,
    gru_cell,
    GRUParams,
    SelfAttentionParams,
    self_attention,
    elu,
    relu,
    tanh,
    sigmoid,
)
from dcmac.numcore.gaussian import GaussianParams, gauss_kl, reparam_sample
from dcmac.numcore.optim import AdamState, adam_step, GradientError, global_norm_clip
from dcmac.numcore.gradcheck import grad_check

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "grad_enabled",
    "backward",
    "zero_grad",
    "stop_gradient",
    "concat",
    "softmax",
    "Linear",
    "gru_cell",
    "GRUParams",
    "SelfAttentionParams",
    "self_attention",
    "elu",
    "relu",
    "tanh",
    "sigmoid",
    "GaussianParams",
    "gauss_kl",
    "reparam_sample",
    "AdamState",
    "adam_step",
    "GradientError",
    "global_norm_clip",
    "grad_check",
]
