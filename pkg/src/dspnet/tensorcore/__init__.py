"""Minimal float64 tensor algebra with reverse-mode differentiation."""

from .gradcheck import grad_check, numerical_gradient, relative_error
from .nn import layer_norm, linear, mlp2, multi_head_attention
from .optim import AdamW, WarmupCosine
from .params import ParamSet, init_linear, uniform_init
from .tensor import (
    Tensor,
    add,
    as_tensor,
    broadcast_to,
    concat,
    exp,
    gather,
    gelu,
    log,
    logsumexp,
    matmul,
    mean,
    mul,
    reshape,
    sigmoid,
    softmax,
    stack_sum,
    sub,
    transpose,
    tsum,
)

__all__ = [
    "AdamW",
    "ParamSet",
    "Tensor",
    "WarmupCosine",
    "add",
    "as_tensor",
    "broadcast_to",
    "concat",
    "exp",
    "gather",
    "gelu",
    "grad_check",
    "init_linear",
    "layer_norm",
    "linear",
    "log",
    "logsumexp",
    "matmul",
    "mean",
    "mlp2",
    "mul",
    "multi_head_attention",
    "numerical_gradient",
    "relative_error",
    "reshape",
    "sigmoid",
    "softmax",
    "stack_sum",
    "sub",
    "transpose",
    "tsum",
    "uniform_init",
]
