"""Neural building blocks composed from tensor ops."""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError, DimensionError, NumericError
from .params import ParamSet, init_layer_norm, init_linear
from .tensor import Tensor, gelu, matmul, reshape, softmax, transpose

LN_EPS = 1e-5


def linear(x: Tensor, params: ParamSet, name: str) -> Tensor:
    out = matmul(x, params[f"{name}.weight"])
    bias = params.get(f"{name}.bias")
    return out if bias is None else out + bias


def mlp2(x: Tensor, params: ParamSet, name: str) -> Tensor:
    """affine -> GELU -> affine, registered as ``name.0`` and ``name.1``."""
    return linear(gelu(linear(x, params, f"{name}.0")), params, f"{name}.1")


def init_mlp2(params: ParamSet, name: str, dims: tuple[int, int, int], rng: np.random.Generator) -> None:
    init_linear(params, f"{name}.0", dims[0], dims[1], rng)
    init_linear(params, f"{name}.1", dims[1], dims[2], rng)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LN_EPS) -> Tensor:
    """Normalize each row to zero mean and unit (biased) variance, then scale and shift."""
    if x.shape[-1] < 1:
        raise DimensionError("layer_norm needs at least one feature")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        gx = gb = gg = None
        if x.requires_grad:
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        if gain.requires_grad:
            gg = (g * xhat).sum(axis=lead)
        if bias.requires_grad:
            gb = g.sum(axis=lead)
        return gx, gg, gb

    return Tensor._result(out, (x, gain, bias), backward, "layer_norm")


def norm(x: Tensor, params: ParamSet, name: str) -> Tensor:
    return layer_norm(x, params[f"{name}.gain"], params[f"{name}.bias"])


def init_attention(params: ParamSet, name: str, dim: int, rng: np.random.Generator) -> None:
    # no key bias: it shifts every logit of a query equally and cancels in softmax
    init_linear(params, f"{name}.q", dim, dim, rng)
    init_linear(params, f"{name}.k", dim, dim, rng, bias=False)
    init_linear(params, f"{name}.v", dim, dim, rng)
    init_linear(params, f"{name}.o", dim, dim, rng)


def multi_head_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    params: ParamSet,
    key_mask=None,
    return_weights: bool = False,
):
    """Scaled dot-product attention over ``heads`` column groups.

    ``params`` holds ``q``, ``k``, ``v`` and ``o`` projections. Keys whose
    ``key_mask`` entry is false get weight exactly zero. Raises
    :class:`NumericError` when every key is masked.
    """
    lq, d = q.shape
    lk = k.shape[0]
    if d % heads:
        raise ArgumentError(f"model width {d} is not divisible by {heads} heads")
    if k.shape[1] != d or v.shape != k.shape:
        raise DimensionError(f"attention operand widths differ: q{q.shape} k{k.shape} v{v.shape}")
    if key_mask is not None:
        key_mask = np.asarray(key_mask, dtype=bool)
        if key_mask.shape != (lk,):
            raise DimensionError(f"key mask shape {key_mask.shape} != ({lk},)")
        if not key_mask.any():
            raise NumericError("all attention keys are masked")
    dh = d // heads

    def split(t: Tensor, n: int) -> Tensor:
        return transpose(reshape(t, (n, heads, dh)), (1, 0, 2))

    qh = split(linear(q, params, "q"), lq)
    kh = split(linear(k, params, "k"), lk)
    vh = split(linear(v, params, "v"), lk)
    scores = matmul(qh, transpose(kh, (0, 2, 1))) * (1.0 / np.sqrt(dh))
    weights = softmax(scores, axis=-1, mask=None if key_mask is None else key_mask[None, None, :])
    ctx = reshape(transpose(matmul(weights, vh), (1, 0, 2)), (lq, d))
    out = linear(ctx, params, "o")
    if return_weights:
        return out, weights.data
    return out


def init_feedforward(params: ParamSet, name: str, dim: int, expansion: int, rng: np.random.Generator) -> None:
    init_layer_norm(params, f"{name}.norm", dim)
    init_mlp2(params, f"{name}.mlp", (dim, expansion * dim, dim), rng)
