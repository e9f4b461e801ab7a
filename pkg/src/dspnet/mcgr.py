"""Multimodal context-guided reasoning.

Sparse candidates, picked from the dense point features by farthest point
sampling, repeatedly (1) cross-attend to the fixed dense context and (2) run a
joint pre-norm transformer sub-layer with the text tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError
from .geometry import fps
from .tensorcore import ParamSet, Tensor, concat, gather, multi_head_attention
from .tensorcore.nn import init_attention, init_feedforward, init_mlp2, mlp2, norm
from .tensorcore.params import init_layer_norm

FFN_EXPANSION = 4


def default_heads(d_m: int) -> int:
    return max(1, d_m // 32)


def init_mcgr_params(params: ParamSet, d_m: int, layers: int, rng: np.random.Generator, prefix: str = "mcgr") -> None:
    if layers < 1:
        raise DimensionError("MCGR needs at least one layer")
    init_mlp2(params, f"{prefix}.pos_v", (3, d_m, d_m), rng)
    init_mlp2(params, f"{prefix}.pos_c", (3, d_m, d_m), rng)
    for i in range(layers):
        layer = f"{prefix}.layers.{i}"
        init_layer_norm(params, f"{layer}.cross_norm", d_m)
        init_attention(params, f"{layer}.cross", d_m, rng)
        init_layer_norm(params, f"{layer}.self_norm", d_m)
        init_attention(params, f"{layer}.self", d_m, rng)
        init_feedforward(params, f"{layer}.ffn", d_m, FFN_EXPANSION, rng)


def layer_count(params: ParamSet) -> int:
    n = 0
    while params.has_scope(f"layers.{n}"):
        n += 1
    return n


@dataclass
class McgrState:
    e_v: Tensor  # (N_p, D_m), read-only across layers
    e_c: Tensor  # (K, D_m)
    e_t: Tensor  # (L_t, D_m)
    token_mask: np.ndarray  # (L_t,)


@dataclass
class McgrOutput:
    e_c: Tensor
    e_t: Tensor
    e_v: Tensor
    candidates: np.ndarray  # indices into the dense rows, selection order
    coords_c: np.ndarray


def position_embed(z: Tensor, coords, params: ParamSet, name: str) -> Tensor:
    """``Z + MLP(coords)``."""
    xyz = coords if isinstance(coords, Tensor) else Tensor(coords)
    if xyz.shape != (z.shape[0], 3):
        raise DimensionError(f"coords shape {xyz.shape} does not match {z.shape[0]} rows")
    return z + mlp2(xyz, params, name)


def sample_candidates(z_v: Tensor, coords, k: int, start: int = 0) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """FPS on ``coords``; returns ``(Z_c, coords_c, indices)`` in selection order."""
    xyz = coords.data if isinstance(coords, Tensor) else np.asarray(coords, dtype=np.float64)
    idx = fps(xyz, k, start)
    return gather(z_v, idx), xyz[idx], idx


def mcgr_layer(state: McgrState, params: ParamSet, heads: int, cross_attention: bool = True) -> tuple[Tensor, Tensor]:
    """One reasoning layer; returns the updated ``(E_c, E_t)``."""
    mask = np.asarray(state.token_mask, dtype=bool)
    if not mask.any():
        raise NumericError("all text tokens are masked")
    e_c = state.e_c
    if cross_attention:
        q = norm(e_c, params, "cross_norm")
        e_c = e_c + multi_head_attention(q, state.e_v, state.e_v, heads, params.scope("cross"))
    k = e_c.shape[0]
    seq = concat([e_c, state.e_t], axis=0)
    key_mask = np.concatenate([np.ones(k, dtype=bool), mask])
    x = norm(seq, params, "self_norm")
    seq = seq + multi_head_attention(x, x, x, heads, params.scope("self"), key_mask=key_mask)
    seq = seq + mlp2(norm(seq, params, "ffn.norm"), params, "ffn.mlp")
    return seq[:k], seq[k:]


def mcgr_forward(
    z_v: Tensor,
    coords,
    z_t: Tensor,
    token_mask,
    params: ParamSet,
    k: int,
    start: int = 0,
    heads: int | None = None,
    cross_attention: bool = True,
) -> McgrOutput:
    """Position-embed dense and candidate features, then run every layer."""
    layers = layer_count(params)
    if layers < 1:
        raise DimensionError("MCGR parameters contain no layers")
    if z_t.shape[1] != z_v.shape[1]:
        raise DimensionError(f"text width {z_t.shape[1]} != visual width {z_v.shape[1]}")
    heads = heads or default_heads(z_v.shape[1])
    xyz = coords.data if isinstance(coords, Tensor) else np.asarray(coords, dtype=np.float64)
    z_c, coords_c, idx = sample_candidates(z_v, xyz, k, start)
    e_v = position_embed(z_v, xyz, params, "pos_v")
    e_c = position_embed(z_c, coords_c, params, "pos_c")
    state = McgrState(e_v, e_c, z_t, np.asarray(token_mask, dtype=bool))
    for i in range(layers):
        state.e_c, state.e_t = mcgr_layer(state, params.scope(f"layers.{i}"), heads, cross_attention)
    return McgrOutput(state.e_c, state.e_t, e_v, idx, coords_c)
