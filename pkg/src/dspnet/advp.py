"""Adaptive dual-vision perception: per-point, per-channel sigmoid gating of the
concatenated image and point features, followed by a projection to D_m."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .tensorcore import ParamSet, Tensor, concat, linear, mlp2, sigmoid
from .tensorcore.nn import init_mlp2
from .tensorcore.params import init_linear


def init_advp_params(params: ParamSet, d_i: int, d_p: int, d_m: int, rng: np.random.Generator, prefix: str = "advp") -> None:
    d_c = d_i + d_p
    init_mlp2(params, f"{prefix}.gate", (d_c, d_c, d_c), rng)
    init_linear(params, f"{prefix}.out", d_c, d_m, rng)


def gate_values(z_i: Tensor, z_p: Tensor, params: ParamSet) -> tuple[Tensor, Tensor]:
    """Returns ``(gates, c)`` with ``c = [Z_i, Z_p]``."""
    if z_i.shape[0] != z_p.shape[0]:
        raise DimensionError(f"row counts differ: {z_i.shape[0]} vs {z_p.shape[0]}")
    c = concat([z_i, z_p], axis=1)
    return sigmoid(mlp2(c, params, "gate")), c


def advp_gate(z_i: Tensor, z_p: Tensor, params: ParamSet, gated: bool = True) -> Tensor:
    """``Z_h = sigmoid(MLP(c)) * c``. With ``gated=False`` the gates are pinned
    to one and ``Z_h = c`` (plain concatenation)."""
    if not gated:
        if z_i.shape[0] != z_p.shape[0]:
            raise DimensionError(f"row counts differ: {z_i.shape[0]} vs {z_p.shape[0]}")
        return concat([z_i, z_p], axis=1)
    gates, c = gate_values(z_i, z_p, params)
    return gates * c


def advp_project(z_h: Tensor, params: ParamSet) -> Tensor:
    if z_h.shape[1] != params["out.weight"].shape[0]:
        raise DimensionError(f"expected {params['out.weight'].shape[0]} columns, got {z_h.shape[1]}")
    return linear(z_h, params, "out")


def advp(z_i: Tensor, z_p: Tensor, params: ParamSet, gated: bool = True) -> Tensor:
    return advp_project(advp_gate(z_i, z_p, params, gated), params)
