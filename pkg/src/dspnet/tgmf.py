"""Text-guided multi-view fusion.

Each view gets one importance logit from the dot product of its pooled image
feature with the pooled question feature (after two bias-free projections).
Per point, the logits are renormalized over the views that actually see the
point, and the back-projected features are averaged with those weights.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, DimensionError
from .geometry import BackProjectionResult
from .tensorcore import ParamSet, Tensor, broadcast_to, matmul, mean, mul, reshape, softmax, tsum
from .tensorcore.params import uniform_init


def init_tgmf_params(params: ParamSet, d_i: int, d_m: int, d_k: int, rng: np.random.Generator, prefix: str = "tgmf") -> None:
    if d_k < 1:
        raise ArgumentError("d_k must be at least 1")
    params.add(f"{prefix}.w_q", uniform_init(rng, (d_i, d_k), d_i))
    params.add(f"{prefix}.w_k", uniform_init(rng, (d_m, d_k), d_m))


def global_pool_views(feature_maps) -> Tensor:
    """``(M, H, W, D_i)`` -> ``(M, D_i)`` by averaging over pixels.

    Objects with their own ``pooled()`` (factorized maps) are pooled by it.
    """
    if hasattr(feature_maps, "pooled"):
        return feature_maps.pooled()
    if feature_maps.ndim != 4 or feature_maps.shape[0] < 1:
        raise DimensionError(f"expected (M, H, W, D) feature maps, got {feature_maps.shape}")
    return mean(feature_maps, axis=(1, 2))


def global_pool_text(z_t: Tensor, token_mask) -> Tensor:
    """Masked mean over tokens, shape ``(1, D_m)``."""
    mask = np.asarray(token_mask, dtype=bool)
    if mask.shape != (z_t.shape[0],):
        raise DimensionError(f"token mask shape {mask.shape} != ({z_t.shape[0]},)")
    count = int(mask.sum())
    if count == 0:
        raise ArgumentError("every token is masked")
    weights = Tensor((mask / count)[None, :])
    return matmul(weights, z_t)


def view_logits(g_i: Tensor, g_t: Tensor, params: ParamSet) -> Tensor:
    """Scaled dot products ``(G_i W_q)(G_t W_k)^T / sqrt(d_k)``, shape ``(M,)``."""
    w_q, w_k = params["w_q"], params["w_k"]
    if g_i.shape[1] != w_q.shape[0] or g_t.shape[1] != w_k.shape[0]:
        raise DimensionError("pooled features do not match projection widths")
    q = matmul(g_i, w_q)
    k = matmul(g_t, w_k)
    d_k = w_q.shape[1]
    return reshape(matmul(q, k.T), (g_i.shape[0],)) * (1.0 / np.sqrt(d_k))


def view_weights(bp: BackProjectionResult, h_s: Tensor) -> Tensor:
    """Per-point softmax of the shared view logits over that point's valid views."""
    n_p, m = bp.valid.shape
    if h_s.shape != (m,):
        raise DimensionError(f"expected {m} view logits, got shape {h_s.shape}")
    logits = broadcast_to(reshape(h_s, (1, m)), (n_p, m))
    return softmax(logits, axis=1, mask=bp.valid)


def fuse_views(bp: BackProjectionResult, h_s: Tensor) -> tuple[Tensor, np.ndarray]:
    """Weighted sum of back-projected features. Points seen by no view get a
    zero row and ``point_valid`` false.

    Computed as ``ref + sum_m s_m (U_m - ref)`` with ``ref`` the feature from the
    point's first valid view. The weights sum to one, so this is the plain
    weighted sum, but it is exact (and independent of the weights) when every
    valid view carries the same feature.
    """
    s = view_weights(bp, h_s)
    n_p, m = bp.valid.shape
    d = bp.features.shape[2]
    ref = bp.features[np.arange(n_p), np.argmax(bp.valid, axis=1)]
    diff = bp.features - reshape(ref, (n_p, 1, d))
    z_i = ref + reshape(matmul(reshape(s, (n_p, 1, m)), diff), (n_p, d))
    return z_i, bp.valid.any(axis=1)


def masked_mean_views(bp: BackProjectionResult) -> tuple[Tensor, np.ndarray]:
    """Text-agnostic baseline: plain average over each point's valid views."""
    counts = bp.valid.sum(axis=1)
    inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0)
    z_i = mul(tsum(bp.features, axis=1), Tensor(inv[:, None]))
    return z_i, counts > 0
