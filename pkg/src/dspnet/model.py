"""The full question-answering pipeline: encoder stubs, view fusion, gating,
reasoning layers and heads, with the ablation toggles of :class:`RunConfig`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .advp import advp, init_advp_params
from .config import RunConfig
from .errors import ArgumentError, ConfigError
from .geometry import assign_loc_labels, back_project
from .heads import HeadOutputs, LossTerms, TargetLabels, fusion_head, init_head_params, loss_terms
from .mcgr import init_mcgr_params, mcgr_forward
from .scenegen.encoders import encode_text, encode_views, init_encoder_params, seed_point_features, select_seed_points
from .tensorcore import ParamSet, Tensor, softmax
from .tgmf import fuse_views, global_pool_text, global_pool_views, init_tgmf_params, masked_mean_views, view_logits


@dataclass
class ForwardResult:
    outputs: HeadOutputs
    losses: LossTerms
    targets: TargetLabels
    h_s: Tensor | None  # (M,) view logits, None without TGMF
    view_valid: np.ndarray | None  # (N_p, M)
    seed_index: np.ndarray
    candidates: np.ndarray


def init_params(config: RunConfig, seed: int | None = None) -> ParamSet:
    """All trainable tensors, drawn in a fixed order from ``seed`` (default ``config.seed``)."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    params = ParamSet()
    init_encoder_params(params, config, rng, "enc")
    init_tgmf_params(params, config.d_i, config.d_m, config.d_k, rng, "tgmf")
    init_advp_params(params, config.d_i, config.d_p, config.d_m, rng, "advp")
    init_mcgr_params(params, config.d_m, config.layers, rng, "mcgr")
    init_head_params(params, config.d_m, config.n_answers, config.n_classes, rng, "head")
    return params


def check_compatible(params: ParamSet, config: RunConfig) -> None:
    """Raise ConfigError when parameter shapes disagree with ``config``."""
    expected = init_params(config, seed=0)
    if set(expected) != set(params):
        raise ConfigError("checkpoint parameter names do not match the configuration")
    for name in expected:
        if expected[name].shape != params[name].shape:
            raise ConfigError(f"{name}: checkpoint shape {params[name].shape} != configured {expected[name].shape}")


def inference_seed_index(sample, n_p: int) -> np.ndarray:
    key = ("fps", n_p)
    if key not in sample.cache:
        sample.cache[key] = select_seed_points(sample.points, n_p, training=False)
    return sample.cache[key]


def forward(params: ParamSet, sample, config: RunConfig, training: bool = False,
            rng: np.random.Generator | None = None, view_count: int | None = None) -> ForwardResult:
    """Run one sample through the network and score it against its labels.

    ``training`` switches seed-point sampling from FPS to a random subset drawn
    from ``rng``. ``view_count`` uses only the first views of the sample.
    """
    m = config.m if view_count is None else view_count
    if m > len(sample.views):
        raise ArgumentError(f"sample has {len(sample.views)} views, {m} requested")
    enc = params.scope("enc")
    z_t, token_mask = encode_text(sample.tokens, enc, config.max_tokens)

    index = None if training else inference_seed_index(sample, config.n_p)
    z_p, coords, index = seed_point_features(sample.points, config, enc, training, rng, index)

    h_s = None
    view_valid = None
    if config.images:
        views = sample.views[:m]
        feats = encode_views(sample, enc, m)
        bp = back_project(coords, views, config.depth_tol, feature_maps=feats)
        view_valid = bp.valid
        if config.tgmf:
            g_i = global_pool_views(feats)
            g_t = global_pool_text(z_t, token_mask)
            h_s = view_logits(g_i, g_t, params.scope("tgmf"))
            z_i, _ = fuse_views(bp, h_s)
        else:
            z_i, _ = masked_mean_views(bp)
    else:
        z_i = Tensor(np.zeros((config.n_p, config.d_i)))

    z_v = advp(z_i, z_p, params.scope("advp"), gated=config.advp)
    reasoned = mcgr_forward(z_v, coords, z_t, token_mask, params.scope("mcgr"), config.k,
                            heads=config.n_heads, cross_attention=config.mcgr)
    outputs = fusion_head(reasoned.e_t, reasoned.e_c, token_mask, params.scope("head"))
    loc = assign_loc_labels(reasoned.coords_c, sample.reference_centers, config.loc_radius)
    targets = TargetLabels(sample.answer_labels, sample.class_labels, loc)
    losses = loss_terms(outputs, targets, config.lambda1, config.lambda2)
    return ForwardResult(outputs, losses, targets, h_s, view_valid, index, reasoned.candidates)


def view_weights(h_s: Tensor) -> np.ndarray:
    """Global (unmasked) softmax of the view logits."""
    return softmax(h_s, axis=0).data.copy()
