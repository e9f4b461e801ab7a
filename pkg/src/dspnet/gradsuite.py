"""Finite-difference gradient checks over every differentiable stage of the pipeline.

Each case builds a small random instance (all dimensions at most 8) and
returns a scalar function together with the tensors it is differentiated
with respect to. Intermediate outputs are reduced with a fixed random
projection so that every output element contributes to the checked scalar.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .advp import advp, init_advp_params
from .config import RunConfig
from .geometry import CameraView, back_project
from .heads import TargetLabels, fusion_head, init_head_params, soft_ranked_ce
from .mcgr import McgrState, init_mcgr_params, mcgr_forward, mcgr_layer
from .model import forward, init_params
from .scenegen.render import render_depth
from .scenegen.scene import generate_scene, look_at
from .tensorcore import ParamSet, Tensor, grad_check, tsum
from .tgmf import fuse_views, global_pool_text, global_pool_views, init_tgmf_params, view_logits

TINY = 8
DEFAULT_TOLERANCE = 1e-5


@dataclass
class GradCase:
    name: str
    fn: Callable[..., Tensor]
    inputs: list[Tensor]


def _projected(out: Tensor, rng: np.random.Generator) -> Callable[[Tensor], Tensor]:
    r = Tensor(rng.normal(size=out.shape))
    return lambda y: tsum(y * r)


def _leaf(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _with_params(params: ParamSet, extra: list[Tensor]) -> list[Tensor]:
    return extra + [params[k] for k in params]


def tiny_views(rng: np.random.Generator, m: int = 3, size: int = 6, n_points: int = TINY
               ) -> tuple[np.ndarray, list[CameraView]]:
    """Points in front of ``m`` cameras plus the cameras, with rendered depth."""
    points = rng.uniform(-0.6, 0.6, size=(n_points, 3))
    views = []
    for j in range(m):
        angle = 2 * np.pi * j / m
        eye = np.array([3 * np.cos(angle), 3 * np.sin(angle), 1.0])
        view = CameraView(size, size, size / 2, size / 2, look_at(eye, np.zeros(3)), size, size)
        views.append(view.with_maps(depth_map=render_depth(points, view)))
    return points, views


def tgmf_case(seed: int) -> GradCase:
    rng = np.random.default_rng(seed)
    # 3x3 images keep the pooled-logit path well above finite-difference noise;
    # four points are each seen by about two views on average
    d_i, d_m, d_k, m, size = 4, 6, 3, 3, 3
    points, views = tiny_views(rng, m, size, n_points=4)
    params = ParamSet()
    init_tgmf_params(params, d_i, d_m, d_k, rng)
    maps = _leaf(rng, m, size, size, d_i)
    z_t = _leaf(rng, 5, d_m)
    mask = np.array([True, True, True, False, True])
    scope = params.scope("tgmf")

    def run(maps, z_t, *_):
        bp = back_project(points, views, feature_maps=maps)
        h_s = view_logits(global_pool_views(maps), global_pool_text(z_t, mask), scope)
        return fuse_views(bp, h_s)[0]

    reduce = _projected(run(maps, z_t), rng)
    return GradCase("tgmf", lambda *xs: reduce(run(*xs)), _with_params(params, [maps, z_t]))


def advp_case(seed: int) -> GradCase:
    rng = np.random.default_rng(seed)
    d_i, d_p, d_m, n = 3, 4, 5, 6
    params = ParamSet()
    init_advp_params(params, d_i, d_p, d_m, rng)
    z_i, z_p = _leaf(rng, n, d_i), _leaf(rng, n, d_p)
    scope = params.scope("advp")

    def run(z_i, z_p, *_):
        return advp(z_i, z_p, scope)

    reduce = _projected(run(z_i, z_p), rng)
    return GradCase("advp", lambda *xs: reduce(run(*xs)), _with_params(params, [z_i, z_p]))


def _mcgr_inputs(rng: np.random.Generator, d_m: int, n_p: int, l_t: int):
    z_v = _leaf(rng, n_p, d_m)
    z_t = _leaf(rng, l_t, d_m)
    coords = rng.uniform(-1, 1, size=(n_p, 3))
    mask = np.ones(l_t, dtype=bool)
    mask[-1] = False
    return z_v, z_t, coords, mask


def mcgr_layer_case(seed: int) -> GradCase:
    rng = np.random.default_rng(seed)
    d_m, n_p, k, l_t = 8, 8, 4, 5
    params = ParamSet()
    init_mcgr_params(params, d_m, 1, rng)
    z_v, z_t, _, mask = _mcgr_inputs(rng, d_m, n_p, l_t)
    e_c = _leaf(rng, k, d_m)
    scope = params.scope("mcgr.layers.0")

    def run(z_v, e_c, z_t, *_):
        e_c2, e_t2 = mcgr_layer(McgrState(z_v, e_c, z_t, mask), scope, heads=2)
        return e_c2, e_t2

    rc = _projected(run(z_v, e_c, z_t)[0], rng)
    rt = _projected(run(z_v, e_c, z_t)[1], rng)

    def f(*xs):
        e_c2, e_t2 = run(*xs)
        return rc(e_c2) + rt(e_t2)

    layer_params = ParamSet({k: params[k] for k in params if k.startswith("mcgr.layers.0.")})
    return GradCase("mcgr_layer", f, _with_params(layer_params, [z_v, e_c, z_t]))


def mcgr_stack_case(seed: int) -> GradCase:
    rng = np.random.default_rng(seed)
    d_m, n_p, k, l_t = 4, 8, 4, 5
    params = ParamSet()
    init_mcgr_params(params, d_m, 2, rng)
    z_v, z_t, coords, mask = _mcgr_inputs(rng, d_m, n_p, l_t)
    scope = params.scope("mcgr")

    def run(z_v, z_t, *_):
        out = mcgr_forward(z_v, coords, z_t, mask, scope, k, heads=2)
        return out.e_c, out.e_t

    rc = _projected(run(z_v, z_t)[0], rng)
    rt = _projected(run(z_v, z_t)[1], rng)

    def f(*xs):
        e_c, e_t = run(*xs)
        return rc(e_c) + rt(e_t)

    return GradCase("mcgr_stack", f, _with_params(params, [z_v, z_t]))


def fusion_head_case(seed: int) -> GradCase:
    rng = np.random.default_rng(seed)
    d_m, k, l_t, n_a, n_cls = 6, 4, 5, 7, 4
    params = ParamSet()
    init_head_params(params, d_m, n_a, n_cls, rng)
    e_t, e_c = _leaf(rng, l_t, d_m), _leaf(rng, k, d_m)
    mask = np.array([True, True, False, True, True])
    scope = params.scope("head")
    r = [Tensor(rng.normal(size=n)) for n in (n_a, n_cls, k)]

    def f(e_t, e_c, *_):
        out = fusion_head(e_t, e_c, mask, scope)
        return tsum(out.answer_logits * r[0]) + tsum(out.class_logits * r[1]) + tsum(out.loc_logits * r[2])

    return GradCase("fusion_head", f, _with_params(params, [e_t, e_c]))


def soft_ranked_ce_case(seed: int) -> GradCase:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, TINY + 1))
    logits = _leaf(rng, n)
    y = rng.random(n) < 0.4
    y[int(rng.integers(n))] = True
    if y.all():
        y[0] = False
    return GradCase("soft_ranked_ce", lambda x: soft_ranked_ce(x, y), [logits])


def tiny_config(**changes) -> RunConfig:
    base = dict(d_i=4, d_p=4, d_m=4, d_k=4, n_p=8, k=4, m=3, layers=2, heads=2, height=8, width=8,
                n_points=24, max_tokens=8, n_classes=4, n_colors=4, max_count=2, max_objects=4,
                min_objects=2, questions_per_scene=1)
    base.update(changes)
    return RunConfig(**base)


def vqa_loss_case(seed: int) -> GradCase:
    config = tiny_config(seed=seed, data_seed=seed)
    params = init_params(config)
    sample = generate_scene(seed, config)
    # non-trivial localization targets so every loss term has gradient
    sample.reference_centers = np.asarray(sample.points[:2, :3])

    def f(*_):
        return forward(params, sample, config).losses.total

    return GradCase("vqa_loss", f, [params[k] for k in params])


CASES = {
    "tgmf": tgmf_case,
    "advp": advp_case,
    "mcgr_layer": mcgr_layer_case,
    "mcgr_stack": mcgr_stack_case,
    "fusion_head": fusion_head_case,
    "soft_ranked_ce": soft_ranked_ce_case,
    "vqa_loss": vqa_loss_case,
}


def run_suite(seeds=range(10), cases=None, eps: float = 1e-5, tolerance: float = DEFAULT_TOLERANCE) -> dict:
    """Max relative error per case and seed, plus overall pass flag and timing."""
    start = time.perf_counter()
    results = []
    for name in cases or CASES:
        for seed in seeds:
            case = CASES[name](int(seed))
            err = grad_check(case.fn, case.inputs, eps)
            results.append({"case": name, "seed": int(seed), "max_rel_error": err, "pass": err <= tolerance})
    return {
        "tolerance": tolerance,
        "eps": eps,
        "results": results,
        "worst": max((r["max_rel_error"] for r in results), default=0.0),
        "pass": all(r["pass"] for r in results),
        "seconds": time.perf_counter() - start,
    }
