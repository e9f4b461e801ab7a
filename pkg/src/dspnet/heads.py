"""Answer / object-class / localization heads, losses and exact-match metrics.

The answer head is a compact stand-in for a full co-attention network: both
token sequences are reduced by learned attention pooling, combined additively
and mapped to answer logits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ArgumentError, DimensionError, NumericError
from .tensorcore import ParamSet, Tensor, linear, logsumexp, matmul, reshape, softmax
from .tensorcore.params import init_linear


@dataclass
class TargetLabels:
    answer: np.ndarray  # (N_a,) bool, at least one true
    obj_class: np.ndarray  # (N_cls,) bool, may be all false
    loc: np.ndarray  # (K,) bool, may be all false

    def __post_init__(self):
        self.answer = np.asarray(self.answer, dtype=bool)
        self.obj_class = np.asarray(self.obj_class, dtype=bool)
        self.loc = np.asarray(self.loc, dtype=bool)
        if not self.answer.any():
            raise ArgumentError("answer labels need at least one positive")


@dataclass
class HeadOutputs:
    answer_logits: Tensor
    class_logits: Tensor
    loc_logits: Tensor


@dataclass
class LossTerms:
    answer: Tensor
    obj_class: Tensor
    loc: Tensor
    total: Tensor


def init_head_params(params: ParamSet, d_m: int, n_answers: int, n_classes: int, rng: np.random.Generator, prefix: str = "head") -> None:
    # pooling and localization scores carry no bias: a shared offset cancels in the softmax
    init_linear(params, f"{prefix}.pool_t", d_m, 1, rng, bias=False)
    init_linear(params, f"{prefix}.pool_c", d_m, 1, rng, bias=False)
    init_linear(params, f"{prefix}.fuse_t", d_m, d_m, rng)
    init_linear(params, f"{prefix}.fuse_c", d_m, d_m, rng)
    init_linear(params, f"{prefix}.answer", d_m, n_answers, rng)
    init_linear(params, f"{prefix}.cls", d_m, n_classes, rng)
    init_linear(params, f"{prefix}.loc", d_m, 1, rng, bias=False)


def attention_pool(x: Tensor, params: ParamSet, name: str, mask=None) -> Tensor:
    """Softmax-weighted sum of rows, shape ``(1, D)``."""
    scores = reshape(linear(x, params, name), (1, x.shape[0]))
    weights = softmax(scores, axis=1, mask=None if mask is None else np.asarray(mask, dtype=bool)[None, :])
    return matmul(weights, x)


def fusion_head(e_t: Tensor, e_c: Tensor, token_mask, params: ParamSet) -> HeadOutputs:
    if e_t.shape[1] != e_c.shape[1]:
        raise DimensionError("text and candidate widths differ")
    t_vec = attention_pool(e_t, params, "pool_t", token_mask)
    c_vec = attention_pool(e_c, params, "pool_c")
    fused = linear(t_vec, params, "fuse_t") + linear(c_vec, params, "fuse_c")
    answer = linear(fused, params, "answer")
    cls = linear(c_vec, params, "cls")
    loc = linear(e_c, params, "loc")
    return HeadOutputs(
        reshape(answer, (answer.shape[1],)),
        reshape(cls, (cls.shape[1],)),
        reshape(loc, (e_c.shape[0],)),
    )


def soft_ranked_ce(logits: Tensor, y) -> Tensor:
    """``-log(sum_i y_i softmax(logits)_i)``; zero with no gradient when ``y`` is
    all false (sample without a usable label)."""
    y = np.asarray(y, dtype=bool)
    if logits.ndim != 1 or logits.shape[0] < 1:
        raise DimensionError(f"expected non-empty 1-D logits, got {logits.shape}")
    if y.shape != logits.shape:
        raise DimensionError(f"label shape {y.shape} != logits shape {logits.shape}")
    if np.isnan(logits.data).any():
        raise NumericError("NaN logits")
    if not y.any():
        return Tensor(0.0)
    return logsumexp(logits) - logsumexp(logits, mask=y)


def loss_terms(outputs: HeadOutputs, targets: TargetLabels, lambda1: float = 1.0, lambda2: float = 1.0) -> LossTerms:
    ans = soft_ranked_ce(outputs.answer_logits, targets.answer)
    cls = soft_ranked_ce(outputs.class_logits, targets.obj_class)
    loc = soft_ranked_ce(outputs.loc_logits, targets.loc)
    total = ans
    if lambda1 != 0:
        total = total + cls * lambda1
    if lambda2 != 0:
        total = total + loc * lambda2
    return LossTerms(ans, cls, loc, total)


def vqa_loss(outputs: HeadOutputs, targets: TargetLabels, lambda1: float = 1.0, lambda2: float = 1.0) -> Tensor:
    """``L_ans + lambda1 * L_cls + lambda2 * L_loc``."""
    return loss_terms(outputs, targets, lambda1, lambda2).total


def ranking(logits) -> np.ndarray:
    """Indices by descending logit, lower index first among ties."""
    values = logits.data if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
    return np.lexsort((np.arange(len(values)), -values))


def em_at_k(answer_logits, gold: Iterable[int], k: int) -> bool:
    gold = set(int(g) for g in gold)
    if not gold:
        raise ArgumentError("gold answer set is empty")
    order = ranking(answer_logits)
    if not 1 <= k <= len(order):
        raise ArgumentError(f"k={k} outside [1, {len(order)}]")
    return bool(gold.intersection(order[:k].tolist()))
