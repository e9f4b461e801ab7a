"""AdamW with decoupled weight decay and a warmup + cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import ParamSet


@dataclass
class WarmupCosine:
    """Linear ramp ``base -> peak`` over ``warmup`` steps, then cosine back to ``base``."""

    base: float
    peak: float
    warmup: int
    total: int

    def __call__(self, step: int) -> float:
        if self.warmup > 0 and step < self.warmup:
            return self.base + (self.peak - self.base) * step / self.warmup
        span = max(self.total - self.warmup, 1)
        t = min(max(step - self.warmup, 0), span) / span
        return self.base + 0.5 * (self.peak - self.base) * (1.0 + math.cos(math.pi * t))


class AdamW:
    def __init__(
        self,
        params: ParamSet,
        lr: float | Callable[[int], float] = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-5,
        lr_scale: Callable[[str], float] | None = None,
    ):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.lr_scale = lr_scale or (lambda name: 1.0)
        self.step_count = 0
        self.m = {k: np.zeros_like(params[k].data) for k in params}
        self.v = {k: np.zeros_like(params[k].data) for k in params}

    def current_lr(self) -> float:
        return self.lr(self.step_count) if callable(self.lr) else float(self.lr)

    def step(self) -> None:
        lr = self.current_lr()
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name in self.params:
            p = self.params[name]
            if p.grad is None:
                continue
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            step_lr = lr * self.lr_scale(name)
            p.data *= 1.0 - step_lr * self.weight_decay
            p.data -= step_lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
