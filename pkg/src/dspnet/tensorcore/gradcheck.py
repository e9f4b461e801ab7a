"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def numerical_gradient(f: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-5) -> list[np.ndarray]:
    grads = []
    for x in inputs:
        g = np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f(*inputs).item()
            flat[i] = orig - eps
            down = f(*inputs).item()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def analytic_gradient(f: Callable[..., Tensor], inputs: Sequence[Tensor]) -> list[np.ndarray]:
    saved = [(x.requires_grad, x.grad) for x in inputs]
    for x in inputs:
        x.requires_grad = True
        x.grad = None
    f(*inputs).backward()
    grads = [np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in inputs]
    for x, (flag, grad) in zip(inputs, saved):
        x.requires_grad, x.grad = flag, grad
    return grads


def grad_check(f: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Largest relative error between backprop and central differences.

    ``f(*inputs)`` must return a scalar tensor. Inputs are perturbed in place
    one element at a time and restored afterwards.
    """
    analytic = analytic_gradient(f, inputs)
    numeric = numerical_gradient(f, inputs, eps)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size:
            worst = max(worst, float(relative_error(a, n).max()))
    return worst
