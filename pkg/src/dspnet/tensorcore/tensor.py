"""Dense float64 tensors with a reverse-mode tape.

Every differentiable op builds a new :class:`Tensor` holding references to its
parents and a closure mapping the output gradient to parent gradients.
``Tensor.backward`` walks the graph in a fixed depth-first post-order, so
gradient accumulation order (and therefore every bit of the result) depends
only on the order in which the graph was built.

Broadcasting follows numpy for elementwise ops; gradients are summed back to
the operand shape.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import DimensionError, NumericError, ShapeError

DTYPE = np.float64

_Backward = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """Row-major real array with an optional gradient.

    Leaves created with ``requires_grad=True`` accumulate into ``.grad`` on
    every ``backward`` call; intermediate results never store gradients.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=DTYPE)
        if np.isnan(arr).any():
            raise NumericError("tensor data contains NaN")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: _Backward | None = None
        self._op = "leaf"

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _result(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: _Backward, op: str,
                check: bool = True) -> "Tensor":
        # a finite sum implies every element is finite, so the full scan is rarely needed;
        # pure rearrangements of finite inputs pass check=False
        if check and not np.isfinite(np.add.reduce(data, axis=None)) and not np.isfinite(data).all():
            raise NumericError(f"{op} produced non-finite values")
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out._op = op
        out.requires_grad = False
        for p in parents:
            if p.requires_grad:
                out.requires_grad = True
                break
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- array protocol -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # -- operators ------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only defined by a constant")
        return mul(self, 1.0 / np.asarray(other, dtype=DTYPE))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    # -- reverse mode ---------------------------------------------------------

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Propagate d(self)/d(leaf) into every reachable ``requires_grad`` leaf."""
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            return
        seed = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=DTYPE).reshape(self.shape)

        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): seed}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in reversed(node._parents):
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape:
        return
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from exc


# -- elementwise ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return Tensor._result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return Tensor._result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return Tensor._result(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        ),
        "mul",
    )


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    return Tensor._result(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    if (x.data <= 0).any():
        raise NumericError("log of a non-positive value")
    return Tensor._result(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def sigmoid(x: Tensor) -> Tensor:
    z = x.data
    # two-branch form keeps exp() argument non-positive
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return Tensor._result(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x: Tensor) -> Tensor:
    """Tanh-approximated GELU, a smooth rectifier."""
    z = x.data
    z2 = z * z
    inner = _GELU_C * z * (1.0 + 0.044715 * z2)
    t = np.tanh(inner)
    out = 0.5 * z * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * z2)
        return (g * (0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * dinner),)

    return Tensor._result(out, (x,), backward, "gelu")


# -- linear algebra & shape ----------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner extents differ ({a.shape} x {b.shape})")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"matmul: batch extents differ ({a.shape} x {b.shape})") from exc

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._result(out, (a, b), backward, "matmul")


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    return Tensor._result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, np.argsort(axes)),),
                          "transpose", check=False)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {x.shape} to {tuple(shape)}") from exc
    return Tensor._result(out, (x,), lambda g: (g.reshape(x.shape),), "reshape", check=False)


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = np.broadcast_to(x.data, tuple(shape)).copy()
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast {x.shape} to {tuple(shape)}") from exc
    return Tensor._result(out, (x,), lambda g: (_unbroadcast(g, x.shape),), "broadcast_to", check=False)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor._result(np.asarray(out, dtype=DTYPE), (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        count = int(np.prod([x.shape[a] for a in axes]))
    return tsum(x, axis=axis, keepdims=keepdims) * (1.0 / count)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._result(out, tensors, backward, "concat", check=False)


def getitem(x: Tensor, index) -> Tensor:
    out = np.array(x.data[index], dtype=DTYPE)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return Tensor._result(out, (x,), backward, "getitem", check=False)


def gather(table: Tensor, index, mask=None) -> Tensor:
    """Rows of ``table`` at integer ``index`` (any shape); rows where ``mask`` is
    false are zero and receive no gradient."""
    index = np.asarray(index, dtype=np.int64)
    n = table.shape[0]
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != index.shape:
            raise DimensionError(f"gather mask shape {mask.shape} != index shape {index.shape}")
    used = index if mask is None else index[mask]
    if used.size and (used.min() < 0 or used.max() >= n):
        raise DimensionError(f"gather index out of range for table of {n} rows")
    if mask is not None:
        safe = np.where(mask, index, 0)
        out = table.data[safe]
        out[~mask] = 0.0
    else:
        safe = index
        out = table.data[safe]
    row_shape = table.shape[1:]

    def backward(g):
        flat_idx = safe.reshape(-1)
        flat_g = g.reshape((-1,) + row_shape)
        if mask is not None:
            keep = mask.reshape(-1)
            flat_idx = flat_idx[keep]
            flat_g = flat_g[keep]
        full = np.zeros_like(table.data)
        np.add.at(full, flat_idx, flat_g)
        return (full,)

    return Tensor._result(out, (table,), backward, "gather", check=False)


# -- reductions with masking ----------------------------------------------------


def _effective_mask(x: np.ndarray, mask, op: str) -> np.ndarray:
    if np.isnan(x).any() or np.isposinf(x).any():
        raise NumericError(f"{op}: input contains NaN or +inf")
    valid = ~np.isneginf(x)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        try:
            valid = valid & np.broadcast_to(mask, x.shape)
        except ValueError as exc:
            raise DimensionError(f"{op}: mask shape {mask.shape} vs input {x.shape}") from exc
    return valid


def softmax(x: Tensor, axis: int = -1, mask=None) -> Tensor:
    """Softmax with max-subtraction.

    Entries that are ``-inf`` or where ``mask`` is false get weight zero; a slice
    with no admissible entry yields all zeros.
    """
    valid = _effective_mask(x.data, mask, "softmax")
    safe = np.where(valid, x.data, -np.inf)
    m = np.max(safe, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.where(valid, np.exp(np.where(valid, x.data, 0.0) - m), 0.0)
    s = np.sum(e, axis=axis, keepdims=True)
    out = e / np.where(s > 0, s, 1.0)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor._result(out, (x,), backward, "softmax")


def logsumexp(x: Tensor, axis=None, mask=None) -> Tensor:
    """log(sum(exp(x))) over admissible entries; every reduced slice needs one."""
    valid = _effective_mask(x.data, mask, "logsumexp")
    if not valid.any(axis=axis).all():
        raise NumericError("logsumexp over an empty set")
    safe = np.where(valid, x.data, -np.inf)
    m = np.max(safe, axis=axis, keepdims=True)
    e = np.where(valid, np.exp(np.where(valid, x.data, 0.0) - m), 0.0)
    s = np.sum(e, axis=axis, keepdims=True)
    out = np.log(s) + m
    weights = e / s
    if axis is None:
        out = out.reshape(())
    else:
        out = np.squeeze(out, axis=axis)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (g * weights,)

    return Tensor._result(out, (x,), backward, "logsumexp")


def stack_sum(tensors: Iterable[Tensor]) -> Tensor:
    """Left-to-right sum; the fixed order keeps batch reductions deterministic."""
    total = None
    for t in tensors:
        total = t if total is None else add(total, t)
    if total is None:
        return Tensor(0.0)
    return total
