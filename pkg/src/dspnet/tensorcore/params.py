"""Named parameter collections and seeded initialization."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from ..errors import ArgumentError
from .tensor import Tensor


class ParamSet(Mapping[str, Tensor]):
    """Ordered map from dotted name to trainable tensor.

    Iteration is lexicographic by name. ``scope`` returns a view whose entries
    are the *same* tensor objects, so gradients land in the parent set.
    """

    def __init__(self, entries: Mapping[str, Tensor] | None = None):
        self._entries: dict[str, Tensor] = {}
        self._scopes: dict[str, ParamSet] = {}
        for name, t in (entries or {}).items():
            self.add(name, t)

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._entries:
            raise ArgumentError(f"duplicate parameter name {name!r}")
        tensor.requires_grad = True
        self._entries[name] = tensor
        self._scopes.clear()
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._entries[name]
        except KeyError:
            raise KeyError(f"no parameter named {name!r}") from None

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def scope(self, prefix: str) -> "ParamSet":
        if prefix not in self._scopes:
            lead = prefix.rstrip(".") + "."
            view = ParamSet()
            view._entries = {k[len(lead):]: v for k, v in self._entries.items() if k.startswith(lead)}
            self._scopes[prefix] = view
        return self._scopes[prefix]

    def has_scope(self, prefix: str) -> bool:
        lead = prefix.rstrip(".") + "."
        return any(k.startswith(lead) for k in self._entries)

    def zero_grad(self) -> None:
        for t in self._entries.values():
            t.grad = None

    def count(self) -> int:
        return int(sum(t.size for t in self._entries.values()))

    def state(self) -> dict[str, np.ndarray]:
        return {k: self._entries[k].data.copy() for k in self}

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        missing = set(self._entries) ^ set(state)
        if missing:
            raise ArgumentError(f"parameter names differ: {sorted(missing)}")
        for k, arr in state.items():
            if arr.shape != self._entries[k].shape:
                raise ArgumentError(f"shape of {k!r} differs: {arr.shape} vs {self._entries[k].shape}")
            self._entries[k].data = np.array(arr, dtype=np.float64)


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> Tensor:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_linear(params: ParamSet, name: str, fan_in: int, fan_out: int, rng: np.random.Generator, bias: bool = True) -> None:
    """Register ``name.weight`` (fan_in x fan_out) and optionally ``name.bias``."""
    params.add(f"{name}.weight", uniform_init(rng, (fan_in, fan_out), fan_in))
    if bias:
        params.add(f"{name}.bias", uniform_init(rng, (fan_out,), fan_in))


def init_layer_norm(params: ParamSet, name: str, dim: int) -> None:
    params.add(f"{name}.gain", Tensor(np.ones(dim), requires_grad=True))
    params.add(f"{name}.bias", Tensor(np.zeros(dim), requires_grad=True))
