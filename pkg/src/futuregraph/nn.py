"""Parameter containers and initialisers shared by the model modules."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .autodiff import Tensor

Params = dict[str, Tensor]


def weight(rng: np.random.Generator, fan_in: int, fan_out: int, name: str) -> Tensor:
    return Tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), (fan_in, fan_out)), requires_grad=True, name=name)


def zeros(shape, name: str) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def ones(shape, name: str) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True, name=name)


def prefixed(params: Params, prefix: str) -> Params:
    """View of the entries under ``prefix.`` with the prefix stripped."""
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def with_prefix(params: Params, prefix: str) -> Params:
    return {f"{prefix}.{k}": v for k, v in params.items()}


def trainable(params: Params) -> list[Tensor]:
    return [p for p in params.values() if p.requires_grad]


def snapshot(params: Params) -> dict[str, np.ndarray]:
    return {k: v.data.copy() for k, v in params.items()}


def restore(params: Params, values: dict[str, np.ndarray]) -> None:
    for k, v in values.items():
        params[k].data = v.copy()


def zero_all(params: Params, names: Iterable[str] | None = None) -> None:
    for k, v in params.items():
        if names is None or k in names:
            v.data = np.zeros_like(v.data)
