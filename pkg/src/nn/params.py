"""Tensors and named parameter bundles for the numpy blocks."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

Tensor = NDArray[np.float64]


def as_tensor(x: ArrayLike, rank: int | None = None, name: str = "input") -> Tensor:
    """Validate and convert to a float64 array."""
    t = np.asarray(x, dtype=np.float64)
    if rank is not None and t.ndim != rank:
        raise ValueError(f"{name} must have rank {rank}, got shape {t.shape}")
    if t.size == 0 or any(d <= 0 for d in t.shape):
        raise ValueError(f"{name} dims must be positive, got shape {t.shape}")
    return t


def uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass(eq=False)
class Params(Mapping[str, Tensor]):
    """Named float64 arrays with fixed expected shapes."""

    values: dict[str, Tensor]

    def __post_init__(self) -> None:
        self.values = {k: np.asarray(v, dtype=np.float64) for k, v in self.values.items()}
        expected = self.expected_shapes()
        if expected is None:
            return
        if set(expected) != set(self.values):
            raise ValueError(
                f"{type(self).__name__}: expected parameters {sorted(expected)}, got {sorted(self.values)}"
            )
        for name, shape in expected.items():
            if self.values[name].shape != shape:
                raise ValueError(
                    f"{type(self).__name__}.{name}: expected shape {shape}, got {self.values[name].shape}"
                )

    def expected_shapes(self) -> dict[str, tuple[int, ...]] | None:
        return None

    def __getitem__(self, name: str) -> Tensor:
        return self.values[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def copy(self):
        return replace(self, values={k: v.copy() for k, v in self.values.items()})


def flatten_params(params: Mapping[str, Tensor]) -> Tensor:
    """Concatenate all arrays in sorted-name order into one vector."""
    return np.concatenate([np.ravel(params[name]) for name in sorted(params)]).astype(np.float64)


def unflatten_params(vector: ArrayLike, like: Mapping[str, Tensor]) -> dict[str, Tensor]:
    """Inverse of ``flatten_params`` using ``like`` for names and shapes."""
    vector = np.asarray(vector, dtype=np.float64)
    total = sum(int(np.size(like[name])) for name in like)
    if vector.ndim != 1 or vector.size != total:
        raise ValueError(f"parameter vector has {vector.size} values, expected {total}")
    out, offset = {}, 0
    for name in sorted(like):
        shape = np.shape(like[name])
        size = int(np.prod(shape))
        out[name] = vector[offset : offset + size].reshape(shape).copy()
        offset += size
    return out
