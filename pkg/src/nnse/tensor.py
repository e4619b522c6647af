"""Shaped tensors of 64-bit reals, stored flat in row-major order."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


@dataclass(frozen=True)
class TensorShape:
    """Dimensions of a tensor, e.g. (28, 28, 1) for height x width x channels."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.dims) == 0:
            raise ShapeMismatchError("shape must have at least one dimension")
        if any(not isinstance(d, int) or d < 1 for d in self.dims):
            raise ShapeMismatchError(f"all dimensions must be positive integers, got {self.dims}")

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def count(self) -> int:
        return math.prod(self.dims)

    def __iter__(self):
        return iter(self.dims)

    def __str__(self) -> str:
        return "x".join(str(d) for d in self.dims)


def shape_of(dims) -> TensorShape:
    """Coerce a dim sequence (or TensorShape) into a TensorShape."""
    if isinstance(dims, TensorShape):
        return dims
    return TensorShape(tuple(int(d) for d in dims))


class Tensor:
    """A shaped, row-major array of float64 values.

    ``data`` is always a flat, contiguous float64 array; ``nd`` gives a
    reshaped view for numerical work.
    """

    __slots__ = ("shape", "data")

    def __init__(self, shape, data):
        self.shape = shape_of(shape)
        arr = np.asarray(data, dtype=np.float64).reshape(-1)
        if arr.size != self.shape.count:
            raise ShapeMismatchError(
                f"tensor data has {arr.size} values, shape {self.shape} needs {self.shape.count}")
        self.data = arr

    @classmethod
    def from_nd(cls, arr) -> Tensor:
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape if arr.ndim > 0 else (1,), arr.reshape(-1))

    @classmethod
    def zeros(cls, shape) -> Tensor:
        shape = shape_of(shape)
        return cls(shape, np.zeros(shape.count))

    @property
    def nd(self) -> np.ndarray:
        return self.data.reshape(self.shape.dims)

    def copy(self) -> Tensor:
        return Tensor(self.shape, self.data.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={self.data!r})"
