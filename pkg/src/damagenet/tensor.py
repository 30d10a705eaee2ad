"""Dense row-major tensors backed by contiguous numpy storage.

All activations, weights, and gradients in this package travel as
:class:`Tensor`. Production paths run in 32-bit floats; gradient-check
tests construct 64-bit tensors through the same API. There is no
broadcasting anywhere: every shape mismatch is a hard :class:`ShapeError`.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError

DEFAULT_DTYPE = np.float32


def _validate_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) < 1:
        raise ShapeError("tensor shape needs at least one dimension")
    for extent in shape:
        if extent < 1:
            raise ShapeError(f"tensor extents must be >= 1, got shape {shape}")
    return shape


class Tensor:
    """N-dimensional array of reals, row-major, no broadcasting.

    Instances are treated as immutable by every forward/backward
    operation; only the optimizer and weight import mutate ``data`` in
    place, and they own exclusive access while doing so.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        if not isinstance(data, np.ndarray):
            raise TypeError("Tensor wraps a numpy array; use Tensor.create for raw values")
        _validate_shape(data.shape)
        self.data = np.ascontiguousarray(data)

    @classmethod
    def create(
        cls,
        shape: Sequence[int],
        fill: float | Sequence[float] = 0.0,
        dtype: np.dtype = DEFAULT_DTYPE,
    ) -> "Tensor":
        """Build a tensor of `shape` from a scalar fill or a flat value sequence."""
        shape = _validate_shape(shape)
        if np.isscalar(fill):
            return cls(np.full(shape, fill, dtype=dtype))
        values = np.asarray(fill, dtype=dtype).ravel()
        expected = int(np.prod(shape))
        if values.size != expected:
            raise ShapeError(
                f"value sequence has {values.size} elements, shape {shape} needs {expected}"
            )
        return cls(values.reshape(shape))

    @classmethod
    def zeros(cls, shape: Sequence[int], dtype: np.dtype = DEFAULT_DTYPE) -> "Tensor":
        return cls(np.zeros(_validate_shape(shape), dtype=dtype))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def at(self, *indices: int) -> float:
        """Bounds-checked element read; rejects negative or overflowing indices."""
        if len(indices) != self.data.ndim:
            raise ShapeError(
                f"need {self.data.ndim} indices for shape {self.shape}, got {len(indices)}"
            )
        for i, (idx, extent) in enumerate(zip(indices, self.shape)):
            if not 0 <= idx < extent:
                raise ShapeError(f"index {idx} out of range [0, {extent}) in dimension {i}")
        return float(self.data[indices])

    def reshape(self, new_shape: Sequence[int]) -> "Tensor":
        """Same data sequence under a new shape; element count must match."""
        new_shape = _validate_shape(new_shape)
        if int(np.prod(new_shape)) != self.size:
            raise ShapeError(
                f"cannot reshape {self.shape} ({self.size} elements) "
                f"to {new_shape} ({int(np.prod(new_shape))} elements)"
            )
        return Tensor(self.data.reshape(new_shape))

    def astype(self, dtype: np.dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype))

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def tolist(self) -> list:
        return self.data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard matrix product of two rank-2 tensors.

    The fast path delegates to numpy's BLAS-backed matmul, so the
    summation order is unspecified; 32-bit comparisons against a
    reference product should use a relative tolerance of 1e-5.
    """
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 tensors, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents disagree: {a.shape} x {b.shape}")
    return Tensor(np.matmul(a.data, b.data))


def map_elementwise(t: Tensor, f: Callable[[float], float]) -> Tensor:
    """Apply a scalar function pointwise, preserving shape and dtype."""
    out = np.vectorize(f, otypes=[t.data.dtype])(t.data)
    return Tensor(out)


def zip_elementwise(a: Tensor, b: Tensor, f: Callable[[float, float], float]) -> Tensor:
    """Combine two same-shape tensors pointwise; shape mismatch is an error."""
    if a.shape != b.shape:
        raise ShapeError(f"zip_elementwise shapes differ: {a.shape} vs {b.shape}")
    out = np.vectorize(f, otypes=[np.result_type(a.data, b.data)])(a.data, b.data)
    return Tensor(out)
