"""Forward and backward passes for every layer kind in the network.

Convolution runs through an im2col + matmul fast path; a naive
nested-loop implementation (:func:`conv_forward_naive`) is kept as the
correctness reference. Each ``*_forward`` returns ``(output, cache)``
and the matching ``*_backward`` consumes that cache exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DamageNetError, ShapeError
from .tensor import Tensor

# im2col buffers above this size are built in batch chunks to bound memory.
_COL_BYTES_CAP = 256 * 1024 * 1024


def output_shape(input_size: int, window: int, stride: int, padding: int = 0,
                 layer: str = "") -> int:
    """Spatial output extent of a windowed layer.

    Computes (input - window + 2*padding) / stride + 1 and insists the
    division is exact and the result positive, so misconfigured layers
    fail loudly instead of silently truncating.
    """
    where = f" in layer {layer!r}" if layer else ""
    if input_size < 1 or window < 1 or stride < 1 or padding < 0:
        raise ShapeError(
            f"invalid window geometry (input={input_size}, window={window}, "
            f"stride={stride}, padding={padding}){where}"
        )
    span = input_size - window + 2 * padding
    if span < 0 or span % stride != 0:
        raise ShapeError(
            f"window {window}/stride {stride}/padding {padding} does not tile "
            f"input of size {input_size}{where}"
        )
    out = span // stride + 1
    if out < 1:
        raise ShapeError(f"output extent {out} is not positive{where}")
    return out


@dataclass
class ConvSpec:
    """3x3, stride-1, zero-padded convolution parameters."""

    in_channels: int
    out_channels: int
    weights: Tensor  # [out_channels, in_channels, kernel, kernel]
    bias: Tensor     # [out_channels]
    kernel: int = 3
    stride: int = 1
    padding: int = 1

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("channel counts must be positive")
        expected_w = (self.out_channels, self.in_channels, self.kernel, self.kernel)
        if self.weights.shape != expected_w:
            raise ShapeError(f"conv weights shape {self.weights.shape}, expected {expected_w}")
        if self.bias.shape != (self.out_channels,):
            raise ShapeError(f"conv bias shape {self.bias.shape}, expected ({self.out_channels},)")


@dataclass
class PoolSpec:
    """Non-overlapping max pooling window; max is the only supported mode."""

    window: int = 2
    stride: int = 2
    mode: str = "max"

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ShapeError("pool window and stride must be positive")
        if self.window != self.stride:
            raise ShapeError("only non-overlapping pooling (window == stride) is supported")
        if self.mode != "max":
            raise ShapeError(f"unsupported pooling mode {self.mode!r}")


@dataclass
class DenseSpec:
    in_features: int
    out_features: int
    weights: Tensor  # [in_features, out_features]
    bias: Tensor     # [out_features]

    def __post_init__(self):
        if self.in_features < 1 or self.out_features < 1:
            raise ShapeError("feature counts must be positive")
        if self.weights.shape != (self.in_features, self.out_features):
            raise ShapeError(
                f"dense weights shape {self.weights.shape}, "
                f"expected ({self.in_features}, {self.out_features})"
            )
        if self.bias.shape != (self.out_features,):
            raise ShapeError(f"dense bias shape {self.bias.shape}, expected ({self.out_features},)")


@dataclass
class DropoutSpec:
    rate: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ShapeError(f"dropout rate must be in [0, 1), got {self.rate}")


@dataclass
class ConvCache:
    x: Tensor
    out_height: int
    out_width: int


@dataclass
class PoolCache:
    in_shape: tuple
    argmax: np.ndarray  # [N, C, OH, OW], winner index inside the flattened window


@dataclass
class ReluCache:
    positive: np.ndarray  # boolean mask of inputs > 0


@dataclass
class DenseCache:
    x: Tensor


@dataclass
class DropoutCache:
    mask: Optional[np.ndarray]  # None in inference mode
    scale: float = 1.0


def _im2col(xd: np.ndarray, kernel: int, stride: int, padding: int,
            out_h: int, out_w: int) -> np.ndarray:
    """Rearrange conv windows into columns: [N, C*kernel*kernel, OH*OW].

    The fill order makes the result contiguous without any transpose, so
    the convolution reduces to one batched matmul against the filter
    matrix.
    """
    n, c, _, _ = xd.shape
    if padding > 0:
        xd = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((n, c, kernel, kernel, out_h, out_w), dtype=xd.dtype)
    for ky in range(kernel):
        y_end = ky + stride * out_h
        for kx in range(kernel):
            x_end = kx + stride * out_w
            cols[:, :, ky, kx, :, :] = xd[:, :, ky:y_end:stride, kx:x_end:stride]
    return cols.reshape(n, c * kernel * kernel, out_h * out_w)


def _col2im(cols: np.ndarray, x_shape: tuple, kernel: int, stride: int, padding: int,
            out_h: int, out_w: int) -> np.ndarray:
    """Scatter-add columns back into an input-shaped array (im2col adjoint)."""
    n, c, h, w = x_shape
    cols = cols.reshape(n, c, kernel, kernel, out_h, out_w)
    padded = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    for ky in range(kernel):
        y_end = ky + stride * out_h
        for kx in range(kernel):
            x_end = kx + stride * out_w
            padded[:, :, ky:y_end:stride, kx:x_end:stride] += cols[:, :, ky, kx, :, :]
    if padding > 0:
        return padded[:, :, padding:padding + h, padding:padding + w]
    return padded


def _conv_geometry(x: Tensor, spec: ConvSpec) -> tuple:
    if x.data.ndim != 4:
        raise ShapeError(f"conv input must be rank 4 [N,C,H,W], got {x.shape}")
    n, c, h, w = x.shape
    if c != spec.in_channels:
        raise ShapeError(f"conv expects {spec.in_channels} input channels, got {c}")
    out_h = output_shape(h, spec.kernel, spec.stride, spec.padding, layer="conv")
    out_w = output_shape(w, spec.kernel, spec.stride, spec.padding, layer="conv")
    return n, c, h, w, out_h, out_w


def conv_forward(x: Tensor, spec: ConvSpec) -> tuple[Tensor, ConvCache]:
    """Windowed dot products plus bias, zero padding outside the borders."""
    n, c, h, w, out_h, out_w = _conv_geometry(x, spec)
    k = spec.kernel
    w_mat = spec.weights.data.reshape(spec.out_channels, c * k * k)

    bytes_per_sample = out_h * out_w * c * k * k * x.data.itemsize
    chunk = max(1, min(n, _COL_BYTES_CAP // max(1, bytes_per_sample)))

    out = np.empty((n, spec.out_channels, out_h, out_w), dtype=x.data.dtype)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        cols = _im2col(x.data[start:stop], k, spec.stride, spec.padding, out_h, out_w)
        prod = w_mat @ cols  # [chunk, out_channels, OH*OW]
        out[start:stop] = prod.reshape(stop - start, spec.out_channels, out_h, out_w)
    out += spec.bias.data[None, :, None, None]
    return Tensor(out), ConvCache(x=x, out_height=out_h, out_width=out_w)


def conv_backward(grad_out: Tensor, cache: ConvCache,
                  spec: ConvSpec) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients of the loss w.r.t. conv input, weights, and bias."""
    n, c, h, w, out_h, out_w = _conv_geometry(cache.x, spec)
    expected = (n, spec.out_channels, out_h, out_w)
    if grad_out.shape != expected:
        raise ShapeError(f"conv grad_out shape {grad_out.shape}, expected {expected}")
    k = spec.kernel
    w_mat = spec.weights.data.reshape(spec.out_channels, c * k * k)

    # Columns are recomputed instead of cached: the full-resolution buffers
    # would dominate memory, and frozen-conv training never reaches here.
    cols = _im2col(cache.x.data, k, spec.stride, spec.padding, out_h, out_w)
    g = grad_out.data.reshape(n, spec.out_channels, out_h * out_w)

    grad_w = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(spec.weights.shape)
    grad_b = g.sum(axis=(0, 2))
    grad_cols = np.matmul(w_mat.T, g)
    grad_x = _col2im(grad_cols, (n, c, h, w), k, spec.stride, spec.padding, out_h, out_w)
    return Tensor(grad_x), Tensor(grad_w), Tensor(grad_b)


def conv_forward_naive(x: Tensor, spec: ConvSpec) -> Tensor:
    """Reference convolution: explicit nested loops, float64 accumulation.

    Slow by design; used to validate the im2col fast path.
    """
    n, c, h, w, out_h, out_w = _conv_geometry(x, spec)
    k, s, p = spec.kernel, spec.stride, spec.padding
    xd = x.data.astype(np.float64)
    if p > 0:
        xd = np.pad(xd, ((0, 0), (0, 0), (p, p), (p, p)))
    wd = spec.weights.data.astype(np.float64)
    bd = spec.bias.data.astype(np.float64)
    out = np.zeros((n, spec.out_channels, out_h, out_w), dtype=np.float64)
    for i in range(n):
        for oc in range(spec.out_channels):
            for oh in range(out_h):
                for ow in range(out_w):
                    acc = 0.0
                    for ic in range(c):
                        for ky in range(k):
                            for kx in range(k):
                                acc += xd[i, ic, oh * s + ky, ow * s + kx] * wd[oc, ic, ky, kx]
                    out[i, oc, oh, ow] = acc + bd[oc]
    return Tensor(out)


def maxpool_forward(x: Tensor, spec: PoolSpec) -> tuple[Tensor, PoolCache]:
    """Window-wise maximum; the cache records which element won each window."""
    if x.data.ndim != 4:
        raise ShapeError(f"pool input must be rank 4 [N,C,H,W], got {x.shape}")
    n, c, h, w = x.shape
    win = spec.window
    out_h = output_shape(h, win, spec.stride, 0, layer="maxpool")
    out_w = output_shape(w, win, spec.stride, 0, layer="maxpool")
    windows = (
        x.data.reshape(n, c, out_h, win, out_w, win)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, out_h, out_w, win * win)
    )
    # np.argmax returns the first maximum, so ties resolve to the earliest
    # element in row-major scan order of the window.
    argmax = np.argmax(windows, axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return Tensor(out), PoolCache(in_shape=(n, c, h, w), argmax=argmax)


def maxpool_backward(grad_out: Tensor, cache: PoolCache, spec: PoolSpec) -> Tensor:
    """Route each upstream gradient to its recorded argmax position."""
    if grad_out.shape != cache.argmax.shape:
        raise ShapeError(
            f"pool grad_out shape {grad_out.shape}, expected {cache.argmax.shape}"
        )
    n, c, h, w = cache.in_shape
    win = spec.window
    out_h, out_w = cache.argmax.shape[2], cache.argmax.shape[3]
    dy, dx = cache.argmax // win, cache.argmax % win
    ni = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]
    ohi = np.arange(out_h)[None, None, :, None]
    owi = np.arange(out_w)[None, None, None, :]
    grad_in = np.zeros((n, c, h, w), dtype=grad_out.data.dtype)
    grad_in[ni, ci, ohi * win + dy, owi * win + dx] = grad_out.data
    return Tensor(grad_in)


def relu_forward(x: Tensor) -> tuple[Tensor, ReluCache]:
    return Tensor(np.maximum(x.data, 0)), ReluCache(positive=x.data > 0)


def relu_backward(grad_out: Tensor, cache: ReluCache) -> Tensor:
    if grad_out.shape != cache.positive.shape:
        raise ShapeError(
            f"relu grad_out shape {grad_out.shape}, expected {cache.positive.shape}"
        )
    return Tensor(np.where(cache.positive, grad_out.data, 0))


def dense_forward(x: Tensor, spec: DenseSpec) -> tuple[Tensor, DenseCache]:
    """Affine map y = x W + b on a [N, in_features] batch."""
    if x.data.ndim != 2:
        raise ShapeError(f"dense input must be rank 2 [N,features], got {x.shape}")
    if x.shape[1] != spec.in_features:
        raise ShapeError(f"dense expects {spec.in_features} features, got {x.shape[1]}")
    y = x.data @ spec.weights.data + spec.bias.data
    return Tensor(y), DenseCache(x=x)


def dense_backward(grad_out: Tensor, cache: DenseCache,
                   spec: DenseSpec) -> tuple[Tensor, Tensor, Tensor]:
    n = cache.x.shape[0]
    if grad_out.shape != (n, spec.out_features):
        raise ShapeError(
            f"dense grad_out shape {grad_out.shape}, expected {(n, spec.out_features)}"
        )
    grad_x = grad_out.data @ spec.weights.data.T
    grad_w = cache.x.data.T @ grad_out.data
    grad_b = grad_out.data.sum(axis=0)
    return Tensor(grad_x), Tensor(grad_w), Tensor(grad_b)


def dropout_forward(x: Tensor, spec: DropoutSpec, mode: str = "training",
                    rng: Optional[np.random.Generator] = None) -> tuple[Tensor, DropoutCache]:
    """Inverted dropout: survivors are rescaled at training time so that
    inference mode is exactly the identity."""
    if mode == "inference":
        return x, DropoutCache(mask=None)
    if mode != "training":
        raise ValueError(f"dropout mode must be 'training' or 'inference', got {mode!r}")
    if spec.rate == 0.0:
        return x, DropoutCache(mask=np.ones(x.shape, dtype=bool), scale=1.0)
    if rng is None:
        raise ValueError("training-mode dropout needs an explicit rng")
    mask = rng.random(x.shape) >= spec.rate
    scale = 1.0 / (1.0 - spec.rate)
    return Tensor(x.data * mask * scale), DropoutCache(mask=mask, scale=scale)


def dropout_backward(grad_out: Tensor, cache: DropoutCache) -> Tensor:
    if cache.mask is None:
        raise DamageNetError("dropout cache has no mask; backward needs a training-mode forward")
    if grad_out.shape != cache.mask.shape:
        raise ShapeError(
            f"dropout grad_out shape {grad_out.shape}, expected {cache.mask.shape}"
        )
    return Tensor(grad_out.data * cache.mask * cache.scale)


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction for numerical stability."""
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax input must be rank 2 [N,classes], got {logits.shape}")
    if logits.shape[1] < 1:
        raise ShapeError("softmax needs at least one class")
    if not np.isfinite(logits.data).all():
        raise DamageNetError("softmax input contains non-finite values")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return Tensor(exps / exps.sum(axis=1, keepdims=True))
