"""Network assembly, whole-network forward/backward, and freeze control.

The damage classifier is the canonical 16-layer VGG architecture: five
convolutional blocks (2, 2, 3, 3, 3 convolutions of 64/128/256/512/512
filters, each block closed by 2x2 max pooling), then a flatten and a
trainable dense head 25088 -> 512 -> 256 -> 4 with dropout 0.5 after the
two hidden dense layers and a softmax over the four damage classes.

In transfer mode the convolutional parameters are frozen feature
extractors (imported from a pretrained archive) and only the dense head
receives gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np

from . import layers as L
from .errors import ShapeError
from .tensor import Tensor

NUM_CLASSES = 4

# (block index, filters, convolutions per block)
VGG16_BLOCKS = ((1, 64, 2), (2, 128, 2), (3, 256, 3), (4, 512, 3), (5, 512, 3))


@dataclass
class ConvLayer:
    name: str
    spec: L.ConvSpec
    trainable: bool = True


@dataclass
class PoolLayer:
    spec: L.PoolSpec = field(default_factory=L.PoolSpec)


@dataclass
class ReluLayer:
    pass


@dataclass
class FlattenLayer:
    pass


@dataclass
class DenseLayer:
    name: str
    spec: L.DenseSpec
    trainable: bool = True


@dataclass
class DropoutLayer:
    spec: L.DropoutSpec


@dataclass
class SoftmaxLayer:
    pass


LayerNode = Union[ConvLayer, PoolLayer, ReluLayer, FlattenLayer,
                  DenseLayer, DropoutLayer, SoftmaxLayer]


@dataclass
class NetworkSpec:
    """Ordered layer list plus the expected input geometry (when fixed)."""

    layers: list
    input_shape: Optional[tuple] = None  # (C, H, W); None disables the check
    input_size: int = 224

    def conv_layers(self) -> list[ConvLayer]:
        return [l for l in self.layers if isinstance(l, ConvLayer)]

    def dense_layers(self) -> list[DenseLayer]:
        return [l for l in self.layers if isinstance(l, DenseLayer)]

    def dropout_layers(self) -> list[DropoutLayer]:
        return [l for l in self.layers if isinstance(l, DropoutLayer)]

    def parameters(self) -> Iterator[tuple[str, Tensor, bool]]:
        """Yield (name, tensor, trainable) for every parameter in layer order."""
        for layer in self.layers:
            if isinstance(layer, (ConvLayer, DenseLayer)):
                yield f"{layer.name}.weight", layer.spec.weights, layer.trainable
                yield f"{layer.name}.bias", layer.spec.bias, layer.trainable

    def trainable_parameters(self) -> dict[str, Tensor]:
        return {name: t for name, t, trainable in self.parameters() if trainable}

    def conv_parameter_count(self) -> int:
        return sum(l.spec.weights.size + l.spec.bias.size for l in self.conv_layers())


@dataclass
class ForwardTrace:
    """Per-layer caches plus the final class probabilities."""

    mode: str
    caches: list
    probabilities: Tensor


def build_vgg16_damage(init_seed: int, input_size: int = 224) -> NetworkSpec:
    """Build the damage-classification network for square RGB inputs.

    Convolutional parameters start at zero pending a pretrained import
    (or :func:`init_conv_parameters`). The dense head draws its weights
    from a seeded uniform distribution scaled by 1/sqrt(fan_in), with
    zero biases, so the build is fully determined by ``init_seed``.

    ``input_size`` must be a multiple of 32 (five pooling halvings); 224
    is the production resolution, smaller multiples give reduced-cost
    variants of the same architecture.
    """
    if input_size < 32 or input_size % 32 != 0:
        raise ShapeError(f"input_size must be a positive multiple of 32, got {input_size}")
    rng = np.random.default_rng(init_seed)
    nodes: list = []
    in_ch = 3
    for block, filters, count in VGG16_BLOCKS:
        for i in range(1, count + 1):
            spec = L.ConvSpec(
                in_channels=in_ch,
                out_channels=filters,
                weights=Tensor.zeros((filters, in_ch, 3, 3)),
                bias=Tensor.zeros((filters,)),
            )
            nodes.append(ConvLayer(name=f"block{block}_conv{i}", spec=spec))
            nodes.append(ReluLayer())
            in_ch = filters
        nodes.append(PoolLayer())

    nodes.append(FlattenLayer())
    flat = 512 * (input_size // 32) ** 2
    for i, (fan_in, fan_out) in enumerate([(flat, 512), (512, 256), (256, NUM_CLASSES)], start=1):
        bound = 1.0 / np.sqrt(fan_in)
        weights = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32)
        spec = L.DenseSpec(fan_in, fan_out, Tensor(weights), Tensor.zeros((fan_out,)))
        nodes.append(DenseLayer(name=f"dense{i}", spec=spec))
        if i < 3:
            nodes.append(ReluLayer())
            nodes.append(DropoutLayer(L.DropoutSpec(rate=0.5)))
    nodes.append(SoftmaxLayer())

    return NetworkSpec(layers=nodes, input_shape=(3, input_size, input_size),
                       input_size=input_size)


def init_conv_parameters(net: NetworkSpec, seed: int) -> NetworkSpec:
    """Fill conv weights from a seeded He-uniform draw (biases stay zero).

    Used when training without a pretrained archive; keeps activation
    magnitudes stable through the thirteen ReLU-coupled convolutions.
    """
    rng = np.random.default_rng(seed)
    for layer in net.conv_layers():
        spec = layer.spec
        fan_in = spec.in_channels * spec.kernel * spec.kernel
        bound = np.sqrt(6.0 / fan_in)
        values = rng.uniform(-bound, bound, size=spec.weights.shape).astype(np.float32)
        spec.weights.data[...] = values
        spec.bias.data[...] = 0.0
    return net


def set_transfer_mode(net: NetworkSpec, frozen_conv: bool) -> NetworkSpec:
    """Freeze (or unfreeze) the convolutional blocks; dense stays trainable."""
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            layer.trainable = not frozen_conv
        elif isinstance(layer, DenseLayer):
            layer.trainable = True
    return net


def forward(net: NetworkSpec, x: Tensor, mode: str = "inference",
            seed: int = 0) -> ForwardTrace:
    """Run the network end to end, keeping every layer cache for backward.

    ``seed`` drives dropout masks in training mode; identical seeds and
    inputs produce identical traces. Inference mode never consumes
    randomness.
    """
    if mode not in ("training", "inference"):
        raise ValueError(f"mode must be 'training' or 'inference', got {mode!r}")
    if x.shape[0] < 1:
        raise ShapeError("batch must contain at least one sample")
    if net.input_shape is not None and x.shape[1:] != net.input_shape:
        raise ShapeError(
            f"input shape {x.shape[1:]} does not match network input {net.input_shape}"
        )
    rng = np.random.default_rng(seed)
    caches: list = []
    h = x
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            h, cache = L.conv_forward(h, layer.spec)
        elif isinstance(layer, PoolLayer):
            h, cache = L.maxpool_forward(h, layer.spec)
        elif isinstance(layer, ReluLayer):
            h, cache = L.relu_forward(h)
        elif isinstance(layer, FlattenLayer):
            cache = h.shape
            h = h.reshape((h.shape[0], h.size // h.shape[0]))
        elif isinstance(layer, DenseLayer):
            h, cache = L.dense_forward(h, layer.spec)
        elif isinstance(layer, DropoutLayer):
            h, cache = L.dropout_forward(h, layer.spec, mode=mode, rng=rng)
        elif isinstance(layer, SoftmaxLayer):
            h = L.softmax(h)
            cache = None
        else:
            raise TypeError(f"unknown layer node {layer!r}")
        caches.append(cache)
    return ForwardTrace(mode=mode, caches=caches, probabilities=h)


def backward(net: NetworkSpec, trace: ForwardTrace, grad_logits: Tensor) -> dict[str, Tensor]:
    """Backpropagate a loss gradient injected at the logits.

    The incoming gradient must already include the softmax derivative
    (the combined softmax/cross-entropy form), so the softmax node is a
    pass-through here. Returns gradients keyed by parameter name for
    trainable layers only; propagation stops below the deepest trainable
    layer, so fully frozen convolution stacks cost nothing.
    """
    if len(trace.caches) != len(net.layers):
        raise ShapeError("trace does not match this network (cache count differs)")
    if trace.mode != "training":
        raise ValueError("backward needs a trace produced in training mode")

    trainable_idx = [i for i, l in enumerate(net.layers)
                     if isinstance(l, (ConvLayer, DenseLayer)) and l.trainable]
    grads: dict[str, Tensor] = {}
    if not trainable_idx:
        return grads
    lowest = min(trainable_idx)

    grad = grad_logits
    for i in range(len(net.layers) - 1, -1, -1):
        layer, cache = net.layers[i], trace.caches[i]
        if isinstance(layer, SoftmaxLayer):
            pass  # gradient already taken w.r.t. the logits
        elif isinstance(layer, DropoutLayer):
            grad = L.dropout_backward(grad, cache)
        elif isinstance(layer, DenseLayer):
            grad_x, grad_w, grad_b = L.dense_backward(grad, cache, layer.spec)
            if layer.trainable:
                grads[f"{layer.name}.weight"] = grad_w
                grads[f"{layer.name}.bias"] = grad_b
            grad = grad_x
        elif isinstance(layer, FlattenLayer):
            grad = grad.reshape(cache)
        elif isinstance(layer, ReluLayer):
            grad = L.relu_backward(grad, cache)
        elif isinstance(layer, PoolLayer):
            grad = L.maxpool_backward(grad, cache, layer.spec)
        elif isinstance(layer, ConvLayer):
            grad_x, grad_w, grad_b = L.conv_backward(grad, cache, layer.spec)
            if layer.trainable:
                grads[f"{layer.name}.weight"] = grad_w
                grads[f"{layer.name}.bias"] = grad_b
            grad = grad_x
        if i <= lowest:
            break
    return grads
