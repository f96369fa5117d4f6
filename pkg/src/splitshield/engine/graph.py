"""Chain-topology CNN graph: forward inference, split execution, gradients.

Models are immutable after construction (weight arrays are frozen), so every
operation here is a pure function and safe to call from parallel workers.
All arithmetic is float64. A model is a plain chain: layer j feeds layer
j+1 and nothing else. Split indices m count layers in the device-side
prefix, so m = 0 means "send the raw input" and m = n means "run everything
locally".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ..errors import NonFiniteError, ShapeError
from . import backend

Shape = tuple[int, ...]


def as_tensor(data) -> np.ndarray:
    """Coerce to a C-contiguous float64 array."""
    return np.ascontiguousarray(data, dtype=np.float64)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = as_tensor(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Conv:
    """2-D convolution. weight (c_out, c_in, k, k), bias (c_out,)."""

    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0
    kind: ClassVar[str] = "conv"

    def __post_init__(self):
        object.__setattr__(self, "weight", _frozen(self.weight))
        object.__setattr__(self, "bias", _frozen(self.bias))
        if self.weight.ndim != 4 or self.weight.shape[2] != self.weight.shape[3]:
            raise ShapeError(f"conv weight must be (c_out, c_in, k, k), got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"conv bias shape {self.bias.shape} does not match "
                             f"c_out={self.weight.shape[0]}")
        if self.stride < 1 or self.padding < 0:
            raise ShapeError("conv stride must be >= 1 and padding >= 0")


@dataclass(frozen=True, eq=False)
class ReLU:
    kind: ClassVar[str] = "relu"


@dataclass(frozen=True, eq=False)
class MaxPool:
    """Non-overlapping max pool; stride equals the kernel size."""

    kernel: int
    kind: ClassVar[str] = "maxpool"

    def __post_init__(self):
        if self.kernel < 1:
            raise ShapeError("maxpool kernel must be >= 1")


@dataclass(frozen=True, eq=False)
class Flatten:
    kind: ClassVar[str] = "flatten"


@dataclass(frozen=True, eq=False)
class FullyConnected:
    """Dense layer. weight (out_features, in_features), bias (out_features,)."""

    weight: np.ndarray
    bias: np.ndarray
    kind: ClassVar[str] = "fc"

    def __post_init__(self):
        object.__setattr__(self, "weight", _frozen(self.weight))
        object.__setattr__(self, "bias", _frozen(self.bias))
        if self.weight.ndim != 2:
            raise ShapeError(f"fc weight must be 2-D, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"fc bias shape {self.bias.shape} does not match "
                             f"out_features={self.weight.shape[0]}")


LayerSpec = Conv | ReLU | MaxPool | Flatten | FullyConnected


def layer_output_shape(layer: LayerSpec, in_shape: Shape) -> Shape:
    """Shape produced by `layer` on an input of `in_shape`. Raises ShapeError."""
    if isinstance(layer, Conv):
        if len(in_shape) != 3:
            raise ShapeError(f"conv expects (c, h, w) input, got {in_shape}")
        c, h, w = in_shape
        c_out, c_in, k, _ = layer.weight.shape
        if c != c_in:
            raise ShapeError(f"conv expects {c_in} input channels, got {c}")
        oh = (h + 2 * layer.padding - k) // layer.stride + 1
        ow = (w + 2 * layer.padding - k) // layer.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"conv kernel {k} does not fit input {in_shape}")
        return (c_out, oh, ow)
    if isinstance(layer, MaxPool):
        if len(in_shape) != 3:
            raise ShapeError(f"maxpool expects (c, h, w) input, got {in_shape}")
        c, h, w = in_shape
        if h % layer.kernel or w % layer.kernel:
            raise ShapeError(f"maxpool kernel {layer.kernel} does not divide {in_shape}")
        return (c, h // layer.kernel, w // layer.kernel)
    if isinstance(layer, Flatten):
        return (int(np.prod(in_shape)),)
    if isinstance(layer, FullyConnected):
        if len(in_shape) != 1:
            raise ShapeError(f"fc expects a flat input, got {in_shape}; add a flatten layer")
        if in_shape[0] != layer.weight.shape[1]:
            raise ShapeError(f"fc expects {layer.weight.shape[1]} inputs, got {in_shape[0]}")
        return (layer.weight.shape[0],)
    # ReLU and anything shape-preserving
    return in_shape


class ModelGraph:
    """An ordered chain of layers with a fixed input shape.

    Per-layer output shapes are validated and cached at construction, so a
    constructed graph is internally consistent by definition.
    """

    def __init__(self, layers, input_shape):
        layers = tuple(layers)
        if not layers:
            raise ShapeError("a model needs at least one layer")
        self._layers = layers
        self._input_shape = tuple(int(d) for d in input_shape)
        shapes = []
        cur = self._input_shape
        for j, layer in enumerate(layers, start=1):
            try:
                cur = layer_output_shape(layer, cur)
            except ShapeError as exc:
                raise ShapeError(str(exc), layer=j) from None
            shapes.append(cur)
        self._shapes = tuple(shapes)

    @property
    def layers(self) -> tuple[LayerSpec, ...]:
        return self._layers

    @property
    def input_shape(self) -> Shape:
        return self._input_shape

    @property
    def n_layers(self) -> int:
        return len(self._layers)

    def output_shape(self, m: int | None = None) -> Shape:
        """Output shape after layer m (1-based); m=0 or None means input/final."""
        if m is None:
            return self._shapes[-1]
        if m == 0:
            return self._input_shape
        self._check_split(m)
        return self._shapes[m - 1]

    def with_layers(self, layers) -> "ModelGraph":
        return ModelGraph(layers, self._input_shape)

    def _check_split(self, m: int) -> None:
        if not 0 <= m <= self.n_layers:
            raise ShapeError(f"split index {m} outside [0, {self.n_layers}]")


def _check_finite(arr: np.ndarray, what: str, layer: int | None = None) -> np.ndarray:
    if not np.isfinite(arr).all():
        where = f" at layer {layer}" if layer is not None else ""
        raise NonFiniteError(f"non-finite {what}{where}")
    return arr


def _apply_layer(layer: LayerSpec, x: np.ndarray) -> np.ndarray:
    kern = backend.kernels()
    if isinstance(layer, Conv):
        p = layer.padding
        xp = np.pad(x, ((0, 0), (p, p), (p, p))) if p else x
        c_out = layer.weight.shape[0]
        k = layer.weight.shape[2]
        oh = (xp.shape[1] - k) // layer.stride + 1
        ow = (xp.shape[2] - k) // layer.stride + 1
        return kern.conv2d_forward(np.ascontiguousarray(xp), layer.weight, layer.bias,
                                   layer.stride, oh, ow)
    if isinstance(layer, ReLU):
        return np.maximum(x, 0.0)
    if isinstance(layer, MaxPool):
        return kern.maxpool_forward(x, layer.kernel)[0]
    if isinstance(layer, Flatten):
        return np.ascontiguousarray(x.reshape(-1))
    return kern.fc_forward(x, layer.weight, layer.bias)


def _layer_backward_input(layer: LayerSpec, x_in: np.ndarray, gy: np.ndarray) -> np.ndarray:
    kern = backend.kernels()
    gy = np.ascontiguousarray(gy)
    if isinstance(layer, Conv):
        p = layer.padding
        hp, wp = x_in.shape[1] + 2 * p, x_in.shape[2] + 2 * p
        gxp = kern.conv2d_backward_input(gy, layer.weight, layer.stride, hp, wp)
        if p:
            gxp = gxp[:, p:hp - p, p:wp - p]
        return np.ascontiguousarray(gxp)
    if isinstance(layer, ReLU):
        return gy * (x_in > 0.0)
    if isinstance(layer, MaxPool):
        _, idx = kern.maxpool_forward(x_in, layer.kernel)
        return kern.maxpool_backward(gy, idx, x_in.shape[1], x_in.shape[2])
    if isinstance(layer, Flatten):
        return np.ascontiguousarray(gy.reshape(x_in.shape))
    return kern.fc_backward_input(gy, layer.weight)


def _layer_backward_params(layer: LayerSpec, x_in: np.ndarray, gy: np.ndarray):
    """(grad_weight, grad_bias) for parameterized layers, else None."""
    kern = backend.kernels()
    gy = np.ascontiguousarray(gy)
    if isinstance(layer, Conv):
        p = layer.padding
        xp = np.pad(x_in, ((0, 0), (p, p), (p, p))) if p else x_in
        return kern.conv2d_backward_params(gy, np.ascontiguousarray(xp),
                                           layer.weight.shape[1], layer.weight.shape[2],
                                           layer.stride)
    if isinstance(layer, FullyConnected):
        return kern.fc_backward_params(gy, x_in)
    return None


def _run_prefix(model: ModelGraph, x, m: int) -> list[np.ndarray]:
    """Activations [x, a_1, ..., a_m]; every activation checked finite."""
    x = as_tensor(x)
    if x.shape != model.input_shape:
        raise ShapeError(f"input shape {x.shape} does not match model input "
                         f"{model.input_shape}", layer=0)
    _check_finite(x, "input", layer=0)
    acts = [x]
    for j in range(m):
        a = _apply_layer(model.layers[j], acts[-1])
        _check_finite(a, "activation", layer=j + 1)
        acts.append(a)
    return acts


def forward(model: ModelGraph, x) -> list[np.ndarray]:
    """All n per-layer activations for input x."""
    return _run_prefix(model, x, model.n_layers)[1:]


def forward_prefix(model: ModelGraph, x, m: int) -> np.ndarray:
    """Activation after layer m; m = 0 returns the (validated) input itself."""
    model._check_split(m)
    return _run_prefix(model, x, m)[-1]


def forward_suffix(model: ModelGraph, v, m: int) -> np.ndarray:
    """Run layers m+1..n on v, the activation emitted at split m."""
    model._check_split(m)
    v = as_tensor(v)
    if v.shape != model.output_shape(m):
        raise ShapeError(f"suffix input shape {v.shape} does not match layer-{m} "
                         f"output {model.output_shape(m)}", layer=m)
    _check_finite(v, "suffix input", layer=m)
    a = v
    for j in range(m, model.n_layers):
        a = _apply_layer(model.layers[j], a)
        _check_finite(a, "activation", layer=j + 1)
    return a


def input_gradient(model: ModelGraph, m: int, loss_grad_at_m, x) -> np.ndarray:
    """d(loss)/dx, reverse-accumulated from a loss gradient at the layer-m output."""
    model._check_split(m)
    g = as_tensor(loss_grad_at_m)
    if g.shape != model.output_shape(m):
        raise ShapeError(f"loss gradient shape {g.shape} does not match layer-{m} "
                         f"output {model.output_shape(m)}", layer=m)
    _check_finite(g, "loss gradient", layer=m)
    acts = _run_prefix(model, x, m)
    return _backprop_input(model, m, acts, g)


def _backprop_input(model: ModelGraph, m: int, acts: list[np.ndarray],
                    g: np.ndarray) -> np.ndarray:
    for j in range(m, 0, -1):
        g = _layer_backward_input(model.layers[j - 1], acts[j - 1], g)
        _check_finite(g, "gradient", layer=j)
    return g


def layer_flops(layer: LayerSpec, input_shape: Shape) -> int:
    """FLOPs for one layer; activation/pool/flatten layers count as zero."""
    if isinstance(layer, Conv):
        c_out, oh, ow = layer_output_shape(layer, tuple(input_shape))
        c_in = layer.weight.shape[1]
        k = layer.weight.shape[2]
        return 2 * oh * ow * (c_in * k * k + 1) * c_out
    if isinstance(layer, FullyConnected):
        o, i = layer.weight.shape
        return (2 * i - 1) * o
    return 0


def model_flops(model: ModelGraph) -> list[int]:
    """Per-layer FLOP counts; depends only on shapes, never on data."""
    out = []
    shape = model.input_shape
    for layer in model.layers:
        out.append(layer_flops(layer, shape))
        shape = layer_output_shape(layer, shape)
    return out
