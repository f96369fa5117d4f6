"""Dense-tensor inference engine for chain CNNs."""

from .backend import active_backend, available_backends, set_backend
from .graph import (Conv, Flatten, FullyConnected, LayerSpec, MaxPool,
                    ModelGraph, ReLU, as_tensor, forward, forward_prefix,
                    forward_suffix, input_gradient, layer_flops, model_flops)
from .modelio import build_model, load_model, save_weights_blob

__all__ = [
    "Conv", "Flatten", "FullyConnected", "LayerSpec", "MaxPool", "ModelGraph",
    "ReLU", "as_tensor", "forward", "forward_prefix", "forward_suffix",
    "input_gradient", "layer_flops", "model_flops",
    "build_model", "load_model", "save_weights_blob",
    "active_backend", "available_backends", "set_backend",
]
