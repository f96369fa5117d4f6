"""Model specification files and weight blobs.

A model spec is a JSON document:

    {
      "version": 1,
      "input_shape": [3, 8, 8],
      "weights": {"seed": 7}            // or {"blob": "weights.bin"}
      "layers": [
        {"kind": "conv", "out_channels": 6, "kernel": 3, "stride": 1, "padding": 1},
        {"kind": "relu"},
        {"kind": "maxpool", "kernel": 2},
        {"kind": "flatten"},
        {"kind": "fc", "out_features": 10}
      ]
    }

Input channel/feature counts are inferred from the shape chain, so layers
only declare their own hyperparameters. Weights come either from a seeded
uniform initializer or from a flat little-endian float64 blob holding, in
layer order, each conv/fc weight tensor followed by its bias.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ModelSpecError
from .graph import (Conv, Flatten, FullyConnected, MaxPool, ModelGraph, ReLU,
                    layer_output_shape)

SCHEMA_VERSION = 1


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ModelSpecError(f"{where}: missing required field {key!r}")
    return d[key]


def _layer_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _init_weight(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def build_model(spec: dict, base_dir: str | Path | None = None) -> ModelGraph:
    """Construct a ModelGraph from a parsed spec dict."""
    version = _require(spec, "version", "spec")
    if version != SCHEMA_VERSION:
        raise ModelSpecError(f"unsupported spec version {version}, expected {SCHEMA_VERSION}")
    input_shape = tuple(int(d) for d in _require(spec, "input_shape", "spec"))
    layer_specs = _require(spec, "layers", "spec")
    if not isinstance(layer_specs, list) or not layer_specs:
        raise ModelSpecError("spec: 'layers' must be a non-empty list")

    weights_cfg = _require(spec, "weights", "spec")
    seed = weights_cfg.get("seed")
    blob_path = weights_cfg.get("blob")
    if (seed is None) == (blob_path is None):
        raise ModelSpecError("spec: 'weights' needs exactly one of 'seed' or 'blob'")
    blob = None
    if blob_path is not None:
        path = Path(base_dir or ".") / blob_path
        if not path.exists():
            raise ModelSpecError(f"spec: weight blob {path} does not exist")
        blob = np.fromfile(path, dtype="<f8")
    cursor = 0

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal cursor
        n = int(np.prod(shape))
        if cursor + n > blob.size:
            raise ModelSpecError(f"spec: weight blob too short (needs more than {blob.size} values)")
        out = blob[cursor:cursor + n].reshape(shape)
        cursor += n
        return out

    layers = []
    shape = input_shape
    for idx, cfg in enumerate(layer_specs):
        where = f"layers[{idx}]"
        kind = _require(cfg, "kind", where)
        if kind == "conv":
            if len(shape) != 3:
                raise ModelSpecError(f"{where}: conv needs a (c, h, w) input, "
                                     f"got shape {shape}")
            c_in = shape[0]
            c_out = int(_require(cfg, "out_channels", where))
            k = int(_require(cfg, "kernel", where))
            stride = int(cfg.get("stride", 1))
            padding = int(cfg.get("padding", 0))
            wshape = (c_out, c_in, k, k)
            if blob is not None:
                w, b = take(wshape), take((c_out,))
            else:
                rng = _layer_rng(seed, idx)
                w = _init_weight(rng, wshape, c_in * k * k)
                b = np.zeros(c_out)
            layer = Conv(w, b, stride=stride, padding=padding)
        elif kind == "relu":
            layer = ReLU()
        elif kind == "maxpool":
            layer = MaxPool(int(_require(cfg, "kernel", where)))
        elif kind == "flatten":
            layer = Flatten()
        elif kind == "fc":
            if len(shape) != 1:
                raise ModelSpecError(f"{where}: fc needs a flat input, got shape {shape}")
            i_dim = shape[0]
            o_dim = int(_require(cfg, "out_features", where))
            if blob is not None:
                w, b = take((o_dim, i_dim)), take((o_dim,))
            else:
                rng = _layer_rng(seed, idx)
                w = _init_weight(rng, (o_dim, i_dim), i_dim)
                b = np.zeros(o_dim)
            layer = FullyConnected(w, b)
        else:
            raise ModelSpecError(f"{where}: unknown layer kind {kind!r}")
        layers.append(layer)
        shape = layer_output_shape(layer, shape)

    if blob is not None and cursor != blob.size:
        raise ModelSpecError(f"spec: weight blob has {blob.size - cursor} unused values")
    return ModelGraph(layers, input_shape)


def load_model(path: str | Path) -> ModelGraph:
    """Read a model spec file and build the model."""
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelSpecError(f"cannot read model spec {path}: {exc}") from exc
    return build_model(spec, base_dir=path.parent)


def save_weights_blob(model: ModelGraph, path: str | Path) -> None:
    """Dump all conv/fc parameters as a flat little-endian float64 blob."""
    chunks = []
    for layer in model.layers:
        if isinstance(layer, (Conv, FullyConnected)):
            chunks.append(layer.weight.reshape(-1))
            chunks.append(layer.bias.reshape(-1))
    flat = np.concatenate(chunks) if chunks else np.empty(0)
    flat.astype("<f8").tofile(path)
