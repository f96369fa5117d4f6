"""Shared test plumbing: random tiny models and kink-safe inputs."""

import numpy as np

from splitshield.engine import (Conv, Flatten, FullyConnected, MaxPool,
                                ModelGraph, ReLU)
from splitshield.engine.graph import _run_prefix


def _conv(rng, c_in, c_out, k, stride=1, padding=0, bias_scale=0.1):
    w = rng.normal(size=(c_out, c_in, k, k)) / np.sqrt(c_in * k * k)
    b = rng.normal(size=c_out) * bias_scale
    return Conv(w, b, stride=stride, padding=padding)


def _fc(rng, i_dim, o_dim):
    w = rng.normal(size=(o_dim, i_dim)) / np.sqrt(i_dim)
    b = rng.normal(size=o_dim) * 0.1
    return FullyConnected(w, b)


def make_random_model(rng) -> ModelGraph:
    """A random chain of at most 4 layers covering every layer kind."""
    arch = rng.integers(0, 5)
    if arch == 0:
        return ModelGraph([_conv(rng, 2, 3, 3), ReLU(),
                           _conv(rng, 3, 2, 3)], (2, 6, 6))
    if arch == 1:
        return ModelGraph([_conv(rng, 1, 4, 3, padding=1), MaxPool(2),
                           Flatten(), _fc(rng, 4 * 2 * 2, 5)], (1, 4, 4))
    if arch == 2:
        return ModelGraph([_conv(rng, 2, 2, 3, stride=2, padding=1), ReLU(),
                           Flatten(), _fc(rng, 2 * 3 * 3, 4)], (2, 5, 5))
    if arch == 3:
        return ModelGraph([Flatten(), _fc(rng, 12, 8), ReLU(),
                           _fc(rng, 8, 3)], (3, 2, 2))
    return ModelGraph([_conv(rng, 2, 3, 2), ReLU(), MaxPool(2)], (2, 5, 5))


def kink_margin(model: ModelGraph, x) -> float:
    """Distance of the forward pass from ReLU kinks and pooling ties.

    Finite-difference gradient checks are only meaningful when the step
    cannot flip a ReLU sign or a pooling argmax; inputs are resampled until
    this margin is comfortable.
    """
    acts = _run_prefix(model, x, model.n_layers)
    margin = np.inf
    for j, layer in enumerate(model.layers):
        a_in = acts[j]
        if isinstance(layer, ReLU):
            margin = min(margin, float(np.min(np.abs(a_in))))
        elif isinstance(layer, MaxPool):
            k = layer.kernel
            if k == 1:
                continue
            c, h, w = a_in.shape
            win = a_in.reshape(c, h // k, k, w // k, k).transpose(0, 1, 3, 2, 4)
            win = win.reshape(c, h // k, w // k, k * k)
            top2 = np.sort(win, axis=3)[..., -2:]
            margin = min(margin, float(np.min(top2[..., 1] - top2[..., 0])))
    return margin


def sample_safe_input(model: ModelGraph, rng, margin=1e-3, tries=200) -> np.ndarray:
    for _ in range(tries):
        x = rng.uniform(-1.0, 1.0, size=model.input_shape)
        if kink_margin(model, x) > margin:
            return x
    raise RuntimeError("could not find a kink-safe input")
