"""The built-in desk-scale CNN ("tinynet") and its input distribution.

tinynet is a 7-layer chain on 3x8x8 inputs whose split-layer filters are
deliberately heterogeneous in information content, the regime the
rank-calibrated budget allocation is designed for:

* filters 0-3 read only input channels 0-1 (dense random content) and
  produce high-rank feature maps;
* filters 4-5 read only input channel 2, which the input distribution
  fills with a smooth rank-1 pattern, so their maps have low numerical
  rank. Later layers weight these channels weakly, the way training
  deprioritizes uninformative features.

Input channel 2 is therefore observable only through the low-rank filters,
and the class decision rests mostly on the high-rank ones. Both trade-off
directions of the protection mechanism are exercised: noise concentrated on
low-rank channels costs little accuracy but ruins the attacker's only view
of channel 2.
"""

from __future__ import annotations

import numpy as np

from ..engine import Conv, Flatten, FullyConnected, MaxPool, ModelGraph, ReLU

INPUT_SHAPE = (3, 8, 8)
SPLIT_LAYER = 2  # after conv1 + relu: (6, 8, 8)
N_CLASSES = 10

_SMOOTH_CHANNEL_GAIN = 0.05  # conv2 damping of the low-information channels


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


def build_tinynet(seed: int = 7) -> ModelGraph:
    rng = _rng(seed, 0)

    # conv1: 4 sharp filters on channels 0-1, 2 smoothing filters on channel 2
    w1 = np.zeros((6, 3, 3, 3))
    for i in range(4):
        f = rng.normal(size=(2, 3, 3))
        f -= f.mean()
        f /= np.sqrt(np.sum(f * f))
        w1[i, :2] = 1.6 * f
    w1[4, 2] = np.full((3, 3), 1.0 / 9.0)
    w1[5, 2] = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 16.0
    b1 = np.full(6, 0.1)

    w2 = rng.normal(size=(16, 6, 3, 3)) / np.sqrt(6 * 9)
    w2[:, 4:, :, :] *= _SMOOTH_CHANNEL_GAIN
    b2 = np.full(16, 0.05)

    w3 = rng.normal(size=(N_CLASSES, 16 * 4 * 4)) / np.sqrt(16 * 4 * 4)
    b3 = np.zeros(N_CLASSES)

    return ModelGraph(
        [
            Conv(w1, b1, stride=1, padding=1),
            ReLU(),
            MaxPool(2),
            Conv(w2, b2, stride=1, padding=1),
            ReLU(),
            Flatten(),
            FullyConnected(w3, b3),
        ],
        INPUT_SHAPE,
    )


def sample_tinynet_inputs(n: int, seed_entropy) -> list[np.ndarray]:
    """n inputs: channels 0-1 dense uniform noise, channel 2 a smooth rank-1 field."""
    entropy = list(seed_entropy) if isinstance(seed_entropy, (tuple, list)) else [seed_entropy]
    rng = _rng(*entropy)
    out = []
    for _ in range(n):
        x = np.empty(INPUT_SHAPE)
        x[:2] = rng.uniform(0.0, 1.0, size=(2, 8, 8))
        u = rng.uniform(0.2, 1.0, size=8)
        v = rng.uniform(0.2, 1.0, size=8)
        x[2] = np.outer(u, v)
        out.append(x)
    return out


def uniform_input_sampler(shape):
    """Fallback sampler for file-based models: i.i.d. uniform [0, 1)."""
    shape = tuple(shape)

    def sample(n: int, seed_entropy) -> list[np.ndarray]:
        entropy = list(seed_entropy) if isinstance(seed_entropy, (tuple, list)) else [seed_entropy]
        rng = _rng(*entropy)
        return [rng.uniform(0.0, 1.0, size=shape) for _ in range(n)]

    return sample
