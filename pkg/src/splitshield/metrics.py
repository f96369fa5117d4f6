"""Image fidelity metrics: MSE, single-window SSIM, and PSNR.

Metrics follow the 0..255 pixel convention. Pairs whose data lives on a
different dynamic range declare their peak value and are rescaled by
255 / peak before scoring, so PSNR's hard-coded 255^2 stays meaningful.
SSIM is the single global statistic (means, population variances and
covariance over the whole image), computed per channel and averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import as_tensor
from .errors import ShapeError

PEAK = 255.0
PSNR_INFINITE = math.inf


@dataclass(frozen=True)
class ImagePair:
    """Two same-shape images plus the peak value of their encoding."""

    a: np.ndarray
    b: np.ndarray
    peak: float = PEAK

    def __post_init__(self):
        a, b = as_tensor(self.a), as_tensor(self.b)
        if a.shape != b.shape:
            raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
        if self.peak <= 0:
            raise ValueError("peak must be > 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def _scaled(self) -> tuple[np.ndarray, np.ndarray]:
        if self.peak == PEAK:
            return self.a, self.b
        f = PEAK / self.peak
        return self.a * f, self.b * f


@dataclass(frozen=True)
class SimilarityReport:
    mse: float
    ssim: float
    psnr_db: float

    def __post_init__(self):
        if (self.mse == 0.0) != math.isinf(self.psnr_db):
            raise ValueError("psnr must be the infinite sentinel exactly when mse == 0")


def mse(pair: ImagePair) -> float:
    """Mean squared pixel difference over all channels."""
    a, b = pair._scaled()
    d = a - b
    return float(np.mean(d * d))


def ssim(pair: ImagePair, c1: float | None = None, c2: float | None = None) -> float:
    """Global structural similarity, averaged over channels.

    Defaults follow the usual convention c1 = (0.01 * 255)^2 and
    c2 = (0.03 * 255)^2.
    """
    if c1 is None:
        c1 = (0.01 * PEAK) ** 2
    if c2 is None:
        c2 = (0.03 * PEAK) ** 2
    if c1 <= 0 or c2 <= 0:
        raise ValueError("c1 and c2 must be > 0")
    a, b = pair._scaled()
    if a.ndim == 2:
        a, b = a[None], b[None]
    elif a.ndim != 3:
        a, b = a.reshape(1, 1, -1), b.reshape(1, 1, -1)
    vals = []
    for ch in range(a.shape[0]):
        x, y = a[ch], b[ch]
        mu_x, mu_y = np.mean(x), np.mean(y)
        dx, dy = x - mu_x, y - mu_y
        var_x, var_y = np.mean(dx * dx), np.mean(dy * dy)
        cov = np.mean(dx * dy)
        vals.append((2 * mu_x * mu_y + c1) * (2 * cov + c2)
                    / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)))
    return float(np.mean(vals))


def psnr(pair: ImagePair) -> float:
    """Peak signal-to-noise ratio in dB; identical images give the infinite sentinel."""
    m = mse(pair)
    if m == 0.0:
        return PSNR_INFINITE
    return float(10.0 * math.log10(PEAK ** 2 / m))


def compare(a, b, peak: float = PEAK) -> SimilarityReport:
    """All three metrics for one pair."""
    pair = ImagePair(a, b, peak)
    return SimilarityReport(mse=mse(pair), ssim=ssim(pair), psnr_db=psnr(pair))
