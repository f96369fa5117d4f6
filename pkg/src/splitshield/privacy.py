"""Differential privacy for offloaded feature maps.

The protected pipeline, per split-layer channel i of k:

  1. clip the channel to an infinity-norm bound C (making the release's
     global sensitivity 2C, since two neighboring inputs can move a clipped
     channel by at most 2C per element);
  2. draw i.i.d. Laplace noise at scale 2C / eps_i and add it.

Under rank-calibrated allocation ("Collaborative-DP") the per-channel
budgets eps_i split a total budget eps proportionally to the average
numerical rank of each filter's feature map over a calibration batch, so
information-rich channels stay usable while low-information channels absorb
the noise. The uniform baseline ("Native-DP") gives every channel eps / k.
"Non-DP" applies neither clipping nor noise.

Channels whose rank is zero receive a zero budget; their Laplace scale would
be infinite, so they are transmitted as all-zeros instead (an all-zero
channel releases nothing, which is the maximally private finite choice).

Everything is seeded: per-channel noise streams derive from the caller's
seed plus the channel index, so runs reproduce bit-identically and channels
can be generated in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import ModelGraph, as_tensor, forward_prefix
from .errors import NoInformativeFiltersError, NonFiniteError, ShapeError

MECHANISM_COLLABORATIVE = "Collaborative-DP"
MECHANISM_NATIVE = "Native-DP"
MECHANISM_NONE = "Non-DP"

Seed = int | tuple[int, ...]


@dataclass(frozen=True)
class ClipConfig:
    """Infinity-norm clipping threshold and how it was derived.

    Use `ClipConfig.fixed(c)` for an explicit bound or
    `ClipConfig.from_calibration(maps)` for the median of per-channel
    infinity norms over a calibration batch.
    """

    threshold: float
    mode: str = "fixed"

    def __post_init__(self):
        if not (self.threshold > 0 and math.isfinite(self.threshold)):
            raise ValueError(f"clip threshold must be finite and > 0, got {self.threshold}")

    @classmethod
    def fixed(cls, threshold: float) -> "ClipConfig":
        return cls(threshold=float(threshold), mode="fixed")

    @classmethod
    def from_calibration(cls, maps) -> "ClipConfig":
        return cls(threshold=derive_clip_threshold(maps), mode="median")


@dataclass(frozen=True)
class RankEstimationConfig:
    """Calibration batch size and the relative singular-value cutoff."""

    batch_size: int = 32
    tau_rel: float = 1e-6

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.tau_rel < 1:
            raise ValueError("tau_rel must be in (0, 1)")


@dataclass(frozen=True)
class BudgetAllocation:
    """Total budget and its per-filter split; validated on construction."""

    epsilon: float
    per_filter: tuple[float, ...]
    ranks: tuple[float, ...]

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be finite and > 0")
        if len(self.per_filter) != len(self.ranks):
            raise ValueError("per_filter and ranks must have equal length")
        if abs(sum(self.per_filter) - self.epsilon) > 1e-9 * max(1.0, self.epsilon):
            raise ValueError("per-filter budgets must sum to epsilon")
        for eps_i, rank in zip(self.per_filter, self.ranks):
            if eps_i < 0:
                raise ValueError("per-filter budgets must be >= 0")
            if eps_i == 0 and rank != 0:
                raise ValueError("only zero-rank filters may get zero budget")

    @property
    def k(self) -> int:
        return len(self.per_filter)


@dataclass(frozen=True)
class NoisyFeatureMap:
    """A protected split-layer output plus the bookkeeping to reproduce it."""

    tensor: np.ndarray
    mechanism: str
    seed: Seed | None
    allocation: BudgetAllocation | None
    epsilon_consumed: float


def derive_clip_threshold(maps) -> float:
    """Median of per-channel infinity norms over a batch of (k, h, w) maps."""
    norms = []
    for v in maps:
        v = as_tensor(v)
        if v.ndim != 3:
            raise ShapeError(f"expected (k, h, w) feature maps, got shape {v.shape}")
        norms.extend(np.abs(v).max(axis=(1, 2)))
    if not norms:
        raise ValueError("need at least one calibration map")
    med = float(np.median(norms))
    if med <= 0:
        raise ValueError("median channel norm is zero; cannot derive a clip threshold")
    return med


def clip_channels(v, threshold: float) -> np.ndarray:
    """Scale each channel of v (k, h, w) so its infinity norm is <= threshold.

    Channels already within the bound pass through bit-unchanged. Scaled
    channels are additionally clamped into [-threshold, threshold] to keep
    the bound exact against the final rounding of the division.
    """
    if threshold <= 0:
        raise ValueError("clip threshold must be > 0")
    v = as_tensor(v)
    if v.ndim != 3:
        raise ShapeError(f"expected (k, h, w) feature map, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise NonFiniteError("cannot clip a non-finite feature map")
    norms = np.abs(v).max(axis=(1, 2))
    scale = np.maximum(1.0, norms / threshold)
    scaled = np.clip(v / scale[:, None, None], -threshold, threshold)
    return np.where((scale > 1.0)[:, None, None], scaled, v)


def estimate_ranks(model: ModelGraph, m: int, calibration,
                   cfg: RankEstimationConfig) -> list[float]:
    """Average numerical rank per split-layer filter over a calibration batch.

    The numerical rank of one h-by-w map counts singular values above
    tau_rel times the largest one. Averages are kept real-valued; round
    with `display_ranks` for reporting.
    """
    if len(calibration) < 1:
        raise ValueError("calibration batch must be non-empty")
    shape = model.output_shape(m)
    if len(shape) != 3:
        raise ShapeError(f"split-layer output must be (k, h, w), got {shape}")
    totals = np.zeros(shape[0])
    for x in calibration:
        act = forward_prefix(model, x, m)
        for i in range(shape[0]):
            totals[i] += _numerical_rank(act[i], cfg.tau_rel)
    return [float(t) for t in totals / len(calibration)]


def _numerical_rank(mat: np.ndarray, tau_rel: float) -> int:
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s > tau_rel * s[0]))


def display_ranks(ranks) -> list[int]:
    """Half-up integer rounding of rank estimates, for reports."""
    return [math.floor(r + 0.5) for r in ranks]


def allocate_budget(ranks, epsilon: float) -> BudgetAllocation:
    """Split epsilon across filters proportionally to their ranks."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be finite and > 0")
    ranks = [float(r) for r in ranks]
    if any(r < 0 for r in ranks):
        raise ValueError("ranks must be >= 0")
    total = sum(ranks)
    if total <= 0:
        raise NoInformativeFiltersError(
            "no informative filters: every rank is zero, nothing to allocate budget to")
    shares = [epsilon * r / total for r in ranks]
    # renormalize away accumulated rounding drift
    norm = epsilon / sum(shares)
    shares = [s * norm for s in shares]
    return BudgetAllocation(epsilon=epsilon, per_filter=tuple(shares), ranks=tuple(ranks))


def uniform_allocation(k: int, epsilon: float) -> BudgetAllocation:
    """The Native-DP split: every filter gets epsilon / k."""
    return allocate_budget([1.0] * k, epsilon)


def _seed_tuple(seed: Seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def _channel_rng(seed: Seed, channel: int) -> np.random.Generator:
    entropy = _seed_tuple(seed) + (channel,)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def laplace_noise(shape, scale: float, seed: Seed) -> np.ndarray:
    """Seeded i.i.d. Laplace(scale) samples via the inverse CDF.

    scale = 0 returns zeros (the no-noise path); an infinite scale is
    rejected — callers suppress such channels instead.
    """
    if scale < 0 or math.isinf(scale):
        raise ValueError(f"Laplace scale must be finite and >= 0, got {scale}")
    if scale == 0:
        return np.zeros(shape)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(_seed_tuple(seed))))
    u = rng.random(shape)
    u = np.maximum(u, np.finfo(np.float64).tiny)  # keep log(2u) finite at u == 0
    return np.where(u < 0.5, scale * np.log(2.0 * u), -scale * np.log(2.0 * (1.0 - u)))


def _apply_mechanism(v, alloc: BudgetAllocation, clip: ClipConfig, seed: Seed,
                     mechanism: str) -> NoisyFeatureMap:
    v = as_tensor(v)
    if v.ndim != 3:
        raise ShapeError(f"expected (k, h, w) feature map, got shape {v.shape}")
    if alloc.k != v.shape[0]:
        raise ShapeError(f"allocation covers {alloc.k} filters but the map has "
                         f"{v.shape[0]} channels")
    clipped = clip_channels(v, clip.threshold)
    out = np.empty_like(clipped)
    for i in range(alloc.k):
        eps_i = alloc.per_filter[i]
        if eps_i == 0.0:
            out[i] = 0.0  # zero-rank channel: suppressed outright
        else:
            scale = 2.0 * clip.threshold / eps_i
            out[i] = clipped[i] + laplace_noise(clipped[i].shape, scale,
                                                _seed_tuple(seed) + (i,))
    return NoisyFeatureMap(
        tensor=out,
        mechanism=mechanism,
        seed=seed,
        allocation=alloc,
        epsilon_consumed=float(sum(alloc.per_filter)),
    )


def collaborative_dp(v, alloc: BudgetAllocation, clip: ClipConfig,
                     seed: Seed) -> NoisyFeatureMap:
    """Clip then add per-channel Laplace noise at scale 2C / eps_i."""
    return _apply_mechanism(v, alloc, clip, seed, MECHANISM_COLLABORATIVE)


def native_dp(v, epsilon: float, clip: ClipConfig, seed: Seed) -> NoisyFeatureMap:
    """Same pipeline with the uniform eps / k allocation."""
    v = as_tensor(v)
    if v.ndim != 3:
        raise ShapeError(f"expected (k, h, w) feature map, got shape {v.shape}")
    alloc = uniform_allocation(v.shape[0], epsilon)
    return _apply_mechanism(v, alloc, clip, seed, MECHANISM_NATIVE)


def non_dp(v) -> NoisyFeatureMap:
    """Unprotected baseline: no clipping, no noise, no finite budget."""
    return NoisyFeatureMap(
        tensor=as_tensor(v).copy(),
        mechanism=MECHANISM_NONE,
        seed=None,
        allocation=None,
        epsilon_consumed=math.inf,
    )


def budget_ledger(runs) -> float:
    """Total epsilon consumed across runs, under sum composition.

    Each mechanism application on the same source spends its full per-run
    sum of per-filter budgets; downstream (cloud-side) inference is post-
    processing and costs nothing. A Non-DP release has no finite budget, so
    any such run drives the ledger to infinity.
    """
    return float(sum(run.epsilon_consumed for run in runs))
