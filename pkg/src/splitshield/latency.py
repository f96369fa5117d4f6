"""Partition-point planning under a given network condition.

The planner evaluates every split index m in [0, n] — m = 0 uploads the raw
input and runs everything remotely, m = n runs everything on the device and
transmits only the result — and picks the split minimizing

    T_total(m) = T_transmit(m) + sum_{i<=m} t_edge_i + sum_{j>m} t_cloud_j

with ties broken toward the smallest m (most offloading). The total is
defined as the ordered sum edge + uplink + cloud + downlink, so the reported
breakdown adds up to the total exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import ModelGraph, layer_flops, model_flops
from .engine.graph import layer_output_shape
from .errors import LinkDownError

DEFAULT_BITS_PER_ELEMENT = 64


@dataclass(frozen=True)
class NetworkCondition:
    """Instantaneous channel state feeding the Shannon-Hartley rate."""

    bandwidth_hz: float
    transmit_power_w: float
    channel_gain: float
    noise_power_w: float
    interference_w: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.noise_power_w + self.interference_w <= 0:
            raise ValueError("noise plus interference power must be positive")
        if self.transmit_power_w * self.channel_gain < 0:
            raise ValueError("received power must be non-negative")


@dataclass(frozen=True)
class ComputeCapability:
    """Floating-point throughput of the two sides, in FLOP/s."""

    edge_flops: float
    cloud_flops: float

    def __post_init__(self):
        if self.edge_flops <= 0 or self.cloud_flops <= 0:
            raise ValueError("compute capabilities must be positive")


@dataclass(frozen=True)
class LatencyProfile:
    """Per-layer offline statistics for one model on one device pair.

    input_bits is the raw input size, needed for the m = 0 (all-cloud)
    candidate which uploads the input itself.
    """

    edge_seconds: tuple[float, ...]
    cloud_seconds: tuple[float, ...]
    output_bits: tuple[float, ...]
    result_bits: float
    input_bits: float

    def __post_init__(self):
        n = len(self.edge_seconds)
        if not (len(self.cloud_seconds) == len(self.output_bits) == n):
            raise ValueError("per-layer lists must all have length n")
        if n == 0:
            raise ValueError("profile needs at least one layer")
        for name in ("edge_seconds", "cloud_seconds", "output_bits"):
            if any(v < 0 for v in getattr(self, name)):
                raise ValueError(f"{name} entries must be >= 0")
        if self.result_bits < 0 or self.input_bits < 0:
            raise ValueError("sizes must be >= 0")

    @property
    def n_layers(self) -> int:
        return len(self.edge_seconds)


@dataclass(frozen=True)
class LatencyBreakdown:
    edge_compute: float
    uplink: float
    cloud_compute: float
    downlink: float

    @property
    def total(self) -> float:
        return self.edge_compute + self.uplink + self.cloud_compute + self.downlink


@dataclass(frozen=True)
class PartitionPlan:
    """Chosen split plus the endpoint latencies used for speedup ratios."""

    split: int
    total_seconds: float
    breakdown: LatencyBreakdown
    cloud_only_seconds: float
    device_only_seconds: float


def shannon_rate(cond: NetworkCondition) -> float:
    """Achievable rate in bit/s; zero when no power is received."""
    snr = cond.transmit_power_w * cond.channel_gain / (
        cond.noise_power_w + cond.interference_w)
    return cond.bandwidth_hz * math.log2(1.0 + snr)


def transmission_latency(upload_bits: float, result_bits: float, rate_bps: float) -> float:
    """Uplink plus downlink time over a single shared rate."""
    if rate_bps <= 0:
        raise LinkDownError(f"link rate {rate_bps} bit/s is not usable")
    return upload_bits / rate_bps + result_bits / rate_bps


def compute_latency(flops: float, capability_flops: float) -> float:
    if capability_flops <= 0:
        raise ValueError("compute capability must be positive")
    return flops / capability_flops


def profile(model: ModelGraph, caps: ComputeCapability,
            bits_per_element: int = DEFAULT_BITS_PER_ELEMENT) -> LatencyProfile:
    """Offline per-layer compute times and transfer sizes for `model`."""
    edge, cloud, bits = [], [], []
    shape = model.input_shape
    elements = lambda s: float(math.prod(s))
    input_bits = elements(shape) * bits_per_element
    for layer in model.layers:
        f = layer_flops(layer, shape)
        edge.append(compute_latency(f, caps.edge_flops))
        cloud.append(compute_latency(f, caps.cloud_flops))
        shape = layer_output_shape(layer, shape)
        bits.append(elements(shape) * bits_per_element)
    return LatencyProfile(
        edge_seconds=tuple(edge),
        cloud_seconds=tuple(cloud),
        output_bits=tuple(bits),
        result_bits=bits[-1],
        input_bits=input_bits,
    )


def _upload_bits(prof: LatencyProfile, m: int) -> float:
    # m = n keeps everything local; only the result crosses the link.
    if m == 0:
        return prof.input_bits
    if m == prof.n_layers:
        return 0.0
    return prof.output_bits[m - 1]


def _candidate(prof: LatencyProfile, rate_bps: float, m: int) -> tuple[float, LatencyBreakdown]:
    if rate_bps <= 0:
        raise LinkDownError(f"link rate {rate_bps} bit/s is not usable")
    breakdown = LatencyBreakdown(
        edge_compute=sum(prof.edge_seconds[:m]),
        uplink=_upload_bits(prof, m) / rate_bps,
        cloud_compute=sum(prof.cloud_seconds[m:]),
        downlink=prof.result_bits / rate_bps,
    )
    return breakdown.total, breakdown


def select_partition(prof: LatencyProfile, rate_bps: float) -> PartitionPlan:
    """Latency-minimizing split over m in [0, n]; ties go to the smallest m."""
    best_m, best_total, best_breakdown = 0, math.inf, None
    cloud_only = device_only = math.inf
    for m in range(prof.n_layers + 1):
        total, breakdown = _candidate(prof, rate_bps, m)
        if m == 0:
            cloud_only = total
        if m == prof.n_layers:
            device_only = total
        if total < best_total:
            best_m, best_total, best_breakdown = m, total, breakdown
    return PartitionPlan(
        split=best_m,
        total_seconds=best_total,
        breakdown=best_breakdown,
        cloud_only_seconds=cloud_only,
        device_only_seconds=device_only,
    )


def replan_on_bandwidth_change(model: ModelGraph, caps: ComputeCapability,
                               trace: list[NetworkCondition],
                               bits_per_element: int = DEFAULT_BITS_PER_ELEMENT,
                               ) -> list[PartitionPlan]:
    """One plan per trace point; the compute profile is reused across points."""
    if not trace:
        raise ValueError("trace must be non-empty")
    stamps = [c.timestamp for c in trace]
    if any(b <= a for a, b in zip(stamps, stamps[1:])):
        raise ValueError("trace timestamps must be strictly increasing")
    prof = profile(model, caps, bits_per_element)
    return [select_partition(prof, shannon_rate(cond)) for cond in trace]
