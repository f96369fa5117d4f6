"""Sweep execution: partition planning, privacy grids, attack campaigns.

Every row a sweep emits is reproducible bit-identically from the scenario
echo plus the seeds stored on the row: all randomness is derived from
(seed, purpose-tag, index) tuples, and floats are canonicalized to 9
significant digits when rows are built. Sweep points are independent; the
attack campaign can fan out over processes and still merges results in
deterministic job order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..attacks import InverseModelSpec, bina_reconstruct, bina_train, wra_reconstruct
from ..engine import (Flatten, FullyConnected, ModelGraph, ReLU, forward_prefix,
                      forward_suffix, model_flops)
from ..errors import ScenarioError
from ..latency import profile, select_partition, shannon_rate
from ..privacy import (MECHANISM_COLLABORATIVE, MECHANISM_NATIVE, MECHANISM_NONE,
                       BudgetAllocation, ClipConfig, RankEstimationConfig,
                       allocate_budget, collaborative_dp, estimate_ranks,
                       native_dp, non_dp)
from .report import round9
from .scenario import NETWORK_PRESETS_MBPS, AttackBlock, PrivacyBlock, Scenario

# Purpose tags keeping derived seed streams disjoint.
TAG_CALIB = 11
TAG_EVAL = 12
TAG_TARGET = 13
TAG_QUERY = 14
TAG_NOISE = 15
TAG_DECODER = 16


@dataclass(frozen=True)
class ProfileRow:
    layer: int
    kind: str
    flops: int
    edge_s: float
    cloud_s: float
    output_bits: float


@dataclass(frozen=True)
class PartitionRow:
    label: str
    rate_mbps: float
    split: int
    total_s: float
    edge_s: float
    uplink_s: float
    cloud_s: float
    downlink_s: float
    cloud_only_s: float
    device_only_s: float
    speedup_vs_device: float
    speedup_vs_cloud: float


@dataclass(frozen=True)
class AllocationEntry:
    filter: int
    rank: float
    epsilon: float
    noise_scale: float


@dataclass(frozen=True)
class PrivacyRow:
    mechanism: str
    epsilon: float
    seed: int
    agreement: float
    clip_threshold: float
    allocation: tuple[AllocationEntry, ...]


@dataclass(frozen=True)
class AttackRow:
    attack: str
    mechanism: str
    epsilon: float
    seed: int
    tv_weight: float | None
    mse: float
    ssim: float
    psnr_db: float
    objective_final: float
    blob: str


@dataclass
class RunRecord:
    """Everything one sweep produced. wall_clock_seconds and reconstruction
    payloads are informational only: they are excluded from equality and the
    clock is never written to output files."""

    tool_version: str
    scenario_hash: str
    scenario: dict
    master_seed: int
    profile_rows: tuple[ProfileRow, ...] = ()
    partition_rows: tuple[PartitionRow, ...] = ()
    privacy_rows: tuple[PrivacyRow, ...] = ()
    attack_rows: tuple[AttackRow, ...] = ()
    reconstructions: tuple = field(default=(), compare=False, repr=False)
    wall_clock_seconds: float | None = field(default=None, compare=False, repr=False)


def _new_record(scenario: Scenario, **rows) -> RunRecord:
    return RunRecord(tool_version=__version__, scenario_hash=scenario.hash(),
                     scenario=scenario.raw, master_seed=scenario.seed, **rows)


def run_profile(scenario: Scenario) -> RunRecord:
    """Per-layer FLOPs, compute times and transfer sizes."""
    start = time.perf_counter()
    model = scenario.build_model()
    prof = profile(model, scenario.compute, scenario.bits_per_element)
    flops = model_flops(model)
    rows = tuple(
        ProfileRow(layer=i + 1, kind=layer.kind, flops=flops[i],
                   edge_s=round9(prof.edge_seconds[i]), cloud_s=round9(prof.cloud_seconds[i]),
                   output_bits=prof.output_bits[i])
        for i, layer in enumerate(model.layers))
    record = _new_record(scenario, profile_rows=rows)
    record.wall_clock_seconds = time.perf_counter() - start
    return record


def _rates(scenario: Scenario) -> list[tuple[str, float]]:
    rates = [(name, NETWORK_PRESETS_MBPS[name] * 1e6) for name in scenario.presets]
    rates.extend((f"eq1@{cond.timestamp:g}", shannon_rate(cond))
                 for cond in scenario.conditions)
    return rates


def run_partition_sweep(scenario: Scenario) -> RunRecord:
    """One plan per network preset/condition, with endpoint speedup ratios."""
    start = time.perf_counter()
    model = scenario.build_model()
    prof = profile(model, scenario.compute, scenario.bits_per_element)
    rows = []
    for label, rate_bps in _rates(scenario):
        plan = select_partition(prof, rate_bps)
        rows.append(PartitionRow(
            label=label,
            rate_mbps=round9(rate_bps / 1e6),
            split=plan.split,
            total_s=round9(plan.total_seconds),
            edge_s=round9(plan.breakdown.edge_compute),
            uplink_s=round9(plan.breakdown.uplink),
            cloud_s=round9(plan.breakdown.cloud_compute),
            downlink_s=round9(plan.breakdown.downlink),
            cloud_only_s=round9(plan.cloud_only_seconds),
            device_only_s=round9(plan.device_only_seconds),
            speedup_vs_device=round9(plan.device_only_seconds / plan.total_seconds),
            speedup_vs_cloud=round9(plan.cloud_only_seconds / plan.total_seconds),
        ))
    record = _new_record(scenario, partition_rows=tuple(rows))
    record.wall_clock_seconds = time.perf_counter() - start
    return record


@dataclass(frozen=True)
class _SplitContext:
    """Shared per-sweep state: model, split, clip threshold and filter ranks."""

    model: ModelGraph
    split: int
    clip: ClipConfig
    ranks: tuple[float, ...]


def _build_context(scenario: Scenario, block: PrivacyBlock | AttackBlock) -> _SplitContext:
    model = scenario.build_model()
    m = block.split_layer
    shape = model.output_shape(m)
    if len(shape) != 3:
        raise ScenarioError(f"split_layer {m} emits {shape}, need a (k, h, w) feature map",
                            field="split_layer")
    sampler = scenario.input_sampler(model)
    calibration = sampler(block.calibration_size, (scenario.seed, TAG_CALIB))
    cfg = RankEstimationConfig(batch_size=block.calibration_size,
                               tau_rel=block.rank_tolerance)
    ranks = tuple(estimate_ranks(model, m, calibration, cfg))
    if block.clip_mode == "fixed":
        clip = ClipConfig.fixed(block.clip_value)
    else:
        maps = [forward_prefix(model, x, m) for x in calibration]
        clip = ClipConfig.from_calibration(maps)
    return _SplitContext(model=model, split=m, clip=clip, ranks=ranks)


def _protect(ctx: _SplitContext, v: np.ndarray, mechanism: str, epsilon: float, seed):
    if mechanism == MECHANISM_NONE:
        return non_dp(v)
    if mechanism == MECHANISM_COLLABORATIVE:
        return collaborative_dp(v, allocate_budget(ctx.ranks, epsilon), ctx.clip, seed)
    if mechanism == MECHANISM_NATIVE:
        return native_dp(v, epsilon, ctx.clip, seed)
    raise ScenarioError(f"unknown mechanism {mechanism!r}", field="mechanisms")


def _allocation_entries(ctx: _SplitContext, mechanism: str,
                        epsilon: float) -> tuple[AllocationEntry, ...]:
    if mechanism == MECHANISM_NONE:
        return ()
    if mechanism == MECHANISM_COLLABORATIVE:
        alloc = allocate_budget(ctx.ranks, epsilon)
    else:
        alloc = allocate_budget([1.0] * len(ctx.ranks), epsilon)
        alloc = BudgetAllocation(epsilon=alloc.epsilon, per_filter=alloc.per_filter,
                                 ranks=ctx.ranks)
    entries = []
    for i, (rank, eps_i) in enumerate(zip(alloc.ranks, alloc.per_filter)):
        scale = math.inf if eps_i == 0 else 2.0 * ctx.clip.threshold / eps_i
        entries.append(AllocationEntry(filter=i, rank=round9(rank),
                                       epsilon=round9(eps_i), noise_scale=round9(scale)))
    return tuple(entries)


def _mechanism_grid(mechanisms, epsilon_grid) -> list[tuple[str, float]]:
    grid = []
    for mech in mechanisms:
        if mech == MECHANISM_NONE:
            grid.append((mech, math.inf))
        else:
            grid.extend((mech, eps) for eps in epsilon_grid)
    return grid


def run_privacy_sweep(scenario: Scenario) -> RunRecord:
    """Downstream argmax agreement vs the unprotected pipeline, per (mechanism, eps, seed)."""
    start = time.perf_counter()
    block = scenario.privacy
    if block is None:
        raise ScenarioError("scenario has no privacy block", field="privacy")
    ctx = _build_context(scenario, block)
    sampler = scenario.input_sampler(ctx.model)
    eval_inputs = sampler(block.eval_batch, (scenario.seed, TAG_EVAL))
    clean = [forward_prefix(ctx.model, x, ctx.split) for x in eval_inputs]
    reference = [int(np.argmax(forward_suffix(ctx.model, v, ctx.split))) for v in clean]

    rows = []
    for mech, eps in _mechanism_grid(block.mechanisms, block.epsilon_grid):
        allocation = _allocation_entries(ctx, mech, eps)
        for seed in block.seeds:
            if mech == MECHANISM_NONE:
                agreement = 1.0  # identical pipeline, agreement by definition
            else:
                hits = 0
                for i, v in enumerate(clean):
                    noisy = _protect(ctx, v, mech, eps, (seed, TAG_NOISE, i))
                    y = forward_suffix(ctx.model, noisy.tensor, ctx.split)
                    hits += int(np.argmax(y)) == reference[i]
                agreement = hits / len(clean)
            rows.append(PrivacyRow(mechanism=mech, epsilon=round9(eps), seed=seed,
                                   agreement=round9(agreement),
                                   clip_threshold=round9(ctx.clip.threshold),
                                   allocation=allocation))
    record = _new_record(scenario, privacy_rows=tuple(rows))
    record.wall_clock_seconds = time.perf_counter() - start
    return record


class QueryOracle:
    """The black-box attacker's only window onto the deployed pipeline.

    Calling it with a count returns that many (observed, input) pairs,
    exactly as the pipeline transmits them (protection included). The
    oracle holds an opaque emit closure, never the model, so the training
    code it is handed to cannot reach model parameters.
    """

    def __init__(self, emit, sampler, seed_entropy: tuple[int, ...]):
        self._emit = emit
        self._sampler = sampler
        self._entropy = tuple(seed_entropy)
        self._served = 0

    def __call__(self, count: int):
        xs = self._sampler(count, self._entropy + (TAG_QUERY, self._served))
        pairs = [(self._emit(x, self._served + j), x) for j, x in enumerate(xs)]
        self._served += count
        return pairs


def build_mirror_decoder(observed_shape, output_dim: int, hidden, seed_entropy) -> ModelGraph:
    """Flatten -> FC/ReLU stack -> FC decoder with seeded uniform init."""
    dims = [int(np.prod(observed_shape))] + [int(h) for h in hidden] + [int(output_dim)]
    layers = [Flatten()]
    for j, (i_dim, o_dim) in enumerate(zip(dims, dims[1:])):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(list(seed_entropy) + [j])))
        bound = 1.0 / np.sqrt(i_dim)
        layers.append(FullyConnected(rng.uniform(-bound, bound, size=(o_dim, i_dim)),
                                     np.zeros(o_dim)))
        if j < len(dims) - 2:
            layers.append(ReLU())
    return ModelGraph(layers, tuple(observed_shape))


def _attack_jobs(block: AttackBlock) -> list[tuple[str, str, float, int]]:
    jobs = []
    for attack in block.attacks:
        for mech, eps in _mechanism_grid(block.mechanisms, block.epsilon_grid):
            for seed in block.seeds:
                jobs.append((attack, mech, eps, seed))
    return jobs


def _eps_label(eps: float) -> str:
    return "inf" if math.isinf(eps) else f"{eps:.9g}"


def _run_attack_job(scenario: Scenario, ctx: _SplitContext, job) -> tuple[AttackRow, tuple]:
    attack, mech, eps, seed = job
    block = scenario.attack
    sampler = scenario.input_sampler(ctx.model)
    target = sampler(1, (scenario.seed, TAG_TARGET))[0]
    v_target = forward_prefix(ctx.model, target, ctx.split)
    observed = _protect(ctx, v_target, mech, eps, (seed, TAG_NOISE)).tensor

    if attack == "WRA":
        result = wra_reconstruct(ctx.model, ctx.split, observed, block.wra,
                                 true_input=target, peak=scenario.pixel_peak)
        tv_weight = block.wra.tv_weight
        objective_final = result.objective_trace[-1]
    else:
        emit_ctx = ctx  # closed over; the oracle object exposes no model attribute

        def emit(x, idx, _ctx=emit_ctx, _mech=mech, _eps=eps, _seed=seed):
            v = forward_prefix(_ctx.model, x, _ctx.split)
            return _protect(_ctx, v, _mech, _eps, (_seed, TAG_NOISE, 1000 + idx)).tensor

        oracle = QueryOracle(emit, sampler, (seed,))
        decoder = build_mirror_decoder(ctx.model.output_shape(ctx.split),
                                       int(np.prod(ctx.model.input_shape)),
                                       block.bina.hidden, (seed, TAG_DECODER))
        spec = InverseModelSpec(decoder=decoder, output_shape=ctx.model.input_shape,
                                query_count=block.bina.query_count,
                                epochs=block.bina.epochs,
                                batch_size=block.bina.batch_size,
                                step_size=block.bina.step_size, seed=seed)
        trained = bina_train(oracle, spec)
        result = bina_reconstruct(trained, observed, true_input=target,
                                  peak=scenario.pixel_peak)
        tv_weight = None
        objective_final = trained.final_loss

    blob = f"xhat_{attack}_{mech}_eps{_eps_label(eps)}_seed{seed}.bin"
    row = AttackRow(
        attack=attack, mechanism=mech, epsilon=round9(eps), seed=seed,
        tv_weight=None if tv_weight is None else round9(tv_weight),
        mse=round9(result.scores.mse), ssim=round9(result.scores.ssim),
        psnr_db=round9(result.scores.psnr_db),
        objective_final=round9(objective_final), blob=blob)
    return row, (blob, result.x_hat)


def _attack_job_worker(raw_scenario: dict, job):
    # Rebuilds per-process state; everything is seed-derived so results are
    # identical to the sequential path.
    scenario = Scenario.from_dict(raw_scenario)
    ctx = _build_context(scenario, scenario.attack)
    return _run_attack_job(scenario, ctx, job)


def run_attack_campaign(scenario: Scenario, parallelism: int = 1) -> RunRecord:
    """MSE/SSIM/PSNR of reconstructions per (attack, mechanism, eps, seed)."""
    start = time.perf_counter()
    block = scenario.attack
    if block is None:
        raise ScenarioError("scenario has no attack block", field="attack")
    jobs = _attack_jobs(block)
    seen = set()
    for job in jobs:
        if job in seen:
            raise ScenarioError(f"duplicate attack job {job}", field="attack")
        seen.add(job)

    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(_attack_job_worker, scenario.raw, job) for job in jobs]
            outcomes = [f.result() for f in futures]  # submission order == job order
    else:
        ctx = _build_context(scenario, block)
        outcomes = [_run_attack_job(scenario, ctx, job) for job in jobs]

    rows = tuple(row for row, _ in outcomes)
    recons = tuple(recon for _, recon in outcomes)
    record = _new_record(scenario, attack_rows=rows, reconstructions=recons)
    record.wall_clock_seconds = time.perf_counter() - start
    return record
