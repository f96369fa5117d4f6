"""Scenario files: the single config driving sweeps and campaigns.

A scenario is a JSON document naming the model, the network conditions
(named presets and/or explicit channel parameters), compute capabilities,
and optional privacy and attack blocks. `Scenario.from_dict` validates
eagerly and reports the offending field path.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..attacks import WraConfig
from ..engine import ModelGraph, load_model
from ..errors import ScenarioError
from ..latency import ComputeCapability, NetworkCondition
from ..privacy import (MECHANISM_COLLABORATIVE, MECHANISM_NATIVE,
                       MECHANISM_NONE)
from .tinynet import (INPUT_SHAPE, SPLIT_LAYER, build_tinynet,
                      sample_tinynet_inputs, uniform_input_sampler)

SCENARIO_VERSION = 1

# Named uplink presets (Mbit/s) and the depth metadata of the reference
# model family the presets were measured with.
NETWORK_PRESETS_MBPS = {
    "poor": 0.15,
    "medium": 1.3,
    "good": 4.0,
    "excellence": 15.0,
}
MODEL_DEPTH_METADATA = {
    "AlexNet": 13,
    "VGG-16": 34,
    "MobileNet v1": 54,
}

ALL_MECHANISMS = (MECHANISM_COLLABORATIVE, MECHANISM_NATIVE, MECHANISM_NONE)
ALL_ATTACKS = ("WRA", "BINA")


@dataclass(frozen=True)
class BinaBlock:
    hidden: tuple[int, ...] = (256,)
    query_count: int = 512
    epochs: int = 40
    batch_size: int = 32
    step_size: float = 1.5


@dataclass(frozen=True)
class PrivacyBlock:
    split_layer: int
    epsilon_grid: tuple[float, ...]
    mechanisms: tuple[str, ...]
    clip_mode: str  # "fixed" | "median"
    clip_value: float | None
    calibration_size: int
    rank_tolerance: float
    seeds: tuple[int, ...]
    eval_batch: int


@dataclass(frozen=True)
class AttackBlock:
    split_layer: int
    attacks: tuple[str, ...]
    mechanisms: tuple[str, ...]
    epsilon_grid: tuple[float, ...]
    seeds: tuple[int, ...]
    wra: WraConfig
    bina: BinaBlock
    clip_mode: str
    clip_value: float | None
    calibration_size: int
    rank_tolerance: float


@dataclass(frozen=True)
class Scenario:
    raw: dict
    model_builtin: str | None
    model_seed: int
    model_path: str | None
    presets: tuple[str, ...]
    conditions: tuple[NetworkCondition, ...]
    compute: ComputeCapability
    bits_per_element: int
    pixel_peak: float
    seed: int
    privacy: PrivacyBlock | None
    attack: AttackBlock | None
    output_dir: str

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path | None = None) -> "Scenario":
        if raw.get("version") != SCENARIO_VERSION:
            raise ScenarioError(f"expected {SCENARIO_VERSION}, got {raw.get('version')}",
                                field="version")
        model = _get(raw, "model", dict)
        builtin = model.get("builtin")
        path = model.get("path")
        if (builtin is None) == (path is None):
            raise ScenarioError("need exactly one of 'builtin' or 'path'", field="model")
        if builtin is not None and builtin != "tinynet":
            raise ScenarioError(f"unknown builtin model {builtin!r}", field="model.builtin")
        if path is not None:
            path = str(Path(base_dir or ".") / path)
            if not Path(path).exists():
                raise ScenarioError(f"model spec {path} does not exist", field="model.path")

        network = _get(raw, "network", dict)
        presets = tuple(network.get("presets", ()))
        for p in presets:
            if p not in NETWORK_PRESETS_MBPS:
                raise ScenarioError(f"unknown preset {p!r}; valid: "
                                    f"{sorted(NETWORK_PRESETS_MBPS)}", field="network.presets")
        conditions = tuple(
            _parse_condition(c, i) for i, c in enumerate(network.get("conditions", ())))
        if not presets and not conditions:
            raise ScenarioError("need presets and/or conditions", field="network")

        compute = _get(raw, "compute", dict)
        try:
            caps = ComputeCapability(edge_flops=float(_get(compute, "edge_flops", (int, float))),
                                     cloud_flops=float(_get(compute, "cloud_flops", (int, float))))
        except ValueError as exc:
            raise ScenarioError(str(exc), field="compute") from exc

        privacy = _parse_privacy(raw.get("privacy"))
        attack = _parse_attack(raw.get("attack"))

        return cls(
            raw=raw,
            model_builtin=builtin,
            model_seed=int(model.get("seed", 7)),
            model_path=path,
            presets=presets,
            conditions=conditions,
            compute=caps,
            bits_per_element=int(raw.get("bits_per_element", 64)),
            pixel_peak=float(raw.get("pixel_peak", 1.0)),
            seed=int(raw.get("seed", 0)),
            privacy=privacy,
            attack=attack,
            output_dir=str(raw.get("output_dir", "splitshield-out")),
        )

    def hash(self) -> str:
        return scenario_hash(self.raw)

    def build_model(self) -> ModelGraph:
        if self.model_builtin == "tinynet":
            return build_tinynet(self.model_seed)
        return load_model(self.model_path)

    def input_sampler(self, model: ModelGraph):
        if self.model_builtin == "tinynet":
            return sample_tinynet_inputs
        return uniform_input_sampler(model.input_shape)

    def with_seed_override(self, seed: int) -> "Scenario":
        """A copy whose master seed and per-run seed lists are replaced by `seed`."""
        raw = json.loads(json.dumps(self.raw))
        raw["seed"] = seed
        for block in ("privacy", "attack"):
            if isinstance(raw.get(block), dict):
                raw[block]["seeds"] = [seed]
        return Scenario.from_dict(raw)


def scenario_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(canon).hexdigest()


def _get(d: dict, key: str, types) -> object:
    if key not in d:
        raise ScenarioError("missing required field", field=key)
    val = d[key]
    if not isinstance(val, types):
        raise ScenarioError(f"expected {types}, got {type(val).__name__}", field=key)
    return val


def _parse_condition(c: dict, index: int) -> NetworkCondition:
    where = f"network.conditions[{index}]"
    try:
        return NetworkCondition(
            bandwidth_hz=float(c["bandwidth_hz"]),
            transmit_power_w=float(c["transmit_power_w"]),
            channel_gain=float(c["channel_gain"]),
            noise_power_w=float(c["noise_power_w"]),
            interference_w=float(c.get("interference_w", 0.0)),
            timestamp=float(c.get("timestamp", float(index))),
        )
    except KeyError as exc:
        raise ScenarioError(f"missing {exc.args[0]!r}", field=where) from exc
    except ValueError as exc:
        raise ScenarioError(str(exc), field=where) from exc


def _parse_clip(block: dict, where: str) -> tuple[str, float | None]:
    clip = block.get("clip", {"mode": "median"})
    mode = clip.get("mode", "median")
    if mode == "median":
        return "median", None
    if mode == "fixed":
        value = clip.get("value")
        if not (isinstance(value, (int, float)) and value > 0):
            raise ScenarioError("fixed clip needs a positive 'value'", field=f"{where}.clip")
        return "fixed", float(value)
    raise ScenarioError(f"unknown clip mode {mode!r}", field=f"{where}.clip.mode")


def _parse_epsilons(block: dict, where: str) -> tuple[float, ...]:
    grid = block.get("epsilon_grid")
    if not isinstance(grid, list) or not grid:
        raise ScenarioError("epsilon_grid must be a non-empty list",
                            field=f"{where}.epsilon_grid")
    out = []
    for e in grid:
        e = float(e)
        if not (e > 0 and math.isfinite(e)):
            raise ScenarioError(f"epsilon {e} must be finite and > 0",
                                field=f"{where}.epsilon_grid")
        out.append(e)
    return tuple(out)


def _parse_mechanisms(block: dict, where: str, default) -> tuple[str, ...]:
    mechs = tuple(block.get("mechanisms", default))
    for m in mechs:
        if m not in ALL_MECHANISMS:
            raise ScenarioError(f"unknown mechanism {m!r}; valid: {ALL_MECHANISMS}",
                                field=f"{where}.mechanisms")
    return mechs


def _parse_seeds(block: dict, where: str) -> tuple[int, ...]:
    seeds = block.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        raise ScenarioError("seeds must be a non-empty list", field=f"{where}.seeds")
    return tuple(int(s) for s in seeds)


def _parse_privacy(block: dict | None) -> PrivacyBlock | None:
    if block is None:
        return None
    where = "privacy"
    clip_mode, clip_value = _parse_clip(block, where)
    return PrivacyBlock(
        split_layer=int(_get(block, "split_layer", int)),
        epsilon_grid=_parse_epsilons(block, where),
        mechanisms=_parse_mechanisms(block, where, ALL_MECHANISMS),
        clip_mode=clip_mode,
        clip_value=clip_value,
        calibration_size=int(block.get("calibration_size", 32)),
        rank_tolerance=float(block.get("rank_tolerance", 1e-6)),
        seeds=_parse_seeds(block, where),
        eval_batch=int(block.get("eval_batch", 64)),
    )


def _parse_attack(block: dict | None) -> AttackBlock | None:
    if block is None:
        return None
    where = "attack"
    attacks = tuple(block.get("attacks", ALL_ATTACKS))
    for a in attacks:
        if a not in ALL_ATTACKS:
            raise ScenarioError(f"unknown attack {a!r}; valid: {ALL_ATTACKS}",
                                field=f"{where}.attacks")
    wra_cfg = block.get("wra", {})
    bina_cfg = block.get("bina", {})
    try:
        wra = WraConfig(
            tv_weight=float(wra_cfg.get("tv_weight", 1e-3)),
            tv_exponent=float(wra_cfg.get("tv_exponent", 2.0)),
            step_size=float(wra_cfg.get("step_size", 0.05)),
            max_iters=int(wra_cfg.get("max_iters", 1000)),
            init=wra_cfg.get("init", "zeros"),
            init_seed=int(wra_cfg.get("init_seed", 0)),
            tol=float(wra_cfg.get("tol", 0.0)),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc), field=f"{where}.wra") from exc
    bina = BinaBlock(
        hidden=tuple(int(h) for h in bina_cfg.get("hidden", [256])),
        query_count=int(bina_cfg.get("query_count", 512)),
        epochs=int(bina_cfg.get("epochs", 40)),
        batch_size=int(bina_cfg.get("batch_size", 32)),
        step_size=float(bina_cfg.get("step_size", 1.5)),
    )
    clip_mode, clip_value = _parse_clip(block, where)
    return AttackBlock(
        split_layer=int(_get(block, "split_layer", int)),
        attacks=attacks,
        mechanisms=_parse_mechanisms(block, where, ALL_MECHANISMS),
        epsilon_grid=_parse_epsilons(block, where),
        seeds=_parse_seeds(block, where),
        wra=wra,
        bina=bina,
        clip_mode=clip_mode,
        clip_value=clip_value,
        calibration_size=int(block.get("calibration_size", 32)),
        rank_tolerance=float(block.get("rank_tolerance", 1e-6)),
    )


def default_scenario_dict() -> dict:
    """The built-in tinynet scenario exercising every sweep."""
    return {
        "version": SCENARIO_VERSION,
        "model": {"builtin": "tinynet", "seed": 7},
        "network": {"presets": ["poor", "medium", "good", "excellence"]},
        "compute": {"edge_flops": 5.0e6, "cloud_flops": 5.0e8},
        "bits_per_element": 64,
        "pixel_peak": 1.0,
        "seed": 0,
        "privacy": {
            "split_layer": SPLIT_LAYER,
            "epsilon_grid": [10.0, 30.0, 100.0, 1.0e9],
            "mechanisms": list(ALL_MECHANISMS),
            "clip": {"mode": "fixed", "value": 2.3},
            "calibration_size": 32,
            "rank_tolerance": 0.1,
            "seeds": [0, 1, 2, 3, 4],
            "eval_batch": 64,
        },
        "attack": {
            "split_layer": SPLIT_LAYER,
            "attacks": list(ALL_ATTACKS),
            "mechanisms": list(ALL_MECHANISMS),
            "epsilon_grid": [10.0, 30.0, 100.0],
            "seeds": list(range(10)),
            "clip": {"mode": "fixed", "value": 2.3},
            "calibration_size": 32,
            "rank_tolerance": 0.1,
            "wra": {"tv_weight": 1e-3, "tv_exponent": 2.0,
                    "step_size": 0.05, "max_iters": 1200},
            "bina": {"hidden": [256], "query_count": 512, "epochs": 40,
                     "batch_size": 32, "step_size": 1.5},
        },
        "output_dir": "splitshield-out",
    }
