"""Scenario runner, report emitter and CLI."""

from .report import emit_report, record_from_json, round9
from .runner import (QueryOracle, RunRecord, build_mirror_decoder,
                     run_attack_campaign, run_partition_sweep,
                     run_privacy_sweep, run_profile)
from .scenario import (MODEL_DEPTH_METADATA, NETWORK_PRESETS_MBPS, Scenario,
                       default_scenario_dict)
from .tinynet import build_tinynet, sample_tinynet_inputs

__all__ = [
    "emit_report", "record_from_json", "round9",
    "QueryOracle", "RunRecord", "build_mirror_decoder",
    "run_attack_campaign", "run_partition_sweep", "run_privacy_sweep", "run_profile",
    "MODEL_DEPTH_METADATA", "NETWORK_PRESETS_MBPS", "Scenario", "default_scenario_dict",
    "build_tinynet", "sample_tinynet_inputs",
]
