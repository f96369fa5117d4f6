"""Deterministic result emission: CSV tables, a JSON record, and a manifest.

Floats are canonicalized to 9 significant digits when rows are constructed,
so in-memory records, JSON and CSV all agree and re-emitting the same record
is byte-identical. Infinities (an unprotected release's budget, the PSNR of
a perfect reconstruction) serialize as the string sentinel "infinite".
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict
from pathlib import Path

from ..blobio import write_tensor_blob


def round9(x: float) -> float:
    """Canonical 9-significant-digit value used everywhere in reports."""
    x = float(x)
    if math.isinf(x):
        return x
    if math.isnan(x):
        raise ValueError("NaN has no place in a report")
    return float(f"{x:.9g}")


def fmt9(x) -> str:
    """CSV cell text for one value."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        if math.isinf(x):
            return "infinite"
        return f"{x:.9g}"
    return str(x)


def _jsonable(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "infinite"
        if math.isnan(value):
            raise ValueError("NaN has no place in a report")
        return value
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _f(value) -> float:
    return math.inf if value == "infinite" else float(value)


PARTITION_COLUMNS = ("label", "rate_mbps", "split", "total_s", "edge_s", "uplink_s",
                     "cloud_s", "downlink_s", "cloud_only_s", "device_only_s",
                     "speedup_vs_device", "speedup_vs_cloud")
PRIVACY_COLUMNS = ("mechanism", "epsilon", "seed", "agreement", "clip_threshold")
ATTACK_COLUMNS = ("attack", "mechanism", "epsilon", "seed", "tv_weight", "mse",
                  "ssim", "psnr_db", "objective_final", "blob")
PROFILE_COLUMNS = ("layer", "kind", "flops", "edge_s", "cloud_s", "output_bits")


def record_to_dict(record) -> dict:
    return _jsonable({
        "tool_version": record.tool_version,
        "scenario_hash": record.scenario_hash,
        "master_seed": record.master_seed,
        "scenario": record.scenario,
        "profile_rows": [asdict(r) for r in record.profile_rows],
        "partition_rows": [asdict(r) for r in record.partition_rows],
        "privacy_rows": [asdict(r) for r in record.privacy_rows],
        "attack_rows": [asdict(r) for r in record.attack_rows],
    })


def record_from_dict(data: dict):
    from .runner import (AllocationEntry, AttackRow, PartitionRow, PrivacyRow,
                         ProfileRow, RunRecord)

    def privacy_row(d):
        alloc = tuple(AllocationEntry(filter=int(e["filter"]), rank=float(e["rank"]),
                                      epsilon=_f(e["epsilon"]),
                                      noise_scale=_f(e["noise_scale"]))
                      for e in d["allocation"])
        return PrivacyRow(mechanism=d["mechanism"], epsilon=_f(d["epsilon"]),
                          seed=int(d["seed"]), agreement=float(d["agreement"]),
                          clip_threshold=float(d["clip_threshold"]), allocation=alloc)

    def attack_row(d):
        tv = d["tv_weight"]
        return AttackRow(attack=d["attack"], mechanism=d["mechanism"],
                         epsilon=_f(d["epsilon"]), seed=int(d["seed"]),
                         tv_weight=None if tv is None else float(tv),
                         mse=float(d["mse"]), ssim=float(d["ssim"]),
                         psnr_db=_f(d["psnr_db"]),
                         objective_final=float(d["objective_final"]), blob=d["blob"])

    return RunRecord(
        tool_version=data["tool_version"],
        scenario_hash=data["scenario_hash"],
        scenario=data["scenario"],
        master_seed=int(data["master_seed"]),
        profile_rows=tuple(ProfileRow(**r) for r in data["profile_rows"]),
        partition_rows=tuple(PartitionRow(**r) for r in data["partition_rows"]),
        privacy_rows=tuple(privacy_row(r) for r in data["privacy_rows"]),
        attack_rows=tuple(attack_row(r) for r in data["attack_rows"]),
    )


def record_from_json(path: str | Path):
    return record_from_dict(json.loads(Path(path).read_text()))


def _dump_json(data: dict) -> bytes:
    return (json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n").encode()


def _dump_csv(columns, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        d = asdict(row)
        writer.writerow([fmt9(d[c]) for c in columns])
    return buf.getvalue().encode()


def _allocation_dump(privacy_rows) -> list[dict]:
    dumped, seen = [], set()
    for row in privacy_rows:
        key = (row.mechanism, row.epsilon)
        if key in seen or not row.allocation:
            continue
        seen.add(key)
        dumped.append({"mechanism": row.mechanism, "epsilon": row.epsilon,
                       "allocation": [asdict(e) for e in row.allocation]})
    return dumped


def emit_report(record, out_dir: str | Path, formats=("csv", "json")) -> list[Path]:
    """Write the record's tables, blobs and manifest under out_dir.

    Emission is a pure function of the record: the same record always
    produces byte-identical files. The wall clock never reaches disk.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payloads: dict[str, bytes] = {}
    absent: dict[str, str] = {}

    if "json" in formats:
        payloads["record.json"] = _dump_json(record_to_dict(record))
    if "csv" in formats:
        tables = (("partition.csv", PARTITION_COLUMNS, record.partition_rows),
                  ("privacy.csv", PRIVACY_COLUMNS, record.privacy_rows),
                  ("attack.csv", ATTACK_COLUMNS, record.attack_rows),
                  ("profile.csv", PROFILE_COLUMNS, record.profile_rows))
        for name, columns, rows in tables:
            if rows:
                payloads[name] = _dump_csv(columns, rows)
            else:
                absent[name] = "absent (no rows)"
    if record.privacy_rows:
        payloads["allocations.json"] = _dump_json(
            {"scenario_hash": record.scenario_hash,
             "allocations": _allocation_dump(record.privacy_rows)})

    written = []
    for name in sorted(payloads):
        path = out_dir / name
        path.write_bytes(payloads[name])
        written.append(path)

    for name, arr in record.reconstructions:
        path = out_dir / name
        write_tensor_blob(path, arr)
        payloads[name] = path.read_bytes()
        written.append(path)

    manifest = {
        "tool_version": record.tool_version,
        "scenario_hash": record.scenario_hash,
        "files": {name: {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
                  for name, data in sorted(payloads.items())},
        "absent": absent,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_bytes(_dump_json(manifest))
    written.append(manifest_path)
    return written
