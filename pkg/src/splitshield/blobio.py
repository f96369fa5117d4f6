"""Flat binary tensor blobs with a small self-describing header.

Layout (little-endian): magic b"SSTB", u16 version, u8 dtype tag
(0 = float64), u8 ndim, u32 per dimension, then the raw row-major data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SSTB"
BLOB_VERSION = 1
_DTYPE_TAGS = {0: "<f8"}


def write_tensor_blob(path: str | Path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    header = MAGIC + struct.pack("<HBB", BLOB_VERSION, 0, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.astype("<f8").tobytes())


def read_tensor_blob(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a tensor blob (bad magic)")
    version, tag, ndim = struct.unpack("<HBB", raw[4:8])
    if version != BLOB_VERSION:
        raise ValueError(f"{path}: unsupported blob version {version}")
    if tag not in _DTYPE_TAGS:
        raise ValueError(f"{path}: unknown dtype tag {tag}")
    shape = struct.unpack(f"<{ndim}I", raw[8:8 + 4 * ndim])
    data = np.frombuffer(raw[8 + 4 * ndim:], dtype=_DTYPE_TAGS[tag])
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: payload size does not match header shape {shape}")
    return data.reshape(shape).astype(np.float64)
