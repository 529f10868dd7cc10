"""Flat binary parameter checkpoints.

Layout: ``MAGIC`` (8 bytes), format version (uint32 LE), manifest length
(uint32 LE), UTF-8 JSON manifest ``{"params": [{"name", "shape"}, ...],
"meta": {...}}``, then every parameter as little-endian float32 in
manifest order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CEBDCKPT"
VERSION = 1


def to_bytes(state: dict, meta: dict | None = None) -> bytes:
    manifest = {
        "params": [{"name": name, "shape": list(np.shape(arr))} for name, arr in state.items()],
        "meta": meta or {},
    }
    header = json.dumps(manifest, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(arr, dtype="<f4").tobytes() for arr in state.values())
    return MAGIC + struct.pack("<II", VERSION, len(header)) + header + body


def from_bytes(blob: bytes) -> tuple[dict, dict]:
    if blob[:8] != MAGIC:
        raise ValueError("not a checkpoint: bad magic")
    version, n = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    manifest = json.loads(blob[16 : 16 + n].decode("utf-8"))
    offset = 16 + n
    state = {}
    for entry in manifest["params"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        end = offset + 4 * count
        if end > len(blob):
            raise ValueError("truncated checkpoint")
        state[entry["name"]] = np.frombuffer(blob[offset:end], dtype="<f4").reshape(entry["shape"]).astype(np.float32)
        offset = end
    if offset != len(blob):
        raise ValueError("trailing bytes after checkpoint payload")
    return state, manifest.get("meta", {})


def save_checkpoint(path, state: dict, meta: dict | None = None) -> None:
    Path(path).write_bytes(to_bytes(state, meta))


def load_checkpoint(path) -> tuple[dict, dict]:
    return from_bytes(Path(path).read_bytes())
