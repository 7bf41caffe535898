"""Checkpoint container: JSON manifest followed by a raw little-endian f32 payload.

Layout::

    b"DGATCKP1" | u64 LE manifest length | manifest (UTF-8 JSON) | payload

The manifest carries a ``tensors`` table of ``{name, shape, offset}`` where
``offset`` counts f32 elements from the start of the payload. Files are written
to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"DGATCKP1"


class CheckpointError(ValueError):
    pass


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode(tensors: Mapping[str, np.ndarray], manifest: Mapping) -> bytes:
    table, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        table.append({"name": name, "shape": list(arr32.shape), "offset": offset})
        chunks.append(arr32.tobytes())
        offset += arr32.size
    head = dict(manifest)
    head["tensors"] = table
    blob = json.dumps(head, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<Q", len(blob)) + blob + b"".join(chunks)


def decode(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if data[:8] != MAGIC:
        raise CheckpointError("not a dgat checkpoint")
    if len(data) < 16:
        raise CheckpointError("truncated checkpoint header")
    (size,) = struct.unpack("<Q", data[8:16])
    try:
        manifest = json.loads(data[16:16 + size])
        entries = manifest["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"corrupt checkpoint manifest: {exc}") from None
    payload = np.frombuffer(data[16 + size:], dtype="<f4")
    tensors = {}
    for entry in entries:
        count = int(np.prod(entry["shape"]))
        chunk = payload[entry["offset"]:entry["offset"] + count]
        if chunk.size != count:
            raise CheckpointError(f"truncated payload for {entry['name']}")
        tensors[entry["name"]] = chunk.astype(np.float64).reshape(entry["shape"])
    return manifest, tensors


def save(path: str | Path, tensors: Mapping[str, np.ndarray], manifest: Mapping) -> None:
    atomic_write_bytes(path, encode(tensors, manifest))


def load(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    return decode(Path(path).read_bytes())
