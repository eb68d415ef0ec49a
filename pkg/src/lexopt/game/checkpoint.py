"""Binary checkpoint container for agent parameters.

Layout: an 8-byte magic header, one version byte, a little-endian uint32
manifest length, the JSON manifest, then the raw tensor payload.  The
manifest lists every tensor as (name, shape, dtype '<f8', byte offset into
the payload, row-major) plus arbitrary metadata (training config, epoch).
Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import AgentParams, GameDims

__all__ = ["MAGIC", "VERSION", "CheckpointFormatError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"LEXOPTCK"
VERSION = 1
_DTYPE = "<f8"


class CheckpointFormatError(ValueError):
    """The file is not a readable checkpoint of a supported version."""


def save_checkpoint(path, params: AgentParams, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    offset = 0
    for name, tensor in params.tensors.items():
        raw = np.ascontiguousarray(tensor, dtype=_DTYPE).tobytes()
        entries.append(
            {"name": name, "shape": list(tensor.shape), "dtype": _DTYPE, "offset": offset}
        )
        chunks.append(raw)
        offset += len(raw)
    manifest = {"tensors": entries, "meta": meta or {}}
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    blob = MAGIC + bytes([VERSION]) + struct.pack("<I", len(manifest_bytes)) + manifest_bytes + b"".join(chunks)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)


def _dims_from_meta(meta: dict, tensors: dict) -> GameDims:
    config = meta.get("config") or {}
    try:
        return GameDims(
            d=int(config.get("d", tensors["speaker.input_proj"].shape[0])),
            d_h=int(config.get("d_h", tensors["speaker.hidden"].shape[0])),
            vocab_size=int(config.get("vocab_size", tensors["speaker.lexicon"].shape[0])),
            n_layers=int(config.get("layers", 3)),
        )
    except KeyError as exc:
        raise CheckpointFormatError(f"manifest missing tensor {exc}") from None


def load_checkpoint(path) -> tuple[AgentParams, dict]:
    path = Path(path)
    blob = path.read_bytes()
    header_len = len(MAGIC) + 1 + 4
    if len(blob) < header_len:
        raise CheckpointFormatError(f"{path}: truncated header")
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic; not a checkpoint file")
    version = blob[len(MAGIC)]
    if version != VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    (manifest_len,) = struct.unpack_from("<I", blob, len(MAGIC) + 1)
    manifest_end = header_len + manifest_len
    if len(blob) < manifest_end:
        raise CheckpointFormatError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(blob[header_len:manifest_end].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: unreadable manifest: {exc}") from None
    payload = blob[manifest_end:]

    tensors = {}
    for entry in manifest.get("tensors", []):
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = int(entry["offset"])
        stop = start + count * 8
        if entry.get("dtype") != _DTYPE:
            raise CheckpointFormatError(f"{path}: unsupported dtype {entry.get('dtype')!r}")
        if stop > len(payload):
            raise CheckpointFormatError(f"{path}: truncated payload for {entry['name']!r}")
        tensors[entry["name"]] = (
            np.frombuffer(payload[start:stop], dtype=_DTYPE).reshape(shape).copy()
        )
    meta = manifest.get("meta", {})
    dims = _dims_from_meta(meta, tensors)
    try:
        params = AgentParams(dims, tensors)
    except ValueError as exc:
        raise CheckpointFormatError(f"{path}: {exc}") from None
    return params, meta
