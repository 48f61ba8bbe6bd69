"""Model checkpoints: EMCK magic, JSON architecture descriptor, f32 payload.

Layout: "EMCK" | u32 version | u32 descriptor length | descriptor JSON (UTF-8)
| concatenated little-endian float32 parameter arrays in declaration order.
Round-trips are bitwise, so reloaded models reproduce forward passes exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import CorruptCheckpoint
from ..fileio import atomic_write_bytes
from .models import Autoencoder, Mapper

_MAGIC = b"EMCK"
_VERSION = 1
_HEADER = struct.Struct("<4sII")

_MODEL_KINDS = {Autoencoder.kind: Autoencoder, Mapper.kind: Mapper}


def _descriptor(model) -> dict:
    return {"kind": model.kind, "layers": [layer.descriptor() for layer in model.layers]}


def save_checkpoint(model, path) -> None:
    desc = json.dumps(_descriptor(model), sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in model.parameters())
    atomic_write_bytes(path, _HEADER.pack(_MAGIC, _VERSION, len(desc)) + desc + payload)


def load_checkpoint(path, expected_kind: str | None = None):
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise CorruptCheckpoint(f"{path}: truncated header")
    magic, version, desc_len = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise CorruptCheckpoint(f"{path}: unsupported version {version}")
    if len(blob) < _HEADER.size + desc_len:
        raise CorruptCheckpoint(f"{path}: truncated descriptor")
    try:
        desc = json.loads(blob[_HEADER.size : _HEADER.size + desc_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable descriptor") from exc

    kind = desc.get("kind")
    if kind not in _MODEL_KINDS:
        raise CorruptCheckpoint(f"{path}: unknown model kind {kind!r}")
    if expected_kind is not None and kind != expected_kind:
        raise CorruptCheckpoint(f"{path}: expected a {expected_kind} checkpoint, found {kind}")
    model = _MODEL_KINDS[kind](seed=None)
    if desc != _descriptor(model):
        raise CorruptCheckpoint(f"{path}: architecture descriptor does not match {kind}")

    params = model.parameters()
    expected = sum(p.size for p in params) * 4
    payload = blob[_HEADER.size + desc_len :]
    if len(payload) != expected:
        raise CorruptCheckpoint(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    offset = 0
    for p in params:
        nbytes = p.size * 4
        values = np.frombuffer(payload, dtype="<f4", count=p.size, offset=offset)
        p[...] = values.reshape(p.shape)
        offset += nbytes
    return model
