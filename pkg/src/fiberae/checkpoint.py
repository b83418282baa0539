"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"FAEC"            magic
    u16                format version (currently 1)
    u32                byte length L of the header
    L bytes            UTF-8 JSON header, keys sorted, no whitespace
    float64[...]       parameter arrays, little-endian, concatenated in the
                       order of header["parameters"]

The header holds ``model`` (architecture hyperparameters), ``parameters``
(a list of ``[name, shape]``), ``channel`` (the training channel config or
null) and free-form ``meta``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .transceiver import model_from_hyperparameters

MAGIC = b"FAEC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def to_bytes(model, channel=None, meta=None) -> bytes:
    named = model.named_parameters()
    header = {
        "model": model.hyperparameters(),
        "parameters": [[name, list(p.shape)] for name, p in named],
        "channel": channel.to_dict() if hasattr(channel, "to_dict") else channel,
        "meta": meta or {},
    }
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(p.value, dtype="<f8").tobytes() for _, p in named)
    return MAGIC + struct.pack("<HI", VERSION, len(text)) + text + body


def from_bytes(data: bytes):
    """Returns ``(model, header)``."""
    if len(data) < 10 or data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if len(data) < 10 + hlen:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[10:10 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    model = model_from_hyperparameters(header["model"])
    named = model.named_parameters()
    declared = header["parameters"]
    if [n for n, _ in named] != [n for n, _ in declared]:
        raise CheckpointError("parameter list does not match the declared architecture")
    offset = 10 + hlen
    for (name, p), (_, shape) in zip(named, declared):
        if tuple(shape) != p.shape:
            raise CheckpointError(f"dimension mismatch for {name}: file {tuple(shape)}, model {p.shape}")
        nbytes = 8 * p.value.size
        if len(data) < offset + nbytes:
            raise CheckpointError(f"truncated checkpoint while reading {name}")
        p.value[...] = np.frombuffer(data, dtype="<f8", count=p.value.size, offset=offset).reshape(p.shape)
        offset += nbytes
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after parameter data")
    return model, header


def save(model, path, channel=None, meta=None):
    Path(path).write_bytes(to_bytes(model, channel, meta))


def load(path):
    return from_bytes(Path(path).read_bytes())
