"""Versioned binary container of named float64 tensors.

Layout::

    b"JALMTPCK" | u32 little-endian header length | UTF-8 JSON header | payload

The header carries ``format_version``, the global ``seed``, free-form ``meta``
and one ``{name, shape, offset}`` entry per tensor; ``offset`` counts float64
values into the payload, which is every tensor's row-major little-endian data
back to back in header order.
"""

import json
import struct

import numpy as np

from .tensor import Tensor

MAGIC = b"JALMTPCK"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors, seed, meta=None):
    entries = []
    chunks = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.asarray(arr.data if isinstance(arr, Tensor) else arr, dtype="<f8", order="C")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    header = json.dumps(
        {"format_version": FORMAT_VERSION, "seed": int(seed), "meta": meta or {}, "tensors": entries},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for c in chunks:
            fh.write(c)


def load_checkpoint(path):
    """Returns ``(tensors: dict[name, ndarray], seed, meta)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", blob[8:12])
    try:
        header = json.loads(blob[12:12 + hlen].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    payload = np.frombuffer(blob, dtype="<f8", offset=12 + hlen)
    tensors = {}
    for e in header["tensors"]:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        chunk = payload[e["offset"]:e["offset"] + n]
        if chunk.size != n:
            raise CheckpointError(f"{path}: truncated payload for {e['name']}")
        tensors[e["name"]] = chunk.astype(np.float64).reshape(tuple(e["shape"]))
    return tensors, header["seed"], header.get("meta", {})
