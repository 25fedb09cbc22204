"""Bit-exact checkpoint container.

Layout: 8-byte magic ``SBCKPT01``, an 8-byte little-endian unsigned header
length, the UTF-8 JSON header, then raw little-endian tensor blobs packed
in header order.  The header carries arbitrary metadata (the model spec)
plus one entry per tensor: name, shape, dtype, and byte offset relative to
the start of the blob section.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

MAGIC = b"SBCKPT01"


def write_checkpoint(
    path: str | Path, meta: dict, tensors: dict[str, np.ndarray]
) -> None:
    entries = []
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        little = np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<"), copy=False)
        blob = little.tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": little.dtype.str,
                "offset": offset,
            }
        )
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"meta": meta, "tensors": entries}).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a checkpoint; raises CheckpointError on any structural defect."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8:
        raise CheckpointError(f"{path}: truncated before header")
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(
            f"{path}: bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}"
        )
    (header_len,) = struct.unpack("<Q", data[len(MAGIC) : len(MAGIC) + 8])
    header_start = len(MAGIC) + 8
    blob_start = header_start + header_len
    if len(data) < blob_start:
        raise CheckpointError(f"{path}: truncated inside header")
    try:
        header = json.loads(data[header_start:blob_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable header: {e}") from None
    tensors: dict[str, np.ndarray] = {}
    expected_end = blob_start
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
        start = blob_start + entry["offset"]
        end = start + nbytes
        if end > len(data):
            raise CheckpointError(
                f"{path}: truncated blob for tensor {entry['name']!r}"
            )
        arr = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape, dtype=np.int64)), offset=start)
        tensors[entry["name"]] = arr.reshape(shape).copy()
        expected_end = max(expected_end, end)
    if expected_end != len(data):
        raise CheckpointError(
            f"{path}: {len(data) - expected_end} unexpected trailing bytes"
        )
    return header["meta"], tensors
