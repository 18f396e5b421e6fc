"""VXFM checkpoint files: named float32 arrays in little-endian records.

Layout: ``b"VXFM"``, u32 version, then until end of file one record per
array: u32 name length, UTF-8 name, u32 rank, rank x u32 extents, raw
little-endian float32 values.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"VXFM"
VERSION = 1


def save_checkpoint(path, arrays):
    """Write ``arrays`` (name -> array) to ``path`` in insertion order."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            if arr.ndim:
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into an ordered ``dict`` of float32 arrays."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 8:
        raise FormatError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    pos = 8
    out = {}

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"{path}: truncated record at byte {pos}")
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    while pos < len(blob):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        count = int(np.prod(shape)) if rank else 1
        values = np.frombuffer(take(4 * count), dtype="<f4").astype(np.float32)
        out[name] = values.reshape(shape)
    return out
