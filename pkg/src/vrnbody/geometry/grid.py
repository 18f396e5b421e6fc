"""Dense voxel grids, the IoU metric and the VOXL binary format.

Values are indexed ``[x, y, z]`` with shape ``(W, H, D)``. Voxel ``[i, j, k]``
has its center at grid coordinates ``(i + 0.5, j + 0.5, k + 0.5)``; the grid
also carries the uniform world-to-grid map ``g = scale * w + translation``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, UsageError

MAGIC = b"VOXL"
VERSION = 1
HEADER = struct.Struct("<4sI3IB")
FLAG_BINARY = 0
FLAG_REAL = 1
DEFAULT_THRESHOLD = 0.5


class VoxelGrid:
    def __init__(self, values, scale=1.0, translation=(0.0, 0.0, 0.0)):
        values = np.asarray(values)
        if values.ndim != 3:
            raise UsageError(f"voxel values must be 3-D (W, H, D), got shape {values.shape}")
        if values.dtype == bool:
            values = values.astype(np.uint8)
        if values.size and (values.min() < 0 or values.max() > 1):
            raise UsageError("voxel values must lie in [0, 1]")
        self.values = values
        self.scale = float(scale)
        self.translation = np.asarray(translation, np.float64).reshape(3)

    @classmethod
    def zeros(cls, dims, dtype=np.uint8):
        return cls(np.zeros(tuple(dims), dtype))

    @property
    def dims(self):
        return tuple(int(d) for d in self.values.shape)

    @property
    def is_binary(self):
        return self.values.dtype == np.uint8 or bool(np.all((self.values == 0) | (self.values == 1)))

    def occupancy(self, threshold=DEFAULT_THRESHOLD):
        """Boolean set-voxel mask; value >= threshold counts as set."""
        if self.values.dtype == np.uint8:
            return self.values.astype(bool)
        return self.values >= threshold

    def binarized(self, threshold=DEFAULT_THRESHOLD):
        return VoxelGrid(self.occupancy(threshold).astype(np.uint8), self.scale, self.translation)

    def world_to_grid(self, points):
        return np.asarray(points, np.float64) * self.scale + self.translation

    def grid_to_world(self, points):
        return (np.asarray(points, np.float64) - self.translation) / self.scale

    def copy(self):
        return VoxelGrid(self.values.copy(), self.scale, self.translation.copy())

    def __repr__(self):
        kind = "binary" if self.values.dtype == np.uint8 else "real"
        return f"VoxelGrid(dims={self.dims}, {kind})"


def _occupancy_of(grid, threshold):
    if isinstance(grid, VoxelGrid):
        return grid.occupancy(threshold)
    values = np.asarray(grid)
    return values.astype(bool) if values.dtype in (np.uint8, bool) else values >= threshold


def iou(a, b, threshold=DEFAULT_THRESHOLD):
    """Intersection over union of set voxels; two empty grids score 1.0."""
    oa = _occupancy_of(a, threshold)
    ob = _occupancy_of(b, threshold)
    if oa.shape != ob.shape:
        raise UsageError(f"iou needs identical dims, got {oa.shape} and {ob.shape}")
    union = np.count_nonzero(oa | ob)
    if union == 0:
        return 1.0
    return np.count_nonzero(oa & ob) / union


# ---------------------------------------------------------------- VOXL


def encode_grid(grid):
    """Serialize: header, then x-fastest values as packed bits or float32."""
    w, h, d = grid.dims
    flat = grid.values.reshape(-1, order="F")
    if grid.values.dtype == np.uint8:
        payload = np.packbits(flat.astype(bool), bitorder="little").tobytes()
        flag = FLAG_BINARY
    else:
        payload = flat.astype("<f4").tobytes()
        flag = FLAG_REAL
    return HEADER.pack(MAGIC, VERSION, w, h, d, flag) + payload


def decode_grid(data, path=None):
    where = f" in {path}" if path else ""
    if len(data) < HEADER.size:
        raise FormatError(f"truncated VOXL header{where}")
    magic, version, w, h, d, flag = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}{where}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported VOXL version {version}{where}")
    n = w * h * d
    body = data[HEADER.size:]
    if flag == FLAG_BINARY:
        need = (n + 7) // 8
        if len(body) < need:
            raise FormatError(f"truncated VOXL payload{where}: {len(body)} of {need} bytes")
        bits = np.unpackbits(np.frombuffer(body, np.uint8, need), count=n, bitorder="little")
        values = bits.astype(np.uint8)
    elif flag == FLAG_REAL:
        need = 4 * n
        if len(body) < need:
            raise FormatError(f"truncated VOXL payload{where}: {len(body)} of {need} bytes")
        values = np.frombuffer(body, "<f4", n).astype(np.float32)
    else:
        raise FormatError(f"unknown VOXL value flag {flag}{where}")
    return VoxelGrid(values.reshape((w, h, d), order="F"))


def save_grid(grid, path):
    Path(path).write_bytes(encode_grid(grid))


def load_grid(path):
    path = Path(path)
    return decode_grid(path.read_bytes(), str(path))
