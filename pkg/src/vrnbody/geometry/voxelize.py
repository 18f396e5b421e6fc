"""Watertight voxelization by per-column ray parity.

Overlapping closed components (a body made of interpenetrating capsules) are
filled one at a time and OR-ed, so overlaps are not cancelled by parity.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .grid import VoxelGrid
from .raster import column_crossings

FIT_MARGIN = 4
DEPTH_MARGIN = 1


def fit_transform(mesh, dims, margin=FIT_MARGIN, depth_margin=DEPTH_MARGIN):
    """World-to-grid ``(scale, translation)`` for the default fit.

    XY is scaled uniformly to fill ``[margin, W - margin] x [margin, H - margin]``
    and centered; the same scale applies to Z, and the mean vertex Z maps to
    the middle depth ``D / 2``. If the mesh would then poke out of the depth
    range (less ``depth_margin``), the scale shrinks until it fits.
    """
    w, h, d = dims
    if w <= 2 * margin or h <= 2 * margin:
        raise ConfigurationError(f"grid {w}x{h} too small for a {margin}-voxel fit margin")
    lo, hi = mesh.bounds()
    extent = hi[:2] - lo[:2]
    room = np.array([w - 2 * margin, h - 2 * margin], np.float64)
    ratios = [room[i] / extent[i] for i in range(2) if extent[i] > 0]
    if not ratios:
        raise ConfigurationError("mesh has no XY extent to fit")
    scale = min(ratios)
    z = mesh.vertices[:, 2]
    reach = np.abs(z - z.mean()).max()
    if reach > 0:
        scale = min(scale, (d / 2 - depth_margin) / reach)
    center = (lo[:2] + hi[:2]) / 2
    tx, ty = np.array([w / 2, h / 2]) - scale * center
    tz = d / 2 - scale * mesh.vertices[:, 2].mean()
    return scale, np.array([tx, ty, tz])


def parity_fill(vertices, triangles, dims, keep_thin=False):
    """Occupancy of one closed surface: centers with an odd number of crossings below them.

    With ``keep_thin``, an inside run of a column that contains no voxel
    center (a part thinner than a voxel) sets the voxel holding its midpoint,
    so every column the surface covers keeps at least one voxel.
    """
    w, h, d = dims
    px, py, z, _ = column_crossings(vertices, triangles, w, h)
    # crossing at depth z toggles every center k + 0.5 > z
    k = np.clip(np.floor(z - 0.5).astype(np.int64) + 1, 0, d)
    flat = (px * h + py) * (d + 1) + k
    toggles = np.bincount(flat, minlength=w * h * (d + 1)).reshape(w, h, d + 1)
    occ = (np.cumsum(toggles, axis=2)[:, :, :d] & 1).astype(bool)
    if keep_thin and len(z):
        col = px * h + py
        order = np.lexsort((z, col))
        col, zs = col[order], z[order]
        first = np.r_[True, col[1:] != col[:-1]]
        rank = np.arange(len(col)) - np.maximum.accumulate(np.where(first, np.arange(len(col)), 0))
        counts = np.bincount(col, minlength=w * h)
        # pair entries with exits in columns crossed an even number of times
        start = np.flatnonzero((rank % 2 == 0) & (counts[col] % 2 == 0))
        z0, z1, c = zs[start], zs[start + 1], col[start]
        k_lo = np.floor(z0 - 0.5).astype(np.int64) + 1
        k_hi = np.floor(z1 - 0.5).astype(np.int64)
        thin = k_lo > k_hi
        km = np.clip(np.floor((z0[thin] + z1[thin]) / 2).astype(np.int64), 0, d - 1)
        occ[c[thin] // h, c[thin] % h, km] = True
    return occ


def voxelize(mesh, dims, transform=None, margin=FIT_MARGIN, keep_thin=False):
    """Binary occupancy of ``mesh`` on a ``(W, H, D)`` grid.

    ``transform`` is a world-to-grid ``(scale, translation)``; by default it is
    chosen by ``fit_transform``. A voxel is set when its center is inside;
    ``keep_thin`` additionally keeps sub-voxel parts (see ``parity_fill``).
    """
    dims = tuple(int(x) for x in dims)
    if len(dims) != 3 or min(dims) <= 0:
        raise ConfigurationError(f"bad grid dims {dims}")
    mesh.require_closed()
    if transform is None:
        transform = fit_transform(mesh, dims, margin)
    scale, translation = transform
    verts = mesh.vertices * scale + np.asarray(translation, np.float64)
    occ = np.zeros(dims, bool)
    for tri_ids in mesh.components():
        occ |= parity_fill(verts, mesh.triangles[tri_ids], dims, keep_thin)
    return VoxelGrid(occ.astype(np.uint8), scale, translation)
