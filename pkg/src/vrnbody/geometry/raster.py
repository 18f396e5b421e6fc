"""Exact column/ray crossings of a mesh with the pixel-center lattice.

Every pixel center ``(x + 0.5, y + 0.5)`` casts a ray along +Z. A triangle
covers a center by the usual top-left fill convention, evaluated so that the
two triangles sharing an edge compute bit-identical (negated) edge values.
On a closed mesh each covered column therefore crosses every surface sheet
exactly once, which makes parity fills and z-buffers agree with each other.
"""

from __future__ import annotations

import numpy as np


def _edge_values(pa, pb, ia, ib, px, py):
    """Edge function of directed edge a->b at p, computed from the lower vertex index."""
    swap = ia > ib
    ax = np.where(swap, pb[:, 0], pa[:, 0])
    ay = np.where(swap, pb[:, 1], pa[:, 1])
    bx = np.where(swap, pa[:, 0], pb[:, 0])
    by = np.where(swap, pa[:, 1], pb[:, 1])
    value = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    return np.where(swap, -value, value)


def _tie_wins(pa, pb, orient):
    """Antisymmetric tie-break: a center lying exactly on an edge goes to one side only."""
    dx = (pb[:, 0] - pa[:, 0]) * orient
    dy = (pb[:, 1] - pa[:, 1]) * orient
    return (dy < 0) | ((dy == 0) & (dx < 0))


def column_crossings(vertices, triangles, width, height):
    """All (column, depth) crossings of triangles with pixel-center rays.

    ``vertices`` are in grid coordinates. Returns ``(px, py, z, tri)``:
    integer pixel coordinates, crossing depth, and the triangle index.
    Triangles with zero projected area are skipped.
    """
    v = np.asarray(vertices, np.float64)
    t = np.asarray(triangles, np.int64)
    empty = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64))
    if len(t) == 0:
        return empty
    p = v[t]
    xy = p[:, :, :2]
    area2 = ((xy[:, 1, 0] - xy[:, 0, 0]) * (xy[:, 2, 1] - xy[:, 0, 1])
             - (xy[:, 1, 1] - xy[:, 0, 1]) * (xy[:, 2, 0] - xy[:, 0, 0]))
    lo = np.ceil(xy.min(axis=1) - 0.5).astype(np.int64)
    hi = np.floor(xy.max(axis=1) - 0.5).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi[:, 0] = np.minimum(hi[:, 0], width - 1)
    hi[:, 1] = np.minimum(hi[:, 1], height - 1)
    span = np.maximum(hi - lo + 1, 0)
    count = span[:, 0] * span[:, 1] * (area2 != 0)
    keep = np.flatnonzero(count)
    if len(keep) == 0:
        return empty

    # enumerate every (triangle, candidate pixel) pair in the bounding boxes
    count = count[keep]
    tri = np.repeat(keep, count)
    start = np.repeat(np.cumsum(count) - count, count)
    offset = np.arange(count.sum()) - start
    nx = span[tri, 0]
    px = lo[tri, 0] + offset % nx
    py = lo[tri, 1] + offset // nx
    cx = px + 0.5
    cy = py + 0.5

    orient = np.sign(area2[tri])
    corners = [xy[tri, k] for k in range(3)]
    ids = [t[tri, k] for k in range(3)]
    inside = np.ones(len(tri), bool)
    lam = []
    # edge opposite vertex k runs from vertex k+1 to vertex k+2
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        e = _edge_values(corners[a], corners[b], ids[a], ids[b], cx, cy) * orient
        inside &= (e > 0) | ((e == 0) & _tie_wins(corners[a], corners[b], orient))
        lam.append(e)
    total = lam[0] + lam[1] + lam[2]
    sel = inside & (total > 0)
    z = (lam[0] * p[tri, 0, 2] + lam[1] * p[tri, 1, 2] + lam[2] * p[tri, 2, 2]) / np.where(total > 0, total, 1)
    return px[sel], py[sel], z[sel], tri[sel]
