"""Marching-cubes isosurface extraction with a generated 256-case table.

The table is built from one rule applied per cube face. A face whose corners
alternate inside/outside is split so the inside corners stay separated. Both
cubes sharing a face see the same corners, so they pick the same segments and
the extracted surface is watertight. Segments are oriented so that surface
normals point from inside (value >= iso) to outside.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import UsageError
from .mesh import TriMesh

CORNERS = np.array([[c & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)])


def _cube_edges():
    edges = []
    for axis in range(3):
        for c in range(8):
            if not (c >> axis) & 1:
                edges.append((c, c | (1 << axis), axis))
    return edges


EDGES = _cube_edges()
_EDGE_INDEX = {(a, b): i for i, (a, b, _) in enumerate(EDGES)}


def _edge_between(a, b):
    return _EDGE_INDEX[(min(a, b), max(a, b))]


def _cube_faces():
    faces = []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        for side in (0, 1):
            ring = []
            for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                c = (side << axis) | (du << u) | (dv << v)
                ring.append(c)
            normal = np.zeros(3)
            normal[axis] = 1.0 if side else -1.0
            faces.append((ring, normal))
    return faces


FACES = _cube_faces()


def _edge_midpoint(e):
    a, b, _ = EDGES[e]
    return (CORNERS[a] + CORNERS[b]) / 2.0


def face_segments(case):
    """Directed (edge, edge) segments of ``case`` on all six faces."""
    inside = [(case >> c) & 1 for c in range(8)]
    segments = []
    for ring, normal in FACES:
        flags = [inside[c] for c in ring]
        n_in = sum(flags)
        if n_in in (0, 4):
            continue
        side_edges = [_edge_between(ring[i], ring[(i + 1) % 4]) for i in range(4)]
        pieces = []
        if n_in == 2 and flags[0] == flags[2]:
            # ambiguous face: cut off each inside corner separately
            for i in range(4):
                if flags[i]:
                    a, b = side_edges[i - 1], side_edges[i]
                    mid = (_edge_midpoint(a) + _edge_midpoint(b)) / 2
                    pieces.append((a, b, mid - CORNERS[ring[i]]))
        else:
            crossing = [side_edges[i] for i in range(4) if flags[i] != flags[(i + 1) % 4]]
            ins = np.mean([CORNERS[c] for c, f in zip(ring, flags) if f], axis=0)
            outs = np.mean([CORNERS[c] for c, f in zip(ring, flags) if not f], axis=0)
            pieces.append((crossing[0], crossing[1], outs - ins))
        for a, b, toward_outside in pieces:
            forward = np.cross(toward_outside, normal)
            if np.dot(_edge_midpoint(b) - _edge_midpoint(a), forward) < 0:
                a, b = b, a
            segments.append((a, b))
    return segments


def case_loops(case):
    """Closed, consistently oriented edge loops for one case."""
    nxt = {}
    for a, b in face_segments(case):
        if a in nxt:
            raise AssertionError(f"case {case}: edge {a} has two successors")
        nxt[a] = b
    loops = []
    while nxt:
        start = min(nxt)
        loop = [start]
        cur = nxt.pop(start)
        while cur != start:
            loop.append(cur)
            cur = nxt.pop(cur)
        loops.append(tuple(loop))
    return loops


@lru_cache(maxsize=1)
def case_table():
    """Loops for all 256 corner configurations, generated once."""
    return tuple(tuple(case_loops(c)) for c in range(256))


def marching_cubes(grid, iso=0.5, world=False):
    """Extract the ``iso`` surface of a VoxelGrid (or ``(W, H, D)`` array).

    The grid is padded with a zero shell, so the surface always closes.
    Vertices are returned in grid coordinates (voxel ``[i, j, k]`` sits at
    ``(i + .5, j + .5, k + .5)``), or in world coordinates with ``world=True``.
    Loops of four or more edges are triangulated around their centroid.
    """
    values = np.asarray(getattr(grid, "values", grid), np.float64)
    if values.ndim != 3 or min(values.shape) < 2:
        raise UsageError(f"marching cubes needs a 3-D grid with every dim >= 2, got {values.shape}")
    if not 0 < iso < 1:
        raise UsageError(f"iso must lie in (0, 1), got {iso}")
    padded = np.pad(values, 1)
    s = padded.shape
    inside = padded >= iso
    cubes = tuple(n - 1 for n in s)
    case = np.zeros(cubes, np.int64)
    for c, (dx, dy, dz) in enumerate(CORNERS):
        case |= inside[dx:dx + cubes[0], dy:dy + cubes[1], dz:dz + cubes[2]].astype(np.int64) << c
    active = np.flatnonzero((case > 0) & (case < 255))
    empty = TriMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int64))
    if len(active) == 0:
        return empty

    npts = s[0] * s[1] * s[2]
    origin = np.stack(np.unravel_index(active, cubes), axis=1)
    active_case = case.reshape(-1)[active]
    table = case_table()
    edge_gid = np.empty((len(active), 12), np.int64)
    for e, (a, _, axis) in enumerate(EDGES):
        p = origin + CORNERS[a]
        edge_gid[:, e] = axis * npts + np.ravel_multi_index(p.T, s)

    loops = []  # arrays of global edge ids, one (n, L) block per (case, loop)
    for c in np.unique(active_case):
        rows = np.flatnonzero(active_case == c)
        for loop in table[c]:
            loops.append(edge_gid[np.ix_(rows, loop)])

    used, inverse = np.unique(np.concatenate([l.reshape(-1) for l in loops]), return_inverse=True)
    axis = used // npts
    start = np.stack(np.unravel_index(used % npts, s), axis=1)
    step = np.eye(3, dtype=np.int64)[axis]
    v0 = padded[tuple(start.T)]
    v1 = padded[tuple((start + step).T)]
    t = (iso - v0) / (v1 - v0)
    positions = start + t[:, None] * step - 0.5

    verts = [positions]
    tris = []
    offset = 0
    n_verts = len(positions)
    for block in loops:
        n, length = block.shape
        ids = inverse[offset:offset + n * length].reshape(n, length)
        offset += n * length
        if length == 3:
            tris.append(ids)
            continue
        centers = positions[ids].mean(axis=1)
        center_ids = n_verts + np.arange(n)
        n_verts += n
        verts.append(centers)
        for i in range(length):
            tris.append(np.stack([center_ids, ids[:, i], ids[:, (i + 1) % length]], axis=1))
    vertices = np.concatenate(verts)
    if world and hasattr(grid, "grid_to_world"):
        vertices = grid.grid_to_world(vertices)
    return TriMesh(vertices, np.concatenate(tris))
