"""Point-in-mesh classification by ray parity, used as the voxelizer's oracle.

Rays are cast from each point in a fixed direction; counting crossings is done
in the plane across the ray with barycentric coordinates.
"""

from __future__ import annotations

import numpy as np

# fixed, deliberately irrational-looking ray direction
BASE_DIRECTION = np.array([0.5773, 0.6313, 0.5183])
GRAZE_EPS = 1e-9
EDGE_EPS = 1e-7
CHUNK = 512


def _ray_basis(direction):
    d = direction / np.linalg.norm(direction)
    helper = np.eye(3)[int(np.argmin(np.abs(d)))]
    a = np.cross(d, helper)
    a /= np.linalg.norm(a)
    return a, np.cross(d, a), d


def _ray_hits(points, basis, tri2d, inv_area, depth):
    """Crossings of rays from ``points`` with every triangle, in the plane across the ray.

    Returns (hit count, grazing flag) per point. A hit on an edge or vertex
    could be double counted or missed, so such rays are flagged for a re-cast.
    """
    a, b, d = basis
    qx = (points @ a)[:, None]
    qy = (points @ b)[:, None]
    qz = (points @ d)[:, None]
    (ax, ay), (bx, by), (cx, cy) = tri2d
    rx = qx - ax
    ry = qy - ay
    u = (rx * (cy - ay) - ry * (cx - ax)) * inv_area
    v = ((bx - ax) * ry - (by - ay) * rx) * inv_area
    w = 1.0 - u - v
    inside = (u >= 0) & (v >= 0) & (w >= 0)
    t = depth[0] * w + depth[1] * u + depth[2] * v - qz
    hit = inside & (t > 0)
    near = (u > -EDGE_EPS) & (v > -EDGE_EPS) & (w > -EDGE_EPS)
    graze = near & ((np.abs(u) < EDGE_EPS) | (np.abs(v) < EDGE_EPS) | (np.abs(w) < EDGE_EPS)
                    | (np.abs(t) < GRAZE_EPS))
    return hit.sum(axis=1), graze.any(axis=1)


def _prepare(tris, direction):
    basis = _ray_basis(direction)
    a, b, d = basis
    proj = [(tris[:, k] @ a, tris[:, k] @ b) for k in range(3)]
    (ax, ay), (bx, by), (cx, cy) = proj
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    # triangles seen edge-on cannot be crossed except by grazing rays
    keep = np.abs(area) > GRAZE_EPS
    proj = [(x[keep][None, :], y[keep][None, :]) for x, y in proj]
    depth = [(tris[keep, k] @ d)[None, :] for k in range(3)]
    return basis, proj, (1.0 / area[keep])[None, :], depth


def _parity_inside(points, tris, rng):
    result = np.zeros(len(points), bool)
    pending = np.arange(len(points))
    direction = BASE_DIRECTION
    for _ in range(32):
        prepared = _prepare(tris, direction)
        graze_all = np.zeros(len(pending), bool)
        for start in range(0, len(pending), CHUNK):
            ids = pending[start:start + CHUNK]
            count, graze = _ray_hits(points[ids], *prepared)
            result[ids] = (count % 2) == 1
            graze_all[start:start + CHUNK] = graze
        pending = pending[graze_all]
        if len(pending) == 0:
            return result
        direction = BASE_DIRECTION + rng.standard_normal(3) * 0.05
    raise RuntimeError("could not find a non-grazing ray direction")


def points_in_mesh(mesh, points, rng=None):
    """Inside test for many points; a point is inside if it is inside any closed component."""
    mesh.require_closed()
    rng = rng if rng is not None else np.random.default_rng(0)
    points = np.asarray(points, np.float64).reshape(-1, 3)
    inside = np.zeros(len(points), bool)
    for tri_ids in mesh.components():
        tris = mesh.vertices[mesh.triangles[tri_ids]]
        lo = tris.min(axis=(0, 1))
        hi = tris.max(axis=(0, 1))
        # points outside a component's bounding box are outside it
        cand = np.flatnonzero(np.all((points >= lo) & (points <= hi), axis=1) & ~inside)
        if len(cand):
            inside[cand] = _parity_inside(points[cand], tris, rng)
    return inside


def point_in_mesh(mesh, point, rng=None):
    return bool(points_in_mesh(mesh, [point], rng)[0])
