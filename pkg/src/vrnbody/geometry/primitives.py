"""Closed primitive meshes: boxes, ellipsoids and capsules, all with outward normals."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .mesh import TriMesh


def box(lo, hi):
    lo = np.asarray(lo, np.float64)
    hi = np.asarray(hi, np.float64)
    corners = np.array([[(hi if (c >> a) & 1 else lo)[a] for a in range(3)] for c in range(8)])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriMesh(corners, tris)


def _ring_faces(ring_count, segments, first_pole, last_pole):
    """Triangles of a pole / rings / pole strip; ring ``i`` starts at ``1 + i * segments``."""
    tris = []
    for s in range(segments):
        t = (s + 1) % segments
        tris.append((first_pole, 1 + s, 1 + t))
    for i in range(ring_count - 1):
        a0 = 1 + i * segments
        b0 = a0 + segments
        for s in range(segments):
            t = (s + 1) % segments
            tris += [(a0 + s, b0 + s, b0 + t), (a0 + s, b0 + t, a0 + t)]
    base = 1 + (ring_count - 1) * segments
    for s in range(segments):
        t = (s + 1) % segments
        tris.append((last_pole, base + t, base + s))
    return tris


def _orient_outward(vertices, tris):
    mesh = TriMesh(vertices, tris)
    if mesh.signed_volume() < 0:
        mesh = TriMesh(vertices, mesh.triangles[:, ::-1])
    return mesh


def ellipsoid(center, radii, segments=16, rings=7):
    """UV ellipsoid with ``2 + segments * rings`` vertices (``rings`` latitude circles)."""
    if segments < 3 or rings < 1:
        raise ConfigurationError("ellipsoid needs segments >= 3 and rings >= 1")
    center = np.asarray(center, np.float64)
    radii = np.broadcast_to(np.asarray(radii, np.float64), (3,))
    phi = 2 * np.pi * np.arange(segments) / segments
    theta = np.pi * np.arange(1, rings + 1) / (rings + 1)
    verts = [center + radii * [0, 0, 1]]
    for th in theta:
        ring = np.stack([np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi), np.full(segments, np.cos(th))], axis=1)
        verts.extend(center + radii * ring)
    verts.append(center - radii * [0, 0, 1])
    last = len(verts) - 1
    return _orient_outward(np.array(verts), _ring_faces(rings, segments, 0, last))


def sphere(center, radius, segments=16, rings=7):
    return ellipsoid(center, radius, segments, rings)


def bone_frame(axis):
    """Unit vectors ``u, v`` perpendicular to ``axis``, chosen from the least aligned world axis."""
    w = axis / np.linalg.norm(axis)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(w)))] = 1.0
    u = helper - np.dot(helper, w) * w
    u /= np.linalg.norm(u)
    return u, np.cross(w, u)


def capsule(a, b, radius, segments=16, rings=4):
    """Cylinder between ``a`` and ``b`` with hemispherical caps.

    Each cap has ``rings`` latitude circles, the last being the cylinder rim,
    so the mesh has ``2 + 2 * segments * rings`` vertices.
    """
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    length = np.linalg.norm(b - a)
    if length == 0:
        raise ConfigurationError("capsule bone has zero length")
    if segments < 3 or rings < 1:
        raise ConfigurationError("capsule needs segments >= 3 and rings >= 1")
    w = (b - a) / length
    u, v = bone_frame(w)
    phi = 2 * np.pi * np.arange(segments) / segments
    circle = np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * v
    verts = [b + radius * w]
    angles = np.pi / 2 * np.arange(1, rings + 1) / rings
    for th in angles:  # cap at b, pole to rim
        verts.extend(b + radius * (np.cos(th) * w + np.sin(th) * circle))
    for th in angles[::-1]:  # cap at a, rim to pole
        verts.extend(a + radius * (-np.cos(th) * w + np.sin(th) * circle))
    verts.append(a - radius * w)
    last = len(verts) - 1
    return _orient_outward(np.array(verts), _ring_faces(2 * rings, segments, 0, last))
