"""Triangle meshes, OBJ text I/O and the rigid/scale transforms used before voxelization."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import ParseError, PreconditionError, UsageError


class TriMesh:
    """Vertices ``(V, 3)`` as float64 and triangles ``(T, 3)`` as vertex indices."""

    def __init__(self, vertices, triangles):
        self.vertices = np.asarray(vertices, np.float64).reshape(-1, 3)
        self.triangles = np.asarray(triangles, np.int64).reshape(-1, 3)
        self.validate()

    def validate(self):
        t = self.triangles
        if t.size and (t.min() < 0 or t.max() >= len(self.vertices)):
            raise UsageError(f"triangle index out of range for {len(self.vertices)} vertices")
        repeated = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        if repeated.any():
            raise UsageError(f"degenerate triangle {int(np.flatnonzero(repeated)[0])} repeats a vertex index")

    @property
    def is_empty(self):
        return len(self.triangles) == 0

    def copy(self):
        return TriMesh(self.vertices.copy(), self.triangles.copy())

    def transformed(self, scale=1.0, translation=(0.0, 0.0, 0.0)):
        """Return ``scale * v + translation`` applied to every vertex."""
        return TriMesh(self.vertices * scale + np.asarray(translation, np.float64), self.triangles)

    def bounds(self):
        if len(self.vertices) == 0:
            raise UsageError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def edges(self):
        """Undirected edges, one row per triangle side (with repeats), sorted per row."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.sort(e, axis=1)

    def boundary_edges(self):
        """Edges not shared by exactly two triangles."""
        if self.is_empty:
            return np.zeros((0, 2), np.int64)
        uniq, counts = np.unique(self.edges(), axis=0, return_counts=True)
        return uniq[counts != 2]

    def is_closed(self):
        return not self.is_empty and len(self.boundary_edges()) == 0

    def require_closed(self):
        bad = self.boundary_edges() if not self.is_empty else None
        if self.is_empty:
            raise PreconditionError("mesh has no triangles")
        if len(bad):
            listed = ", ".join(f"({a},{b})" for a, b in bad[:10])
            more = f" and {len(bad) - 10} more" if len(bad) > 10 else ""
            raise PreconditionError(f"mesh is not closed: {len(bad)} edges not shared by two triangles: {listed}{more}")

    def components(self):
        """Split into connected components (sharing vertices); returns a list of triangle index arrays."""
        if self.is_empty:
            return []
        n = len(self.vertices)
        t = self.triangles
        rows = np.concatenate([t[:, 0], t[:, 1]])
        cols = np.concatenate([t[:, 1], t[:, 2]])
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
        tri_labels = labels[t[:, 0]]
        order = np.unique(tri_labels)
        return [np.flatnonzero(tri_labels == lab) for lab in order]

    def submesh(self, triangle_ids):
        return TriMesh(self.vertices, self.triangles[triangle_ids])

    def area(self):
        v = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1).sum()

    def signed_volume(self):
        v = self.vertices[self.triangles]
        return np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0

    def __repr__(self):
        return f"TriMesh(vertices={len(self.vertices)}, triangles={len(self.triangles)})"


def merge_meshes(meshes):
    """Concatenate meshes into one (components stay separate)."""
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    if not verts:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int64))
    return TriMesh(np.concatenate(verts), np.concatenate(tris))


# ---------------------------------------------------------------- OBJ


def _parse_index(token, count, line, path):
    head = token.split("/")[0]
    try:
        i = int(head)
    except ValueError:
        raise ParseError(f"bad face index {token!r}", line, path) from None
    if i == 0:
        raise ParseError("face index 0 is invalid (OBJ indices start at 1)", line, path)
    return i - 1 if i > 0 else count + i


def parse_obj(text, path=None):
    """Parse ``v`` and ``f`` records; polygons are fan-triangulated, other records ignored."""
    vertices, triangles = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) not in (4, 5):
                raise ParseError(f"vertex record needs 3 coordinates, got {len(parts) - 1}", lineno, path)
            try:
                vertices.append([float(p) for p in parts[1:4]])
            except ValueError:
                raise ParseError(f"bad vertex coordinate in {raw.strip()!r}", lineno, path) from None
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError(f"face record needs at least 3 indices, got {len(parts) - 1}", lineno, path)
            idx = [_parse_index(p, len(vertices), lineno, path) for p in parts[1:]]
            for i in idx:
                if not 0 <= i < len(vertices):
                    raise ParseError(f"face index {i + 1} refers to a vertex not yet defined", lineno, path)
            for k in range(1, len(idx) - 1):
                tri = (idx[0], idx[k], idx[k + 1])
                if len(set(tri)) < 3:
                    raise ParseError("degenerate face repeats a vertex", lineno, path)
                triangles.append(tri)
    return TriMesh(np.array(vertices, np.float64).reshape(-1, 3), np.array(triangles, np.int64).reshape(-1, 3))


def load_obj(path):
    path = Path(path)
    return parse_obj(path.read_text(), str(path))


def format_obj(mesh):
    # repr-precision floats make the text round trip exact
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    return "\n".join(lines) + "\n"


def save_obj(mesh, path):
    Path(path).write_text(format_obj(mesh))


# ---------------------------------------------------------------- transforms


def z_align(mesh):
    """Translate along Z so the mean vertex Z is zero; X and Y are untouched."""
    if len(mesh.vertices) == 0:
        raise UsageError("cannot z-align an empty mesh")
    shift = mesh.vertices[:, 2].mean()
    v = mesh.vertices.copy()
    v[:, 2] -= shift
    return TriMesh(v, mesh.triangles)


def scale_about(mesh, s, center):
    center = np.asarray(center, np.float64)
    return TriMesh((mesh.vertices - center) * s + center, mesh.triangles)


def scale_augment(mesh, scale_range, rng, center=None):
    """Uniformly scale by ``s ~ U[lo, hi]`` about ``center``.

    ``center`` defaults to the bounding-box center; the data generator passes
    the volume center in grid coordinates. Returns ``(mesh, s)``.
    """
    lo, hi = scale_range
    if not 0 < lo <= hi:
        raise UsageError(f"scale range needs 0 < lo <= hi, got [{lo}, {hi}]")
    s = float(rng.uniform(lo, hi))
    if center is None:
        lo_b, hi_b = mesh.bounds()
        center = (lo_b + hi_b) / 2
    return scale_about(mesh, s, center), s
