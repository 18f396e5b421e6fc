"""Capsule-and-ellipsoid body meshes built from a posed skeleton."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..geometry.mesh import TriMesh, merge_meshes
from ..geometry.primitives import capsule, ellipsoid
from .skeleton import BONES, PARTS

HEAD_RADII = (1.0, 1.05, 1.2)  # across, front-back, vertical; relative to head_radius


def skeleton_to_mesh(skeleton, segments=16, rings=None, with_parts=False):
    """One closed capsule per bone plus an ellipsoid head, as separate components.

    Capsules interpenetrate at the joints; each stays closed on its own and
    the voxelizer ORs per-component fills. With ``with_parts`` also returns
    the body-part index (into ``PARTS``) of every triangle.
    """
    if segments < 8:
        raise ConfigurationError(f"body tessellation needs segments >= 8, got {segments}")
    rings = max(2, segments // 4) if rings is None else rings
    meshes, labels = [], []
    for parent, child, key, part in BONES:
        a = skeleton.joint(parent)
        b = skeleton.joint(child)
        if np.linalg.norm(b - a) == 0:
            raise ConfigurationError(f"bone {parent}-{child} has zero length")
        m = capsule(a, b, skeleton.shape[key], segments, rings)
        meshes.append(m)
        labels.append(np.full(len(m.triangles), PARTS.index(part)))
    r = skeleton.shape["head_radius"]
    head = ellipsoid(np.zeros(3), np.array(HEAD_RADII) * r, segments, 2 * rings - 1)
    # ellipsoid poles sit on z; turn them to the head's vertical axis, then pose
    upright = np.array([[1, 0, 0], [0, 0, 1], [0, -1, 0]], np.float64)
    verts = head.vertices @ upright.T @ skeleton.head_rotation.T + skeleton.joint("head")
    head = TriMesh(verts, head.triangles)
    meshes.append(head)
    labels.append(np.full(len(head.triangles), PARTS.index("skin")))
    mesh = merge_meshes(meshes)
    return (mesh, np.concatenate(labels)) if with_parts else mesh
