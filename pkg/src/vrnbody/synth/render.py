"""Orthographic z-buffer rendering of body meshes onto cluttered backgrounds.

Rendering samples the same pixel-center rays the voxelizer fills along, so a
pixel is covered exactly when its voxel column crosses the surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..encoding.landmarks import LandmarkSet
from ..geometry.raster import column_crossings
from .skeleton import PARTS


@dataclass
class Light:
    direction: np.ndarray  # unit vector from the surface toward the light
    ambient: float


def random_light(rng):
    """A light on the camera side (negative z) with random ambient level."""
    d = rng.standard_normal(3)
    d[2] = -abs(d[2]) - 0.75
    return Light(d / np.linalg.norm(d), float(rng.uniform(0.25, 0.45)))


def random_albedo(rng):
    skin = np.array([0.85, 0.65, 0.5]) * rng.uniform(0.55, 1.1)
    return np.clip(np.stack([skin, rng.uniform(0.05, 0.95, 3), rng.uniform(0.05, 0.8, 3)]), 0, 1)


def cluttered_background(rng, height, width):
    """Smooth color gradient with random rectangles and ellipses plus mild pixel noise."""
    ys, xs = np.mgrid[0:height, 0:width] / max(height, width)
    angle = rng.uniform(0, 2 * np.pi)
    t = np.clip(0.5 + (np.cos(angle) * (xs - 0.5) + np.sin(angle) * (ys - 0.5)), 0, 1)[..., None]
    c0, c1 = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
    img = (1 - t) * c0 + t * c1
    for _ in range(int(rng.integers(3, 9))):
        color = rng.uniform(0, 1, 3)
        alpha = rng.uniform(0.4, 1.0)
        cx, cy = rng.uniform(0, 1, 2)
        rx, ry = rng.uniform(0.03, 0.25, 2)
        if rng.random() < 0.5:
            region = (np.abs(xs - cx) < rx) & (np.abs(ys - cy) < ry)
        else:
            region = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 < 1
        img[region] = (1 - alpha) * img[region] + alpha * color
    img += rng.normal(0, 0.02, img.shape)
    return np.clip(img, 0, 1)


def triangle_normals(vertices, triangles):
    v = vertices[triangles]
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return n / np.where(norm > 0, norm, 1)


def zbuffer(vertices, triangles, height, width):
    """Nearest crossing depth and triangle per pixel (``inf`` / ``-1`` where uncovered)."""
    px, py, z, tri = column_crossings(vertices, triangles, width, height)
    depth = np.full((height, width), np.inf)
    front = np.full((height, width), -1, np.int64)
    if len(z):
        pix = py * width + px
        order = np.lexsort((z, pix))
        pix, z, tri = pix[order], z[order], tri[order]
        first = np.r_[True, pix[1:] != pix[:-1]]
        depth.reshape(-1)[pix[first]] = z[first]
        front.reshape(-1)[pix[first]] = tri[first]
    return depth, front


def render(mesh, skeleton, height, width, light=None, rng=None, transform=None, parts=None,
           albedo=None, background=None):
    """Render ``(image, landmarks, mask)``.

    ``transform`` is the world-to-grid ``(scale, translation)`` shared with the
    voxelizer; pixel ``(x, y)`` views grid column ``(x, y)``. Joint visibility
    comes from the z-buffer: a joint is hidden when the nearest surface in
    front of it is farther than the joint's own body radius.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    light = light if light is not None else random_light(rng)
    albedo = albedo if albedo is not None else random_albedo(rng)
    if background is None:
        background = cluttered_background(rng, height, width)
    scale, translation = transform if transform is not None else (1.0, np.zeros(3))
    verts = mesh.vertices * scale + np.asarray(translation, np.float64)
    posed = skeleton.transformed(scale, translation)
    if parts is None:
        parts = np.full(len(mesh.triangles), PARTS.index("skin"))

    depth, front = zbuffer(verts, mesh.triangles, height, width)
    mask = front >= 0
    normals = triangle_normals(verts, mesh.triangles)
    lit = front[mask]
    shade = light.ambient + (1 - light.ambient) * np.clip(normals[lit] @ light.direction, 0, None)
    image = background.astype(np.float64).copy()
    image[mask] = albedo[parts[lit]] * shade[:, None]

    # grid column x (center x + 0.5) is pixel coordinate x
    points = posed.joints[:, :2] - 0.5
    col = np.round(points).astype(np.int64)
    in_frame = (col[:, 0] >= 0) & (col[:, 0] < width) & (col[:, 1] >= 0) & (col[:, 1] < height)
    visible = np.zeros(len(points), bool)
    tolerance = skeleton.joint_radii() * scale + 0.5
    for i in np.flatnonzero(in_frame):
        nearest = depth[col[i, 1], col[i, 0]]
        visible[i] = posed.joints[i, 2] <= nearest + tolerance[i]
    return np.clip(image, 0, 1).astype(np.float32), LandmarkSet(points, visible), mask.astype(np.uint8)
