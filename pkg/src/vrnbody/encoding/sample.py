"""Training samples, per-variant network inputs and joint augmentation.

Images are ``(H, W, 3)`` and masks ``(H, W)``, indexed ``[y, x]``; target
volumes are ``(W, H, D)``, indexed ``[x, y, z]``. Pixel ``[y, x]`` lies over
voxel column ``[x, y]``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import UsageError
from ..geometry.grid import VoxelGrid, iou
from .landmarks import LandmarkSet, render_landmark_heatmaps

COLOR_RANGE = (0.7, 1.3)
MAX_SHIFT = 8
FLIP_PROBABILITY = 0.5
ALIGNMENT_FLOOR = 0.99

_INPUT_PARTS = {
    "vrn-guided": ("image", "landmarks"),
    "multistack": ("image", "landmarks"),
    "old-residual": ("image", "landmarks"),
    "conv3d-flat": ("image", "landmarks"),
    "image-only": ("image",),
    "landmarks-only": ("landmarks",),
    "mask-only": ("mask",),
}


@dataclass
class Sample:
    image: np.ndarray | None
    landmarks: LandmarkSet | None
    mask: np.ndarray | None
    target: VoxelGrid | None

    @property
    def size(self):
        """``(H, W)`` of the 2-D fields."""
        for field in (self.image, self.mask):
            if field is not None:
                return field.shape[:2]
        if self.target is not None:
            w, h, _ = self.target.dims
            return h, w
        raise UsageError("sample has no image, mask or target to size it")


def input_parts(variant):
    if variant not in _INPUT_PARTS:
        raise UsageError(f"unknown variant {variant!r}")
    return _INPUT_PARTS[variant]


def assemble_input(variant, sample):
    """Stack the channels ``variant`` consumes into a ``(C, H, W)`` float32 array."""
    h, w = sample.size
    channels = []
    for part in input_parts(variant):
        if part == "image":
            if sample.image is None:
                raise UsageError(f"variant {variant} needs an image")
            channels.append(np.moveaxis(np.asarray(sample.image, np.float32), -1, 0))
        elif part == "landmarks":
            if sample.landmarks is None:
                raise UsageError(f"variant {variant} needs landmarks")
            channels.append(render_landmark_heatmaps(sample.landmarks, h, w))
        else:
            if sample.mask is None:
                raise UsageError(f"variant {variant} needs a mask")
            channels.append(np.asarray(sample.mask, np.float32)[None])
    return np.concatenate(channels, axis=0)


def project_silhouette(grid):
    """Orthographic Z projection: pixel ``[y, x]`` is set if any voxel in column ``[x, y]`` is."""
    values = grid.values if isinstance(grid, VoxelGrid) else np.asarray(grid)
    occ = values.astype(bool) if values.dtype in (np.uint8, bool) else values >= 0.5
    return occ.any(axis=2).T.astype(np.uint8)


def alignment_iou(sample):
    """IoU between the target's projected silhouette and the mask."""
    return iou(project_silhouette(sample.target), sample.mask)


def _shift2d(a, dx, dy):
    """Shift the first two axes (rows by ``dy``, columns by ``dx``) with zero fill."""
    out = np.zeros_like(a)
    h, w = a.shape[:2]
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_y = slice(max(0, dy), min(h, h + dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_x = slice(max(0, dx), min(w, w + dx))
    out[dst_y, dst_x] = a[src_y, src_x]
    return out


def _shift_volume(values, dx, dy):
    # volume is [x, y, z]: swap to [y, x, z] for the shared 2-D shift
    return np.swapaxes(_shift2d(np.swapaxes(values, 0, 1), dx, dy), 0, 1)


def apply_augmentation(sample, color_scale=(1.0, 1.0, 1.0), shift=(0, 0), flip=False):
    """Deterministic augmentation with explicit parameters.

    Channel scaling touches the image only. The integer ``shift`` and the
    horizontal ``flip`` move image, mask, landmarks and the target volume
    together, so the input stays aligned with the target.
    """
    h, w = sample.size
    dx, dy = int(shift[0]), int(shift[1])
    image, mask, landmarks, target = sample.image, sample.mask, sample.landmarks, sample.target
    if image is not None:
        image = np.clip(image * np.asarray(color_scale, np.float32), 0.0, 1.0).astype(np.float32)
    if dx or dy:
        image = None if image is None else _shift2d(image, dx, dy)
        mask = None if mask is None else _shift2d(mask, dx, dy)
        landmarks = None if landmarks is None else landmarks.translated(dx, dy, w, h)
        if target is not None:
            target = VoxelGrid(_shift_volume(target.values, dx, dy), target.scale, target.translation)
    if flip:
        image = None if image is None else image[:, ::-1].copy()
        mask = None if mask is None else mask[:, ::-1].copy()
        landmarks = None if landmarks is None else landmarks.flipped(w)
        if target is not None:
            target = VoxelGrid(target.values[::-1].copy(), target.scale, target.translation)
    return replace(sample, image=image, mask=mask, landmarks=landmarks, target=target)


def draw_augmentation(rng, color_range=COLOR_RANGE, max_shift=MAX_SHIFT, flip_probability=FLIP_PROBABILITY):
    """Draw ``(color_scale, shift, flip)``; always consumes the same number of draws."""
    color = rng.uniform(color_range[0], color_range[1], 3)
    shift = rng.integers(-max_shift, max_shift + 1, 2)
    flip = bool(rng.random() < flip_probability)
    return tuple(color.tolist()), (int(shift[0]), int(shift[1])), flip


def augment_sample(sample, rng, color_range=COLOR_RANGE, max_shift=MAX_SHIFT, flip_probability=FLIP_PROBABILITY):
    """Random channel scaling, integer translation and horizontal flip."""
    color, shift, flip = draw_augmentation(rng, color_range, max_shift, flip_probability)
    return apply_augmentation(sample, color, shift, flip)
