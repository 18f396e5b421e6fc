"""Lossless 8-bit raster files: binary PPM for RGB images, PGM for masks."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import FormatError


def image_to_bytes(image):
    """Quantize a ``[0, 1]`` float image to 8 bits."""
    return np.clip(np.round(np.asarray(image, np.float64) * 255), 0, 255).astype(np.uint8)


def save_image(image, path):
    Image.fromarray(image_to_bytes(image), "RGB").save(Path(path), format="PPM")


def save_mask(mask, path):
    Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255, "L").save(Path(path), format="PPM")


def _open(path, mode):
    try:
        with Image.open(Path(path)) as img:
            if img.mode != mode:
                raise FormatError(f"{path}: expected a {mode} raster, got {img.mode}")
            return np.asarray(img)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a PPM/PGM raster") from exc


def load_image(path):
    return (_open(path, "RGB").astype(np.float32) / 255.0)


def load_mask(path):
    return (_open(path, "L") > 127).astype(np.uint8)
