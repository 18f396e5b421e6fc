"""Network inputs: landmark heatmaps, per-variant channel stacks and joint augmentation."""

from .landmarks import (
    FLIP_PERMUTATION,
    HEATMAP_SIGMA,
    JOINTS,
    LandmarkSet,
    format_landmarks,
    load_landmarks,
    parse_landmarks,
    render_landmark_heatmaps,
    save_landmarks,
)
from .rasterio import load_image, load_mask, save_image, save_mask
from .sample import (
    Sample,
    alignment_iou,
    apply_augmentation,
    assemble_input,
    augment_sample,
    draw_augmentation,
    input_parts,
    project_silhouette,
)

__all__ = [
    "FLIP_PERMUTATION",
    "HEATMAP_SIGMA",
    "JOINTS",
    "LandmarkSet",
    "Sample",
    "alignment_iou",
    "apply_augmentation",
    "assemble_input",
    "augment_sample",
    "draw_augmentation",
    "format_landmarks",
    "input_parts",
    "load_image",
    "load_landmarks",
    "load_mask",
    "parse_landmarks",
    "project_silhouette",
    "render_landmark_heatmaps",
    "save_image",
    "save_landmarks",
    "save_mask",
]
