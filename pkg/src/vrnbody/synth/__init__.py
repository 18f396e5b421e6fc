"""Procedural articulated capsule bodies rendered and voxelized into aligned samples."""

from .body import skeleton_to_mesh
from .dataset import (
    Manifest,
    ManifestEntry,
    dataset_digest,
    generate_dataset,
    generate_sample,
    sample_seed,
)
from .render import Light, random_light, render, zbuffer
from .skeleton import (
    ANGLE_NAMES,
    BONES,
    Skeleton,
    base_shapes,
    default_limits,
    default_shape,
    pose_skeleton,
    sample_pose,
    zero_limits,
)

__all__ = [
    "ANGLE_NAMES",
    "BONES",
    "Light",
    "Manifest",
    "ManifestEntry",
    "Skeleton",
    "base_shapes",
    "dataset_digest",
    "default_limits",
    "default_shape",
    "generate_dataset",
    "generate_sample",
    "pose_skeleton",
    "random_light",
    "render",
    "sample_pose",
    "sample_seed",
    "skeleton_to_mesh",
    "zbuffer",
    "zero_limits",
]
