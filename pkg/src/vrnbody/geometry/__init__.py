"""Meshes, voxel grids, voxelization, surface extraction and the IoU metric."""

from .grid import VoxelGrid, decode_grid, encode_grid, iou, load_grid, save_grid
from .inside import point_in_mesh, points_in_mesh
from .marching import case_table, marching_cubes
from .mesh import (
    TriMesh,
    format_obj,
    load_obj,
    merge_meshes,
    parse_obj,
    save_obj,
    scale_about,
    scale_augment,
    z_align,
)
from .raster import column_crossings
from .voxelize import FIT_MARGIN, fit_transform, voxelize

__all__ = [
    "FIT_MARGIN",
    "TriMesh",
    "VoxelGrid",
    "case_table",
    "column_crossings",
    "decode_grid",
    "encode_grid",
    "fit_transform",
    "format_obj",
    "iou",
    "load_grid",
    "load_obj",
    "marching_cubes",
    "merge_meshes",
    "parse_obj",
    "point_in_mesh",
    "points_in_mesh",
    "save_grid",
    "save_obj",
    "scale_about",
    "scale_augment",
    "voxelize",
    "z_align",
]
