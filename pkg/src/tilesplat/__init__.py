"""Tile-based forward renderer for 3D Gaussian scenes.

Provides a full-precision reference rasterizer, an equivalent alpha path
that batches exponent evaluation as matrix products (with log-domain
culling and a tile-local coordinate shift), and a bit-exact emulator for
mixed-precision multiply-accumulate arithmetic used to study rounding
error in the batched path.
"""

from tilesplat.scene import Camera, Gaussian3D, Scene, load_camera, load_ply, load_synthetic, write_synthetic
from tilesplat.projection import ProjectedGaussian, project
from tilesplat.tiling import TileGrid, build_tiles, splat_census
from tilesplat.raster import FragmentStats, ImageBuffer, render, computation_model
from tilesplat.precision import FP16, FP32, TF32, HalfFormat, round_to, emulated_mma, error_bound

__all__ = [
    "Camera",
    "Gaussian3D",
    "Scene",
    "load_camera",
    "load_ply",
    "load_synthetic",
    "write_synthetic",
    "ProjectedGaussian",
    "project",
    "TileGrid",
    "build_tiles",
    "splat_census",
    "FragmentStats",
    "ImageBuffer",
    "render",
    "computation_model",
    "FP16",
    "FP32",
    "TF32",
    "HalfFormat",
    "round_to",
    "emulated_mma",
    "error_bound",
]
