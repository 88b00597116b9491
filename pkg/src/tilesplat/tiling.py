"""Sorting stage: tile assignment and per-tile depth ordering."""

from __future__ import annotations

import math
from dataclasses import dataclass

from tilesplat.projection import ProjectedGaussian
from tilesplat.scene import Camera

TILE_SIZE = 16

# Radix-sort cost coefficient from the sorting-stage complexity model
# E_s = O(s * N). Informational: reports only, never a code path.
RADIX_SORT_COEFF = 64


@dataclass(frozen=True)
class TileGrid:
    """Per-tile depth-sorted splat lists (indices into the projected list)."""

    tiles_x: int
    tiles_y: int
    lists: tuple[tuple[int, ...], ...]  # row-major, tiles_x * tiles_y entries

    def tile_list(self, tx: int, ty: int) -> tuple[int, ...]:
        return self.lists[ty * self.tiles_x + tx]

    @property
    def total_splats(self) -> int:
        return sum(len(lst) for lst in self.lists)


def covered_tiles(pg: ProjectedGaussian, tiles_x: int, tiles_y: int):
    """Tile coordinates whose area intersects the closed bounding square
    [mean - radius, mean + radius] of the projected Gaussian."""
    x0 = math.floor((pg.mean2d[0] - pg.radius) / TILE_SIZE)
    x1 = math.floor((pg.mean2d[0] + pg.radius) / TILE_SIZE)
    y0 = math.floor((pg.mean2d[1] - pg.radius) / TILE_SIZE)
    y1 = math.floor((pg.mean2d[1] + pg.radius) / TILE_SIZE)
    for ty in range(max(y0, 0), min(y1, tiles_y - 1) + 1):
        for tx in range(max(x0, 0), min(x1, tiles_x - 1) + 1):
            yield tx, ty


def build_tiles(projected: list[ProjectedGaussian], cam: Camera) -> TileGrid:
    """Assign each projected Gaussian to every tile its bounding square
    overlaps; each tile list is sorted ascending by depth, stably."""
    tiles_x = (cam.width + TILE_SIZE - 1) // TILE_SIZE
    tiles_y = (cam.height + TILE_SIZE - 1) // TILE_SIZE
    buckets: list[list[int]] = [[] for _ in range(tiles_x * tiles_y)]
    for j, pg in enumerate(projected):
        for tx, ty in covered_tiles(pg, tiles_x, tiles_y):
            buckets[ty * tiles_x + tx].append(j)
    lists = tuple(
        tuple(sorted(bucket, key=lambda j: projected[j].depth))
        for bucket in buckets
    )
    return TileGrid(tiles_x, tiles_y, lists)


def splat_census(grid: TileGrid) -> dict:
    """Total splat count, occupancy histogram, and the modeled sort cost."""
    histogram: dict[int, int] = {}
    for lst in grid.lists:
        if lst:
            histogram[len(lst)] = histogram.get(len(lst), 0) + 1
    n = grid.total_splats
    return {
        "N": n,
        "histogram": histogram,
        "sort_cost_model": RADIX_SORT_COEFF * n,
        "radix_coefficient": RADIX_SORT_COEFF,
    }
