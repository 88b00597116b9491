"""Conditional alpha-blending: reference backend, tile blend loop, and the
full render pipeline with fragment accounting."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from tilesplat.projection import ProjectedGaussian, project_scene
from tilesplat.scene import Camera, Scene
from tilesplat.tiling import TILE_SIZE, TileGrid, build_tiles

ALPHA_CULL_THRESHOLD = 1.0 / 255.0
TERMINATION_THRESHOLD = 0.0001


@dataclass
class FragmentStats:
    """Counts of blended, culled, and skipped fragments plus exp calls."""

    f_blend: int = 0
    f_cull: int = 0
    f_skip: int = 0
    exp_calls: int = 0
    n_splats: int = 0
    dropped: int = 0
    pixels_terminated: int = 0
    stage_ms: dict = field(default_factory=dict)

    @property
    def total_fragments(self) -> int:
        return self.f_blend + self.f_cull + self.f_skip

    def counts(self) -> tuple[int, int, int, int]:
        return (self.f_blend, self.f_cull, self.f_skip, self.exp_calls)

    def to_dict(self) -> dict:
        return {
            "f_blend": self.f_blend,
            "f_cull": self.f_cull,
            "f_skip": self.f_skip,
            "exp_calls": self.exp_calls,
            "N": self.n_splats,
            "dropped": self.dropped,
            "pixels_terminated": self.pixels_terminated,
            "stage_ms": dict(self.stage_ms),
        }


@dataclass
class ImageBuffer:
    """Row-major float RGB image in [0, 1]."""

    rgb: np.ndarray  # (height, width, 3)

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]


def alpha_reference(pg: ProjectedGaussian, p) -> float:
    """Full-precision per-fragment alpha o * exp(-q/2) with q the
    inverse-covariance quadratic form at pixel p."""
    s11, s12, s22 = pg.inv_cov
    dx = pg.mean2d[0] - p[0]
    dy = pg.mean2d[1] - p[1]
    q = s11 * dx * dx + 2.0 * s12 * dx * dy + s22 * dy * dy
    return pg.opacity * float(np.exp(-0.5 * q))


class ReferenceEvaluator:
    """Scalar-path alpha source: one exp per reached fragment, culling
    decided on the exponentiated alpha."""

    def __init__(self, splats, px, py):
        self.splats = splats
        self.px = px
        self.py = py

    def fragment(self, j: int, active: np.ndarray):
        pg = self.splats[j]
        s11, s12, s22 = pg.inv_cov
        dx = pg.mean2d[0] - self.px
        dy = pg.mean2d[1] - self.py
        q = s11 * dx * dx + 2.0 * s12 * dx * dy + s22 * dy * dy
        alpha = np.where(active, pg.opacity * np.exp(-0.5 * q), 0.0)
        culled = alpha < ALPHA_CULL_THRESHOLD
        return culled, alpha, int(np.count_nonzero(active))


class ReferenceBackend:
    """The ground-truth conditional alpha-blending path."""

    name = "reference"

    def tile_evaluator(self, tx: int, ty: int, splats) -> ReferenceEvaluator:
        xs = tx * TILE_SIZE + np.arange(TILE_SIZE, dtype=np.float64)
        ys = ty * TILE_SIZE + np.arange(TILE_SIZE, dtype=np.float64)
        px = np.tile(xs, TILE_SIZE)
        py = np.repeat(ys, TILE_SIZE)
        return ReferenceEvaluator(splats, px, py)


def blend_tile(evaluator, n_splats: int, in_image: np.ndarray, colors: np.ndarray, stats: FragmentStats):
    """Depth-ordered per-pixel compositing over one tile.

    Transmittance starts at 1. A fragment is culled when its alpha falls
    below 1/255; when T - alpha*T drops below 0.0001 the pixel
    terminates and that fragment, plus every later one, is skipped (the
    threshold check precedes compositing). Returns (C, T) over the 256
    tile pixels; out-of-image pixels produce no fragments.
    """
    m = in_image.size
    big_t = np.ones(m)
    big_c = np.zeros((m, 3))
    terminated = np.zeros(m, dtype=bool)
    n_in = int(np.count_nonzero(in_image))
    for j in range(n_splats):
        active = in_image & ~terminated
        n_active = int(np.count_nonzero(active))
        if n_active == 0:
            stats.f_skip += n_in * (n_splats - j)
            break
        stats.f_skip += n_in - n_active
        culled, alpha, n_exp = evaluator.fragment(j, active)
        stats.exp_calls += n_exp
        cull_now = active & culled
        stats.f_cull += int(np.count_nonzero(cull_now))
        cand = active & ~culled
        term_now = cand & (big_t - alpha * big_t < TERMINATION_THRESHOLD)
        n_term = int(np.count_nonzero(term_now))
        stats.f_skip += n_term
        stats.pixels_terminated += n_term
        terminated |= term_now
        blend = cand & ~term_now
        stats.f_blend += int(np.count_nonzero(blend))
        w = np.where(blend, alpha * big_t, 0.0)
        big_c += w[:, np.newaxis] * colors[j][np.newaxis, :]
        big_t = np.where(blend, big_t - w, big_t)
    return big_c, big_t


def make_backend(spec: str, coords: str = "global", batch_width: int = 16, use_early_cull: bool = True):
    """Backend factory for the CLI mode strings."""
    if spec == "reference":
        return ReferenceBackend()
    from tilesplat.tensor_path import Frag2MatBackend

    arith = {"frag2mat": "exact", "frag2mat-fp16": "fp16", "frag2mat-tf32": "tf32"}.get(spec)
    if arith is None:
        raise ValueError(f"unknown backend {spec!r}")
    return Frag2MatBackend(coords=coords, arith=arith, batch_width=batch_width, use_early_cull=use_early_cull)


def render(scene: Scene, cam: Camera, backend="reference") -> tuple[ImageBuffer, FragmentStats]:
    """Full pipeline: project, tile, then blend every tile.

    Background is black; boundary tiles are full 16x16 tiles with
    out-of-image pixels masked."""
    if isinstance(backend, str):
        backend = make_backend(backend)
    stats = FragmentStats()

    t0 = time.perf_counter()
    projected, stats.dropped = project_scene(scene.gaussians, cam)
    t1 = time.perf_counter()
    grid = build_tiles(projected, cam)
    t2 = time.perf_counter()
    stats.n_splats = grid.total_splats

    img = np.zeros((cam.height, cam.width, 3))
    for ty in range(grid.tiles_y):
        ys = ty * TILE_SIZE + np.arange(TILE_SIZE)
        for tx in range(grid.tiles_x):
            idx = grid.tile_list(tx, ty)
            if not idx:
                continue
            xs = tx * TILE_SIZE + np.arange(TILE_SIZE)
            in_image = (np.tile(xs, TILE_SIZE) < cam.width) & (np.repeat(ys, TILE_SIZE) < cam.height)
            splats = [projected[j] for j in idx]
            colors = np.array([pg.color for pg in splats])
            evaluator = backend.tile_evaluator(tx, ty, splats)
            big_c, _ = blend_tile(evaluator, len(splats), in_image, colors, stats)
            tile = big_c.reshape(TILE_SIZE, TILE_SIZE, 3)
            h = min(TILE_SIZE, cam.height - ty * TILE_SIZE)
            w = min(TILE_SIZE, cam.width - tx * TILE_SIZE)
            img[ty * TILE_SIZE : ty * TILE_SIZE + h, tx * TILE_SIZE : tx * TILE_SIZE + w] = tile[:h, :w]
    t3 = time.perf_counter()

    stats.stage_ms = {
        "preprocess": (t1 - t0) * 1000.0,
        "sorting": (t2 - t1) * 1000.0,
        "blending": (t3 - t2) * 1000.0,
    }
    return ImageBuffer(img), stats


def computation_model(stats: FragmentStats, k_alpha: float, k_cull: float, k_blend: float) -> float:
    """Fragment-cost model: k_blend*f_blend + (k_cull + k_alpha)*(f_blend + f_cull)."""
    if k_alpha < 0 or k_cull < 0 or k_blend < 0:
        raise ValueError("cost constants must be non-negative")
    return k_blend * stats.f_blend + (k_cull + k_alpha) * (stats.f_blend + stats.f_cull)
