"""Matrix-product alpha backend: log-domain culling, pixel/Gaussian vector
construction, tile-local coordinates, and batched exponent blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tilesplat.precision import FP16, FP32, LN255, TF32, HalfFormat, emulated_dot_batch, round_to
from tilesplat.projection import ProjectedGaussian
from tilesplat.tiling import TILE_SIZE

DEFAULT_BATCH_WIDTH = 16

ARITH_MODES = ("exact", "fp16", "tf32")
_ARITH_FORMATS = {"fp16": FP16, "tf32": TF32}


def tile_center(tx: int, ty: int) -> np.ndarray:
    return np.array([tx * TILE_SIZE + 8.0, ty * TILE_SIZE + 8.0])


def gaussian_vector(pg: ProjectedGaussian, origin=(0.0, 0.0)) -> np.ndarray:
    """Length-8 padded Gaussian vector for the exponent dot product.

    Entries follow beta = v0 + v1 x + v2 y + v3 x^2 + v4 xy + v5 y^2 with
    the mean shifted by the origin; the constant v0 is split into thirds
    to pad the six terms to the length-8 multiply-accumulate shape while
    shrinking the largest absolute value.
    """
    s11, s12, s22 = pg.inv_cov
    dmx = pg.mean2d[0] - origin[0]
    dmy = pg.mean2d[1] - origin[1]
    v0 = math.log(pg.opacity) - 0.5 * (s11 * dmx * dmx + 2.0 * s12 * dmx * dmy + s22 * dmy * dmy)
    v1 = s11 * dmx + s12 * dmy
    v2 = s12 * dmx + s22 * dmy
    third = v0 / 3.0
    return np.array([third, third, third, v1, v2, -0.5 * s11, -s12, -0.5 * s22])


def pixel_vector(p, origin=(0.0, 0.0), local: bool = False) -> np.ndarray:
    """Length-8 padded pixel vector (1, 1, 1, x, y, x^2, xy, y^2).

    In local mode the pixel must lie in the origin's tile, bounding every
    component magnitude by 64.
    """
    dx = p[0] - origin[0]
    dy = p[1] - origin[1]
    if local and (abs(dx) > 8.0 or abs(dy) > 8.0):
        raise ValueError(f"pixel {tuple(p)} outside the tile of origin {tuple(origin)}")
    return np.array([1.0, 1.0, 1.0, dx, dy, dx * dx, dx * dy, dy * dy])


def unpadded(vec8: np.ndarray) -> np.ndarray:
    """Collapse a padded-8 vector back to its 6-term form."""
    head = vec8[..., 0] + vec8[..., 1] + vec8[..., 2]
    return np.concatenate([np.asarray(head)[..., np.newaxis], vec8[..., 3:]], axis=-1)


def _fold_dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Strict left-to-right double-precision fold so scalar and block
    # evaluations agree bit for bit.
    s = u[..., 0] * v[..., 0]
    for k in range(1, u.shape[-1]):
        s = s + u[..., k] * v[..., k]
    return s


def exponent(u: np.ndarray, v: np.ndarray, arith: str = "exact"):
    """Exponent beta = u . v under the requested arithmetic model."""
    if arith == "exact":
        return _fold_dot(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
    fmt = _ARITH_FORMATS[arith]
    return emulated_dot_batch(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64), fmt)


def early_cull(beta) -> bool:
    """Cull in the log domain: true iff beta < -ln 255 (strict)."""
    return bool(beta < -LN255)


@dataclass
class ExponentBlock:
    """One tile-batch exponent matrix with its log-domain cull mask."""

    betas: np.ndarray  # (256, n)
    culled: np.ndarray  # (256, n) bool; non-finite exponents count as culled


def tile_pixel_matrix(tx: int, ty: int, coords: str) -> np.ndarray:
    """Padded pixel vectors for all 256 tile pixels, row-major (256, 8)."""
    origin = tile_center(tx, ty) if coords == "local" else np.zeros(2)
    xs = tx * TILE_SIZE + np.arange(TILE_SIZE, dtype=np.float64) - origin[0]
    ys = ty * TILE_SIZE + np.arange(TILE_SIZE, dtype=np.float64) - origin[1]
    dx = np.tile(xs, TILE_SIZE)
    dy = np.repeat(ys, TILE_SIZE)
    ones = np.ones(dx.size)
    return np.stack([ones, ones, ones, dx, dy, dx * dx, dx * dy, dy * dy], axis=1)


def exponent_block(u_mat: np.ndarray, v_mat: np.ndarray, arith: str = "exact") -> ExponentBlock:
    """Batched exponents for m pixels x n Gaussians.

    ``u_mat`` is (m, 8) and ``v_mat`` is (n, 8); evaluation order matches
    the scalar ``exponent`` fold so results are bitwise identical.
    """
    if v_mat.shape[0] == 0:
        m = u_mat.shape[0]
        return ExponentBlock(np.zeros((m, 0)), np.zeros((m, 0), dtype=bool))
    betas = exponent(u_mat[:, np.newaxis, :], v_mat[np.newaxis, :, :], arith)
    culled = (betas < -LN255) | ~np.isfinite(betas)
    return ExponentBlock(betas, culled)


class Frag2MatEvaluator:
    """Per-tile alpha source backed by batched exponent blocks.

    Blocks are built lazily in depth order, so a batch whose fragments
    are never reached costs nothing; alpha is always exponentiated in
    double precision from the block's beta.
    """

    def __init__(self, splats, u_mat, origin, arith, batch_width, use_early_cull):
        self.splats = splats
        self.u_mat = u_mat
        self.arith = arith
        self.batch_width = batch_width
        self.use_early_cull = use_early_cull
        self.v_mat = np.array([gaussian_vector(pg, origin) for pg in splats]).reshape(len(splats), 8)
        self._blocks: dict[int, ExponentBlock] = {}

    def _block(self, b: int) -> ExponentBlock:
        block = self._blocks.get(b)
        if block is None:
            lo = b * self.batch_width
            hi = min(lo + self.batch_width, len(self.splats))
            block = exponent_block(self.u_mat, self.v_mat[lo:hi], self.arith)
            self._blocks[b] = block
        return block

    def fragment(self, j: int, active: np.ndarray):
        b, col = divmod(j, self.batch_width)
        block = self._block(b)
        beta = block.betas[:, col]
        nonfinite = ~np.isfinite(beta)
        if self.use_early_cull:
            culled = block.culled[:, col]
            need_exp = active & ~culled
            alpha = np.zeros_like(beta)
            with np.errstate(over="ignore"):
                alpha[need_exp] = np.exp(beta[need_exp])
            n_exp = int(np.count_nonzero(need_exp))
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                alpha = np.where(active & ~nonfinite, np.exp(beta), 0.0)
            culled = (alpha < 1.0 / 255.0) | nonfinite
            n_exp = int(np.count_nonzero(active & ~nonfinite))
        # Rounding error in emulated modes can push beta above zero;
        # clamp so compositing keeps transmittance in [0, 1].
        np.minimum(alpha, 1.0, out=alpha)
        return culled, alpha, n_exp


class Frag2MatBackend:
    """Alpha backend selecting coordinate mode and arithmetic model."""

    def __init__(
        self,
        coords: str = "global",
        arith: str = "exact",
        batch_width: int = DEFAULT_BATCH_WIDTH,
        use_early_cull: bool = True,
    ):
        if coords not in ("global", "local"):
            raise ValueError(f"unknown coordinate mode {coords!r}")
        if arith not in ARITH_MODES:
            raise ValueError(f"unknown arithmetic model {arith!r}")
        if batch_width < 1:
            raise ValueError("batch width must be positive")
        self.coords = coords
        self.arith = arith
        self.batch_width = batch_width
        self.use_early_cull = use_early_cull

    name = property(lambda self: f"frag2mat-{self.arith}-{self.coords}")

    def tile_evaluator(self, tx: int, ty: int, splats) -> Frag2MatEvaluator:
        origin = tile_center(tx, ty) if self.coords == "local" else np.zeros(2)
        u_mat = tile_pixel_matrix(tx, ty, self.coords)
        return Frag2MatEvaluator(
            splats, u_mat, origin, self.arith, self.batch_width, self.use_early_cull
        )
