"""Preprocess stage: EWA projection of 3D Gaussians to screen space."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tilesplat.scene import Camera, Gaussian3D, covariance_of

# Low-pass dilation added to both diagonal entries of the projected
# covariance (reference-3DGS convention).
COV_DILATION = 0.3

# Projected-covariance eigenvalues are clamped to >= this value so that
# the inverse-covariance entries always satisfy 0 < s11 + s22 <= 4.
MIN_EIGENVALUE = 0.5


@dataclass(frozen=True)
class ProjectedGaussian:
    """Screen-space Gaussian: 2D mean, inverse 2D covariance, depth."""

    mean2d: np.ndarray   # (2,) pixels
    inv_cov: tuple[float, float, float]  # (s11, s12, s22), s12 == s21
    depth: float         # camera-space z
    opacity: float
    color: np.ndarray    # (3,)
    radius: int          # conservative pixel radius for tile coverage


def invert_cov2(sigma: np.ndarray) -> tuple[float, float, float]:
    """Closed-form inverse of a symmetric 2x2 matrix as (s11, s12, s22).

    Raises ValueError when the determinant is not positive.
    """
    a, b, c = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    det = a * c - b * b
    if det <= 0.0:
        raise ValueError(f"non-invertible 2x2 covariance (det={det})")
    return (c / det, -b / det, a / det)


def _clamp_eigenvalues(sigma: np.ndarray, floor: float) -> np.ndarray:
    """Clamp the eigenvalues of a symmetric 2x2 matrix to >= floor."""
    a, b, c = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    mid = (a + c) / 2.0
    half = math.hypot((a - c) / 2.0, b)
    lo, hi = mid - half, mid + half
    if lo >= floor:
        return sigma
    lo_c, hi_c = max(lo, floor), max(hi, floor)
    if half == 0.0:
        return np.array([[lo_c, 0.0], [0.0, lo_c]])
    # Eigenvector for hi: (b, hi - a) unless degenerate along the axes.
    if abs(b) > 1e-300:
        v = np.array([b, hi - a])
    elif a >= c:
        v = np.array([1.0, 0.0])
    else:
        v = np.array([0.0, 1.0])
    v = v / np.linalg.norm(v)
    u = np.array([-v[1], v[0]])
    return hi_c * np.outer(v, v) + lo_c * np.outer(u, u)


def project(g: Gaussian3D, cam: Camera) -> ProjectedGaussian | None:
    """Project a single Gaussian; returns None when frustum-culled.

    The projected covariance is ``J W Sigma W^T J^T`` with the local-affine
    perspective Jacobian, dilated by +0.3 on the diagonal and eigenvalue
    clamped before inversion. All arithmetic is double precision.
    """
    t = cam.view[:3, :3] @ g.mean + cam.view[:3, 3]
    tz = t[2]
    if tz <= cam.near:
        return None

    mean2d = np.array(
        [cam.fx * t[0] / tz + cam.cx, cam.fy * t[1] / tz + cam.cy]
    )

    jac = np.array(
        [
            [cam.fx / tz, 0.0, -cam.fx * t[0] / (tz * tz)],
            [0.0, cam.fy / tz, -cam.fy * t[1] / (tz * tz)],
        ]
    )
    w3 = cam.view[:3, :3]
    cov3 = covariance_of(g)
    m = jac @ w3
    sigma = m @ cov3 @ m.T
    sigma = (sigma + sigma.T) / 2.0
    sigma[0, 0] += COV_DILATION
    sigma[1, 1] += COV_DILATION
    sigma = _clamp_eigenvalues(sigma, MIN_EIGENVALUE)

    a, b, c = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    mid = (a + c) / 2.0
    lam_max = mid + math.hypot((a - c) / 2.0, b)
    radius = math.ceil(3.0 * math.sqrt(lam_max))

    try:
        inv = invert_cov2(sigma)
    except ValueError:
        return None

    return ProjectedGaussian(
        mean2d=mean2d,
        inv_cov=inv,
        depth=float(tz),
        opacity=g.opacity,
        color=g.color,
        radius=radius,
    )


def project_scene(gaussians, cam: Camera) -> tuple[list[ProjectedGaussian], int]:
    """Project every Gaussian; returns survivors and the dropped count.

    Dropped covers both frustum-culled and non-invertible Gaussians (the
    latter cannot occur once eigenvalue clamping is active, but the
    counter is kept as a diagnostic).
    """
    out: list[ProjectedGaussian] = []
    dropped = 0
    for g in gaussians:
        pg = project(g, cam)
        if pg is None:
            dropped += 1
        else:
            out.append(pg)
    return out, dropped
