"""Image output (binary PPM, optional PNG) and the PSNR metric."""

from __future__ import annotations

import math

import numpy as np

from tilesplat.raster import ImageBuffer


def quantize(img: ImageBuffer) -> np.ndarray:
    """8-bit quantization, rounding half-up from clamped floats."""
    return np.floor(np.clip(img.rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(img: ImageBuffer, path: str) -> None:
    data = quantize(img)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_png(img: ImageBuffer, path: str) -> None:
    from PIL import Image as PILImage

    PILImage.fromarray(quantize(img), mode="RGB").save(path)


def write_image(img: ImageBuffer, path: str) -> None:
    if path.lower().endswith(".png"):
        write_png(img, path)
    else:
        write_ppm(img, path)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB over float RGB in [0, 1]; identical images give +inf."""
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def max_channel_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b))) if a.size else 0.0
