"""World-space Gaussian scenes, loaders, and camera descriptions."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Degree-0 spherical harmonic basis constant, 1 / (2 * sqrt(pi)).
SH_C0 = 0.28209479177387814

QUAT_NORM_TOL = 1e-6


class SceneFormatError(ValueError):
    """Raised when a scene file cannot be parsed."""


class SceneValidationError(ValueError):
    """Raised when scene contents violate an invariant."""


@dataclass(frozen=True)
class Gaussian3D:
    """Anisotropic 3D Gaussian primitive in world space.

    The covariance is kept factored as ``R diag(scale^2) R^T`` where R is
    the rotation encoded by the unit quaternion (w, x, y, z).
    """

    mean: np.ndarray        # (3,)
    scale: np.ndarray       # (3,) positive semi-axis lengths
    rotation: np.ndarray    # (4,) unit quaternion (w, x, y, z)
    opacity: float          # in (0, 1]
    color: np.ndarray       # (3,) RGB in [0, 1]

    def validate(self, index: int | None = None) -> None:
        where = "" if index is None else f" (gaussian {index})"
        if abs(np.linalg.norm(self.rotation) - 1.0) > QUAT_NORM_TOL:
            raise SceneValidationError(f"quaternion not normalized{where}")
        if not (0.0 < self.opacity <= 1.0):
            raise SceneValidationError(f"opacity must lie in (0, 1]{where}")
        if np.any(self.scale <= 0.0):
            raise SceneValidationError(f"scale components must be positive{where}")
        if np.any(self.color < 0.0) or np.any(self.color > 1.0):
            raise SceneValidationError(f"color components must lie in [0, 1]{where}")


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with a world-to-camera view transform."""

    view: np.ndarray          # (4, 4) world-to-camera, row-major
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.2

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise SceneValidationError("image dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise SceneValidationError("focal lengths must be positive")
        if self.near <= 0:
            raise SceneValidationError("near clip must be positive")


@dataclass(frozen=True)
class Scene:
    """Immutable ordered collection of Gaussians plus provenance."""

    gaussians: tuple[Gaussian3D, ...]
    source_path: str = "<memory>"

    def __len__(self) -> int:
        return len(self.gaussians)


def rotation_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix from a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def covariance_of(g: Gaussian3D) -> np.ndarray:
    """World-space covariance ``R diag(scale^2) R^T`` (symmetric PSD)."""
    r = rotation_matrix(g.rotation)
    m = r * (g.scale**2)[np.newaxis, :]
    cov = m @ r.T
    # Symmetrize to kill the last-bit asymmetry of the two matmuls.
    return (cov + cov.T) / 2.0


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


_PLY_PROPS = (
    "x",
    "y",
    "z",
    "f_dc_0",
    "f_dc_1",
    "f_dc_2",
    "opacity",
    "scale_0",
    "scale_1",
    "scale_2",
    "rot_0",
    "rot_1",
    "rot_2",
    "rot_3",
)

_PLY_TYPES = {
    "float": ("<f4", 4),
    "float32": ("<f4", 4),
    "double": ("<f8", 8),
    "float64": ("<f8", 8),
    "uchar": ("<u1", 1),
    "uint8": ("<u1", 1),
    "int": ("<i4", 4),
    "int32": ("<i4", 4),
    "uint": ("<u4", 4),
    "uint32": ("<u4", 4),
    "short": ("<i2", 2),
    "ushort": ("<u2", 2),
}


def load_ply(path: str) -> Scene:
    """Load a binary little-endian PLY checkpoint in the standard 3DGS layout.

    Stored opacities pass through the logistic sigmoid, stored scales
    through exp, quaternions are normalized, and color is the clamped
    degree-0 SH evaluation ``0.5 + SH_C0 * f_dc``.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    end_tag = b"end_header\n"
    end = data.find(end_tag)
    if not data.startswith(b"ply") or end < 0:
        raise SceneFormatError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii", errors="replace").splitlines()

    vertex_count = None
    names: list[str] = []
    dtypes: list[tuple[str, str]] = []
    in_vertex = False
    fmt_ok = False
    for line in header:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt_ok = tok[1] == "binary_little_endian"
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                vertex_count = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                raise SceneFormatError(f"{path}: list properties unsupported")
            if tok[1] not in _PLY_TYPES:
                raise SceneFormatError(f"{path}: unsupported property type {tok[1]}")
            names.append(tok[2])
            dtypes.append((tok[2], _PLY_TYPES[tok[1]][0]))
    if not fmt_ok:
        raise SceneFormatError(f"{path}: expected binary_little_endian format")
    if vertex_count is None:
        raise SceneFormatError(f"{path}: no vertex element")
    if vertex_count == 0:
        raise SceneValidationError(f"{path}: scene contains zero vertices")
    for prop in _PLY_PROPS:
        if prop not in names:
            raise SceneFormatError(f"{path}: missing vertex property '{prop}'")

    dtype = np.dtype(dtypes)
    body = data[end + len(end_tag):]
    if len(body) < vertex_count * dtype.itemsize:
        raise SceneFormatError(f"{path}: truncated vertex data")
    verts = np.frombuffer(body[: vertex_count * dtype.itemsize], dtype=dtype)

    means = np.stack([verts["x"], verts["y"], verts["z"]], axis=1).astype(np.float64)
    f_dc = np.stack([verts["f_dc_0"], verts["f_dc_1"], verts["f_dc_2"]], axis=1).astype(np.float64)
    colors = np.clip(0.5 + SH_C0 * f_dc, 0.0, 1.0)
    opacities = _sigmoid(verts["opacity"].astype(np.float64))
    scales = np.exp(np.stack([verts["scale_0"], verts["scale_1"], verts["scale_2"]], axis=1).astype(np.float64))
    quats = np.stack([verts[f"rot_{i}"] for i in range(4)], axis=1).astype(np.float64)
    norms = np.linalg.norm(quats, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise SceneValidationError(f"{path}: zero quaternion")
    quats = quats / norms

    gaussians = tuple(
        Gaussian3D(means[i], scales[i], quats[i], float(opacities[i]), colors[i])
        for i in range(vertex_count)
    )
    for i, g in enumerate(gaussians):
        g.validate(i)
    return Scene(gaussians, source_path=path)


def load_synthetic(path: str) -> Scene:
    """Load a JSON scene with explicit per-Gaussian fields (no activations)."""
    with open(path) as fh:
        doc = json.load(fh)
    if "gaussians" not in doc:
        raise SceneFormatError(f"{path}: missing 'gaussians' key")
    gaussians = []
    for i, entry in enumerate(doc["gaussians"]):
        try:
            g = Gaussian3D(
                mean=np.asarray(entry["mean"], dtype=np.float64),
                scale=np.asarray(entry["scale"], dtype=np.float64),
                rotation=np.asarray(entry["rotation"], dtype=np.float64),
                opacity=float(entry["opacity"]),
                color=np.asarray(entry["color"], dtype=np.float64),
            )
        except (KeyError, TypeError) as exc:
            raise SceneFormatError(f"{path}: malformed gaussian {i}: {exc}") from exc
        g.validate(i)
        gaussians.append(g)
    # An empty synthetic scene is legal and renders to the background.
    return Scene(tuple(gaussians), source_path=path)


def write_synthetic(scene: Scene, path: str) -> None:
    """Write a scene in the synthetic JSON format; round-trips exactly."""
    doc = {
        "gaussians": [
            {
                "mean": list(g.mean),
                "scale": list(g.scale),
                "rotation": list(g.rotation),
                "opacity": g.opacity,
                "color": list(g.color),
            }
            for g in scene.gaussians
        ]
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_camera(path: str) -> Camera:
    """Load a camera from JSON (view matrix row-major, intrinsics in pixels)."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        cam = Camera(
            view=np.asarray(doc["view"], dtype=np.float64).reshape(4, 4),
            fx=float(doc["fx"]),
            fy=float(doc["fy"]),
            cx=float(doc["cx"]),
            cy=float(doc["cy"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
            near=float(doc.get("near", 0.2)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneFormatError(f"{path}: malformed camera: {exc}") from exc
    cam.validate()
    return cam
