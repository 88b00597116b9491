import json
import re

import numpy as np
import pytest

from tilesplat.scene import Camera, Gaussian3D, Scene

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_criterion_(\d+)", report.nodeid)
    if match and report.when == "call":
        _ACCEPTANCE[int(match.group(1))] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        outcome = _ACCEPTANCE[num]
        word = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {word}")


def make_camera(width=256, height=256, focal=None, near=0.2) -> Camera:
    focal = focal or width * 1.2
    return Camera(
        view=np.eye(4),
        fx=float(focal),
        fy=float(focal),
        cx=width / 2.0,
        cy=height / 2.0,
        width=width,
        height=height,
        near=near,
    )


def random_gaussian(rng, depth_range=(4.0, 9.0), xy_spread=1.6, scale_range=(0.15, 0.5),
                    opacity_range=(0.15, 0.5)) -> Gaussian3D:
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    return Gaussian3D(
        mean=np.array(
            [rng.uniform(-xy_spread, xy_spread), rng.uniform(-xy_spread, xy_spread),
             rng.uniform(*depth_range)]
        ),
        scale=rng.uniform(*scale_range, size=3),
        rotation=q,
        opacity=float(rng.uniform(*opacity_range)),
        color=rng.uniform(0.0, 1.0, size=3),
    )


def make_scene(seed, n, **kwargs) -> Scene:
    rng = np.random.default_rng(seed)
    return Scene(tuple(random_gaussian(rng, **kwargs) for _ in range(n)), source_path=f"<seed {seed}>")


def write_camera_json(path, cam: Camera) -> None:
    doc = {
        "view": [float(x) for x in cam.view.reshape(-1)],
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "width": cam.width,
        "height": cam.height,
        "near": cam.near,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


@pytest.fixture
def small_scene() -> Scene:
    return make_scene(7, 12)


@pytest.fixture
def small_camera() -> Camera:
    return make_camera(96, 96)
