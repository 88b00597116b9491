"""Command-line front end: render, compare, profile, and error-sweep."""

from __future__ import annotations

import argparse
import json
import math
import sys

from tilesplat import images
from tilesplat.precision import FORMATS, coordinate_error_sweep
from tilesplat.raster import computation_model, make_backend, render
from tilesplat.scene import SceneFormatError, SceneValidationError, load_camera, load_ply, load_synthetic

BACKENDS = ("reference", "frag2mat", "frag2mat-fp16", "frag2mat-tf32")


def _load_scene(path: str):
    if path.lower().endswith(".ply"):
        return load_ply(path)
    return load_synthetic(path)


def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def _write_json(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_render(args) -> int:
    scene = _load_scene(args.scene)
    cam = load_camera(args.camera)
    backend = make_backend(
        args.backend, coords=args.coords, batch_width=args.batch_width,
        use_early_cull=not args.no_early_cull,
    )
    img, stats = render(scene, cam, backend)
    images.write_image(img, args.out)
    if args.stats_out:
        _write_json(stats.to_dict(), args.stats_out)
    return 0


def cmd_compare(args) -> int:
    scene = _load_scene(args.scene)
    cam = load_camera(args.camera)
    backend_a = make_backend(args.backend_a, coords=args.coords_a, batch_width=args.batch_width)
    backend_b = make_backend(args.backend_b, coords=args.coords_b, batch_width=args.batch_width)
    img_a, stats_a = render(scene, cam, backend_a)
    img_b, stats_b = render(scene, cam, backend_b)
    a_counts = stats_a.counts()
    b_counts = stats_b.counts()
    report = {
        "backend_a": backend_a.name,
        "backend_b": backend_b.name,
        "psnr_db": _json_safe(images.psnr(img_a.rgb, img_b.rgb)),
        "max_channel_diff": images.max_channel_diff(img_a.rgb, img_b.rgb),
        "stats_a": stats_a.to_dict(),
        "stats_b": stats_b.to_dict(),
        "stats_delta": {
            "f_blend": b_counts[0] - a_counts[0],
            "f_cull": b_counts[1] - a_counts[1],
            "f_skip": b_counts[2] - a_counts[2],
            "exp_calls": b_counts[3] - a_counts[3],
        },
    }
    _write_json(report, args.out)
    return 0


def cmd_profile(args) -> int:
    scene = _load_scene(args.scene)
    cam = load_camera(args.camera)
    on = make_backend("frag2mat", coords=args.coords, batch_width=args.batch_width, use_early_cull=True)
    off = make_backend("frag2mat", coords=args.coords, batch_width=args.batch_width, use_early_cull=False)
    img_on, stats_on = render(scene, cam, on)
    img_off, stats_off = render(scene, cam, off)
    total = stats_on.total_fragments
    frac = (lambda k: k / total if total else 0.0)
    report = {
        "total_fragments": total,
        "N": stats_on.n_splats,
        "fractions": {
            "blended": frac(stats_on.f_blend),
            "culled": frac(stats_on.f_cull),
            "skipped": frac(stats_on.f_skip),
        },
        "exp_calls": {
            "early_cull": stats_on.exp_calls,
            "no_early_cull": stats_off.exp_calls,
        },
        "images_identical": bool((img_on.rgb == img_off.rgb).all()),
        "computation_model": computation_model(stats_on, args.k_alpha, args.k_cull, args.k_blend),
        "k": {"alpha": args.k_alpha, "cull": args.k_cull, "blend": args.k_blend},
    }
    _write_json(report, args.out)
    return 0


def cmd_error_sweep(args) -> int:
    widths = [int(w) for w in args.widths.split(",") if w]
    report = coordinate_error_sweep(
        widths, args.mode, args.trials, args.seed, FORMATS[args.format]
    )
    doc = report.to_dict()
    doc["slope"] = _json_safe(doc["slope"]) if not math.isnan(doc["slope"]) else None
    _write_json(doc, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tilesplat")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scene_args(p):
        p.add_argument("--scene", required=True, help="scene file (.json synthetic or .ply)")
        p.add_argument("--camera", required=True, help="camera JSON file")
        p.add_argument("--batch-width", type=int, default=16)

    p = sub.add_parser("render", help="render one view")
    add_scene_args(p)
    p.add_argument("--backend", choices=BACKENDS, default="reference")
    p.add_argument("--coords", choices=("global", "local"), default="global")
    p.add_argument("--no-early-cull", action="store_true")
    p.add_argument("--out", required=True, help="output image (.ppm or .png)")
    p.add_argument("--stats-out", help="fragment stats JSON path")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="render with two backends and report PSNR")
    add_scene_args(p)
    p.add_argument("--backend-a", choices=BACKENDS, default="reference")
    p.add_argument("--coords-a", choices=("global", "local"), default="global")
    p.add_argument("--backend-b", choices=BACKENDS, default="frag2mat")
    p.add_argument("--coords-b", choices=("global", "local"), default="global")
    p.add_argument("--out", help="report JSON path (stdout when omitted)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("profile", help="fragment category breakdown and cost model")
    add_scene_args(p)
    p.add_argument("--coords", choices=("global", "local"), default="local")
    p.add_argument("--k-alpha", type=float, default=1.0)
    p.add_argument("--k-cull", type=float, default=1.0)
    p.add_argument("--k-blend", type=float, default=1.0)
    p.add_argument("--out", help="report JSON path (stdout when omitted)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("error-sweep", help="coordinate-mode rounding-error sweep")
    p.add_argument("--mode", choices=("global", "local"), required=True)
    p.add_argument("--format", choices=("fp16", "tf32"), default="fp16")
    p.add_argument("--widths", default="256,512,1024,2048")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path (stdout when omitted)")
    p.set_defaults(func=cmd_error_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, SceneFormatError, SceneValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
