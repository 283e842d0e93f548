"""Command-line interface.

    texweave generate --config cfg.json [--seed N] [--denoiser mock:identity]
    texweave render --mesh m.obj --atlas atlas.npy --view-index 0 --out dir
    texweave validate mesh.obj
    texweave config --print-defaults

Flags override file-config values. Exit codes: 0 success, 1 validation
failure, 2 input error, 3 backend error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from .camera import Viewpoint, schedule_viewpoints
from .config import PipelineConfig
from .mesh import MeshError, load_obj
from .pipeline import (EXIT_BACKEND, EXIT_INPUT, EXIT_OK, PipelineBackendError,
                       PipelineInputError, generate, render_view, validate_mesh)


def _add_generate(sub):
    p = sub.add_parser("generate", help="run the full multi-view texture loop")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mesh", help="mesh path (overrides config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--denoiser", help="mock:<kind> or remote")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="smoothness penalty weight")
    p.add_argument("--stride", type=int, help="reconciliation window stride")
    p.add_argument("--atlas-size", type=int)
    p.add_argument("--render-size", type=int)
    p.add_argument("--steps", type=int, help="optimizer steps per view")
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--targets", help="decode | render:<atlas> | files:<dir>")
    p.add_argument("--prompt")


def _add_render(sub):
    p = sub.add_parser("render", help="shade one view of a textured mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--atlas", required=True, help=".npy or .png atlas")
    p.add_argument("--config", help="JSON config for shading parameters")
    p.add_argument("--view-index", type=int,
                   help="index into the 10-view schedule")
    p.add_argument("--azimuth", type=float)
    p.add_argument("--elevation", type=float, default=0.0)
    p.add_argument("--radius", type=float)
    p.add_argument("--fov", type=float, default=math.pi / 4)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--out", default="texweave_out")
    p.add_argument("--stem", default="render")


def _add_validate(sub):
    p = sub.add_parser("validate", help="report UV-atlas health for a mesh")
    p.add_argument("mesh")
    p.add_argument("--probe-resolution", type=int, default=512)


def _add_config(sub):
    p = sub.add_parser("config", help="configuration utilities")
    p.add_argument("--print-defaults", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="texweave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_render(sub)
    _add_validate(sub)
    _add_config(sub)
    return parser


_GENERATE_FLAGS = {
    "mesh": "mesh_path", "seed": "seed", "denoiser": "denoiser", "lam": "lam",
    "stride": "window_stride", "atlas_size": "atlas_size",
    "render_size": "render_size", "steps": "steps", "workers": "workers",
    "output_dir": "output_dir", "targets": "targets", "prompt": "prompt",
}


def _cmd_generate(args) -> int:
    try:
        cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
        for flag, attr in _GENERATE_FLAGS.items():
            value = getattr(args, flag, None)
            if value is not None:
                setattr(cfg, attr, value)
        if not cfg.mesh_path:
            print("error: no mesh configured (use --mesh or config)", file=sys.stderr)
            return EXIT_INPUT
    except (OSError, KeyError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        manifest = generate(cfg)
    except PipelineInputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineBackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    print(f"atlas written to {manifest.atlas_float}")
    print(f"manifest: {cfg.output_dir}/run_manifest.json")
    return EXIT_OK


def _cmd_render(args) -> int:
    try:
        cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
        mesh = load_obj(args.mesh)
        from .pipeline import _load_image_any
        atlas = _load_image_any(args.atlas)
        center, bsr = mesh.bounding_sphere()
        radius = args.radius if args.radius else cfg.radius_factor * bsr
        if args.view_index is not None:
            vp = schedule_viewpoints(radius, args.fov, args.size)[args.view_index]
        elif args.azimuth is not None:
            vp = Viewpoint(args.azimuth, args.elevation, radius, args.fov, args.size)
        else:
            print("error: pass --view-index or --azimuth", file=sys.stderr)
            return EXIT_INPUT
        paths = render_view(mesh, atlas, vp, cfg.shading(), args.out, args.stem)
    except (OSError, MeshError, PipelineInputError, IndexError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(paths, indent=2))
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        summary, code = validate_mesh(args.mesh, args.probe_resolution)
    except (OSError, MeshError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(summary, indent=2))
    return code


def _cmd_config(args) -> int:
    if args.print_defaults:
        print(json.dumps(PipelineConfig().to_dict(), indent=2))
        return EXIT_OK
    print("nothing to do (try --print-defaults)", file=sys.stderr)
    return EXIT_INPUT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "generate": _cmd_generate,
        "render": _cmd_render,
        "validate": _cmd_validate,
        "config": _cmd_config,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
