#!/usr/bin/env python3
"""Emit one of the bundled procedural meshes as a Wavefront OBJ.

Usage: python scripts/make_mesh.py cube out/cube.obj [--side 1.0]
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from texweave.mesh import save_obj
from texweave.procedural import make_cube, make_octahedron, make_plane


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("shape", choices=["cube", "plane", "octahedron"])
    parser.add_argument("out", type=Path)
    parser.add_argument("--side", type=float, default=1.0,
                        help="edge length (cube/plane) or radius (octahedron)")
    args = parser.parse_args()

    builders = {
        "cube": lambda: make_cube(side=args.side),
        "plane": lambda: make_plane(size=args.side),
        "octahedron": lambda: make_octahedron(radius=args.side),
    }
    mesh = builders[args.shape]()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_obj(mesh, args.out)
    print(f"wrote {args.out} ({mesh.num_faces} faces)")


if __name__ == "__main__":
    main()
