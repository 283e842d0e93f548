"""Procedurally built meshes with clean, non-overlapping UV charts.

These are the canonical inputs for round-trip experiments and the test
suite: a flat plane, a cube with six inset charts on a 3x2 grid, and an
octahedron with eight triangular charts. Chart insets keep bilinear
footprints from bleeding across chart boundaries.
"""
from __future__ import annotations

import numpy as np

from .mesh import Mesh, compute_normals

_CUBE_CORNERS = {
    "+x": [(1, -1, 1), (1, -1, -1), (1, 1, -1), (1, 1, 1)],
    "-x": [(-1, -1, -1), (-1, -1, 1), (-1, 1, 1), (-1, 1, -1)],
    "+y": [(-1, 1, 1), (1, 1, 1), (1, 1, -1), (-1, 1, -1)],
    "-y": [(-1, -1, -1), (1, -1, -1), (1, -1, 1), (-1, -1, 1)],
    "+z": [(-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1)],
    "-z": [(1, -1, -1), (-1, -1, -1), (-1, 1, -1), (1, 1, -1)],
}

_CUBE_NORMALS = {"+x": (1, 0, 0), "-x": (-1, 0, 0), "+y": (0, 1, 0),
                 "-y": (0, -1, 0), "+z": (0, 0, 1), "-z": (0, 0, -1)}


def make_plane(size: float = 1.0) -> Mesh:
    """Unit square in the z=0 plane, normals +z, UVs covering [0, 1]^2."""
    s = size
    vertices = np.array([[0, 0, 0], [s, 0, 0], [s, s, 0], [0, s, 0]], dtype=float)
    uvs = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    normals = np.array([[0, 0, 1.0]])
    faces = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return Mesh(vertices, normals, uvs, faces, faces.copy(),
                np.zeros_like(faces))


def make_cube(side: float = 1.0, margin: float = 0.02) -> Mesh:
    """Axis-aligned cube centered at the origin, one UV chart per face."""
    h = side / 2.0
    vertices, uvs, normals = [], [], []
    fv, ft, fn = [], [], []
    for idx, key in enumerate(["+x", "-x", "+y", "-y", "+z", "-z"]):
        col, row = idx % 3, idx // 3
        u0, u1 = col / 3 + margin, (col + 1) / 3 - margin
        v0, v1 = row / 2 + margin, (row + 1) / 2 - margin
        base_v = len(vertices)
        base_t = len(uvs)
        vertices += [tuple(h * c for c in corner) for corner in _CUBE_CORNERS[key]]
        uvs += [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
        normals.append(_CUBE_NORMALS[key])
        for tri in ((0, 1, 2), (0, 2, 3)):
            fv.append([base_v + i for i in tri])
            ft.append([base_t + i for i in tri])
            fn.append([idx] * 3)
    return Mesh(np.array(vertices, dtype=float), np.array(normals, dtype=float),
                np.array(uvs, dtype=float), np.array(fv, dtype=np.int32),
                np.array(ft, dtype=np.int32), np.array(fn, dtype=np.int32))


def make_octahedron(radius: float = 1.0, margin: float = 0.03) -> Mesh:
    """Regular octahedron with smooth area-weighted vertex normals."""
    r = radius
    vertices = np.array([[r, 0, 0], [-r, 0, 0], [0, r, 0],
                         [0, -r, 0], [0, 0, r], [0, 0, -r]], dtype=float)
    px, nx, py, ny, pz, nz = range(6)
    faces = [(px, py, pz), (py, nx, pz), (nx, ny, pz), (ny, px, pz),
             (py, px, nz), (nx, py, nz), (ny, nx, nz), (px, ny, nz)]
    uvs, ft = [], []
    for idx in range(8):
        col, row = idx % 4, idx // 4
        u0, u1 = col / 4 + margin, (col + 1) / 4 - margin
        v0, v1 = row / 2 + margin, (row + 1) / 2 - margin
        base = len(uvs)
        uvs += [(u0, v0), (u1, v0), ((u0 + u1) / 2, v1)]
        ft.append([base, base + 1, base + 2])
    fv = np.array(faces, dtype=np.int32)
    placeholder = np.zeros((6, 3))
    placeholder[:, 2] = 1.0
    mesh = Mesh(vertices, placeholder, np.array(uvs, dtype=float),
                fv, np.array(ft, dtype=np.int32), fv.copy())
    return compute_normals(mesh)
