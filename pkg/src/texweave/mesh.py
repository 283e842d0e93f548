"""Triangle meshes with per-vertex normals and a single UV atlas parameterization.

Wavefront OBJ is the only supported interchange format (v/vt/vn/f records,
no MTL). Faces with more than three vertices are fan-triangulated on load.
UVs are mandatory; normals are recomputed (area-weighted) when absent.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tri import triangle_coverage


class MeshError(Exception):
    """Base class for mesh loading and validation failures."""


class ParseError(MeshError):
    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class MissingUV(MeshError):
    """A face references no texture coordinates; the atlas mapping is undefined."""


class EmptyMesh(MeshError):
    """No usable vertices or faces were found."""


class DegenerateFace(MeshError):
    """A vertex accumulated a zero normal (all incident faces degenerate)."""


@dataclass
class Mesh:
    """Immutable triangle mesh.

    vertices: (N, 3) positions in object units.
    normals: (Nn, 3) unit vectors.
    uvs: (Nt, 2) atlas coordinates in [0, 1]^2.
    face_vertices / face_uvs / face_normals: (F, 3) int index arrays, one
    entry per triangle corner into the respective attribute array.
    """

    vertices: np.ndarray
    normals: np.ndarray
    uvs: np.ndarray
    face_vertices: np.ndarray
    face_uvs: np.ndarray
    face_normals: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.normals = np.ascontiguousarray(self.normals, dtype=np.float64)
        self.uvs = np.ascontiguousarray(self.uvs, dtype=np.float64)
        self.face_vertices = np.ascontiguousarray(self.face_vertices, dtype=np.int32)
        self.face_uvs = np.ascontiguousarray(self.face_uvs, dtype=np.int32)
        self.face_normals = np.ascontiguousarray(self.face_normals, dtype=np.int32)
        self._check()
        for arr in (self.vertices, self.normals, self.uvs,
                    self.face_vertices, self.face_uvs, self.face_normals):
            arr.flags.writeable = False

    def _check(self):
        if len(self.vertices) == 0 or len(self.face_vertices) == 0:
            raise EmptyMesh("mesh has no vertices or no faces")
        for name, idx, attr in (("vertex", self.face_vertices, self.vertices),
                                ("uv", self.face_uvs, self.uvs),
                                ("normal", self.face_normals, self.normals)):
            if idx.shape != self.face_vertices.shape:
                raise ParseError(f"{name} index array shape mismatch")
            if idx.size and (idx.min() < 0 or idx.max() >= len(attr)):
                raise ParseError(f"{name} index out of range")
        if self.uvs.size and (self.uvs.min() < -1e-9 or self.uvs.max() > 1 + 1e-9):
            raise ParseError("uv coordinates outside [0, 1]^2")
        lengths = np.linalg.norm(self.normals, axis=1)
        if lengths.size and np.any(np.abs(lengths - 1.0) > 1e-5):
            raise ParseError("non-unit normal")

    @property
    def num_faces(self) -> int:
        return len(self.face_vertices)

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        """Center (bounding-box center) and radius enclosing every vertex."""
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        center = 0.5 * (lo + hi)
        radius = float(np.linalg.norm(self.vertices - center, axis=1).max())
        return center, radius


@dataclass
class UVChartReport:
    """Occupancy summary of the UV atlas at a probe resolution."""

    overlap_texel_count: int
    coverage_fraction: float
    probe_resolution: int


def _parse_face_corner(token: str, counts: tuple[int, int, int], line_no: int):
    parts = token.split("/")
    if len(parts) > 3 or parts[0] == "":
        raise ParseError(f"malformed face corner {token!r}", line_no)

    def resolve(text: str, count: int, what: str) -> int | None:
        if text == "":
            return None
        try:
            raw = int(text)
        except ValueError as exc:
            raise ParseError(f"bad {what} index {text!r}", line_no) from exc
        idx = raw - 1 if raw > 0 else count + raw
        if idx < 0 or idx >= count:
            raise ParseError(f"{what} index {raw} out of range", line_no)
        return idx

    v = resolve(parts[0], counts[0], "vertex")
    vt = resolve(parts[1], counts[1], "uv") if len(parts) > 1 else None
    vn = resolve(parts[2], counts[2], "normal") if len(parts) > 2 else None
    return v, vt, vn


def load_obj(path: str | Path) -> Mesh:
    """Load a Wavefront OBJ file.

    Polygonal faces are fan-triangulated (convex polygons assumed). Normals
    are normalized if present, recomputed if any corner omits them. A face
    without vt indices raises MissingUV: the atlas mapping cannot be guessed.
    """
    path = Path(path)
    vertices: list[list[float]] = []
    uvs: list[list[float]] = []
    normals: list[list[float]] = []
    corners: list[list[tuple]] = []

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            kind, args = fields[0], fields[1:]
            try:
                if kind == "v":
                    vertices.append([float(x) for x in args[:3]])
                    if len(args) < 3:
                        raise ParseError("vertex needs 3 coordinates", line_no)
                elif kind == "vt":
                    if len(args) < 2:
                        raise ParseError("uv needs 2 coordinates", line_no)
                    uvs.append([float(x) for x in args[:2]])
                elif kind == "vn":
                    if len(args) < 3:
                        raise ParseError("normal needs 3 coordinates", line_no)
                    normals.append([float(x) for x in args[:3]])
                elif kind == "f":
                    if len(args) < 3:
                        raise ParseError("face needs at least 3 corners", line_no)
                    counts = (len(vertices), len(uvs), len(normals))
                    poly = [_parse_face_corner(t, counts, line_no) for t in args]
                    for i in range(1, len(poly) - 1):
                        corners.append([poly[0], poly[i], poly[i + 1]])
                # other record types (o, g, s, usemtl, mtllib) are ignored
            except ParseError:
                raise
            except ValueError as exc:
                raise ParseError(str(exc), line_no) from exc

    if not corners or not vertices:
        raise EmptyMesh(f"{path}: no faces found")

    face_vertices = np.array([[c[0] for c in f] for f in corners], dtype=np.int32)
    if any(c[1] is None for f in corners for c in f):
        raise MissingUV(f"{path}: faces without vt indices")
    face_uvs = np.array([[c[1] for c in f] for f in corners], dtype=np.int32)

    have_all_normals = normals and all(c[2] is not None for f in corners for c in f)
    if have_all_normals:
        nrm = np.asarray(normals, dtype=np.float64)
        lengths = np.linalg.norm(nrm, axis=1, keepdims=True)
        if np.any(lengths == 0.0):
            raise ParseError("zero-length normal record")
        nrm = nrm / lengths
        face_normals = np.array([[c[2] for c in f] for f in corners], dtype=np.int32)
        mesh = Mesh(np.asarray(vertices), nrm, np.asarray(uvs),
                    face_vertices, face_uvs, face_normals)
    else:
        placeholder = np.zeros((len(vertices), 3))
        placeholder[:, 2] = 1.0
        mesh = Mesh(np.asarray(vertices), placeholder, np.asarray(uvs),
                    face_vertices, face_uvs, face_vertices.copy())
        mesh = compute_normals(mesh)
    return mesh


def save_obj(mesh: Mesh, path: str | Path) -> None:
    """Write v/vt/vn/f records; inverse of load_obj up to float text precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.uvs:
            fh.write(f"vt {t[0]:.17g} {t[1]:.17g}\n")
        for n in mesh.normals:
            fh.write(f"vn {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")
        for fv, ft, fn in zip(mesh.face_vertices, mesh.face_uvs, mesh.face_normals):
            fh.write("f " + " ".join(f"{v + 1}/{t + 1}/{n + 1}"
                                     for v, t, n in zip(fv, ft, fn)) + "\n")


def compute_normals(mesh: Mesh) -> Mesh:
    """Recompute per-vertex normals as normalized area-weighted face normal sums.

    Zero-area faces contribute nothing; a vertex whose incident faces are all
    degenerate raises DegenerateFace.
    """
    acc = np.zeros((len(mesh.vertices), 3))
    tri = mesh.vertices[mesh.face_vertices]          # (F, 3, 3)
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    np.add.at(acc, mesh.face_vertices.reshape(-1), np.repeat(cross, 3, axis=0))

    referenced = np.zeros(len(mesh.vertices), dtype=bool)
    referenced[mesh.face_vertices.reshape(-1)] = True
    lengths = np.linalg.norm(acc, axis=1)
    if np.any(referenced & (lengths < 1e-12)):
        bad = int(np.nonzero(referenced & (lengths < 1e-12))[0][0])
        raise DegenerateFace(f"vertex {bad} has zero accumulated normal")
    normals = acc.copy()
    normals[referenced] /= lengths[referenced, None]
    normals[~referenced] = (0.0, 0.0, 1.0)
    return Mesh(mesh.vertices, normals, mesh.uvs,
                mesh.face_vertices, mesh.face_uvs, mesh.face_vertices.copy())


def validate_uv_atlas(mesh: Mesh, probe_resolution: int) -> UVChartReport:
    """Rasterize every face into UV space and report overlap and coverage.

    Overlaps are reported, not rejected: projection onto overlapping charts
    still runs but converges to an average of the competing views.
    """
    if probe_resolution < 16:
        raise ValueError("probe_resolution must be >= 16")
    res = probe_resolution
    counts = np.zeros((res, res), dtype=np.int32)
    centers = (np.arange(res) + 0.5) / res

    for face_uv in mesh.face_uvs:
        tri = mesh.uvs[face_uv]                      # (3, 2) in [0, 1]^2
        lo = np.clip(np.floor(tri.min(axis=0) * res - 0.5).astype(int), 0, res - 1)
        hi = np.clip(np.ceil(tri.max(axis=0) * res + 0.5).astype(int), 0, res)
        us = centers[lo[0]:hi[0]]
        vs = centers[lo[1]:hi[1]]
        if us.size == 0 or vs.size == 0:
            continue
        uu, vv = np.meshgrid(us, vs, indexing="xy")
        inside, _ = triangle_coverage(tri, uu.ravel(), vv.ravel())
        block = inside.reshape(vv.shape)
        counts[lo[1]:hi[1], lo[0]:hi[0]] += block.astype(np.int32)

    return UVChartReport(
        overlap_texel_count=int((counts >= 2).sum()),
        coverage_fraction=float((counts >= 1).mean()),
        probe_resolution=res,
    )
