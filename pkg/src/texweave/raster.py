"""Deterministic CPU rasterization, bilinear atlas sampling, and the exact
backward pass from image-space gradients to texture-atlas gradients.

Geometry (visibility, barycentrics) is treated as constant in the backward
pass: gradients flow only into texel values. Sampling is at pixel centers
with no antialiasing so the coverage mask stays binary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera, Viewpoint
from .mesh import Mesh
from .parallel import map_strips
from .tri import triangle_coverage


class ShapeMismatch(Exception):
    """Gradient or target image shaped differently from the G-buffer."""


@dataclass
class GBuffer:
    """Per-pixel rasterization record for one view.

    mask is true exactly where face_id >= 0. Barycentrics are
    perspective-correct and sum to 1 on covered pixels. position holds the
    interpolated world-space surface point; camera_position allows per-pixel
    view vectors for specular shading.
    """

    face_id: np.ndarray       # (H, W) int32, -1 where uncovered
    barycentric: np.ndarray   # (H, W, 3)
    uv: np.ndarray            # (H, W, 2)
    normal: np.ndarray        # (H, W, 3) unit where covered
    position: np.ndarray      # (H, W, 3) world space
    depth: np.ndarray         # (H, W) camera-space forward distance
    mask: np.ndarray          # (H, W) bool
    camera_position: np.ndarray   # (3,)

    @property
    def image_size(self) -> tuple[int, int]:
        return self.mask.shape


@dataclass
class BilinearFootprint:
    """The four atlas texels and weights backing one sampled uv location."""

    texel_indices: np.ndarray   # (4, 2) as (row, col)
    weights: np.ndarray         # (4,) nonnegative, sums to 1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.min() < -1e-12 or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("footprint weights must be nonnegative and sum to 1")


def rasterize(mesh: Mesh, vp: Viewpoint, workers: int = 1) -> GBuffer:
    """Z-buffered, back-face-culled coverage with pixel-center sampling.

    The camera orbits the mesh bounding-sphere center. Faces with a corner at
    or behind the camera plane are skipped (no near-plane clipping; orbit
    radii keep the object strictly in front). Deterministic for fixed inputs
    at any worker count: pixels are strip-partitioned and each strip walks
    faces in index order.
    """
    size = vp.image_size
    center, _ = mesh.bounding_sphere()
    cam = Camera(vp, target=center)

    ndc, z = cam.project(mesh.vertices)
    sx = (ndc[:, 0] + 1.0) * 0.5 * size
    sy = (1.0 - ndc[:, 1]) * 0.5 * size

    tri_v = mesh.vertices[mesh.face_vertices]                    # (F, 3, 3)
    face_normal = np.cross(tri_v[:, 1] - tri_v[:, 0], tri_v[:, 2] - tri_v[:, 0])
    facing = np.einsum("fi,fi->f", face_normal, cam.position - tri_v[:, 0]) > 0.0
    in_front = np.all(z[mesh.face_vertices] > 1e-9, axis=1)
    keep = np.nonzero(facing & in_front)[0]

    screen = np.stack([sx, sy], axis=-1)

    def strip(row0: int, row1: int):
        h = row1 - row0
        face_id = np.full((h, size), -1, dtype=np.int32)
        bary = np.zeros((h, size, 3))
        zbuf = np.full((h, size), np.inf)
        for f in keep:
            vi = mesh.face_vertices[f]
            tri = screen[vi]
            lo_x = max(int(np.floor(tri[:, 0].min() - 0.5)), 0)
            hi_x = min(int(np.ceil(tri[:, 0].max() + 0.5)), size)
            lo_y = max(int(np.floor(tri[:, 1].min() - 0.5)), row0)
            hi_y = min(int(np.ceil(tri[:, 1].max() + 0.5)), row1)
            if lo_x >= hi_x or lo_y >= hi_y:
                continue
            cols = np.arange(lo_x, hi_x) + 0.5
            rows = np.arange(lo_y, hi_y) + 0.5
            px, py = np.meshgrid(cols, rows, indexing="xy")
            inside, lam = triangle_coverage(tri, px.ravel(), py.ravel())
            if not inside.any():
                continue
            # explicit sum: BLAS reductions are not bit-stable across the
            # array shapes produced by different strip heights
            wz = 1.0 / z[vi]
            inv_z = lam[:, 0] * wz[0] + lam[:, 1] * wz[1] + lam[:, 2] * wz[2]
            depth = np.where(inside, 1.0 / np.where(inv_z != 0, inv_z, 1.0), np.inf)
            shape = (hi_y - lo_y, hi_x - lo_x)
            depth = depth.reshape(shape)
            win = (slice(lo_y - row0, hi_y - row0), slice(lo_x, hi_x))
            better = inside.reshape(shape) & (depth < zbuf[win])
            if not better.any():
                continue
            beta = lam * wz[None, :] / inv_z[:, None]
            beta = beta.reshape(shape + (3,))
            zbuf[win] = np.where(better, depth, zbuf[win])
            face_id[win] = np.where(better, f, face_id[win])
            bary[win] = np.where(better[..., None], beta, bary[win])
        return face_id, bary, zbuf

    parts = map_strips(strip, size, workers)
    face_id = np.concatenate([p[0] for p in parts], axis=0)
    bary = np.concatenate([p[1] for p in parts], axis=0)
    zbuf = np.concatenate([p[2] for p in parts], axis=0)

    mask = face_id >= 0
    uv = np.zeros((size, size, 2))
    normal = np.zeros((size, size, 3))
    position = np.zeros((size, size, 3))
    depth = np.zeros((size, size))
    if mask.any():
        fid = face_id[mask]
        b = bary[mask]
        uv[mask] = np.einsum("pk,pkc->pc", b, mesh.uvs[mesh.face_uvs[fid]])
        n = np.einsum("pk,pkc->pc", b, mesh.normals[mesh.face_normals[fid]])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        normal[mask] = n
        position[mask] = np.einsum("pk,pkc->pc", b, mesh.vertices[mesh.face_vertices[fid]])
        depth[mask] = zbuf[mask]
    return GBuffer(face_id=face_id, barycentric=bary, uv=uv, normal=normal,
                   position=position, depth=depth, mask=mask,
                   camera_position=cam.position.copy())


def _atlas_values(atlas) -> np.ndarray:
    values = getattr(atlas, "values", atlas)
    return np.asarray(values)


def bilinear_footprints(uvs: np.ndarray, atlas_shape: tuple[int, int]):
    """Vectorized 4-texel footprints with clamp-to-edge addressing.

    uvs: (N, 2) in [0, 1]^2. Returns (rows (N, 4), cols (N, 4), weights (N, 4));
    texel (r, c) has its center at uv = ((c + 0.5) / W, (r + 0.5) / H).
    """
    h, w = atlas_shape[0], atlas_shape[1]
    x = uvs[:, 0] * w - 0.5
    y = uvs[:, 1] * h - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    c0 = np.clip(x0.astype(np.int64), 0, w - 1)
    c1 = np.clip(x0.astype(np.int64) + 1, 0, w - 1)
    r0 = np.clip(y0.astype(np.int64), 0, h - 1)
    r1 = np.clip(y0.astype(np.int64) + 1, 0, h - 1)
    rows = np.stack([r0, r0, r1, r1], axis=1)
    cols = np.stack([c0, c1, c0, c1], axis=1)
    weights = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy),
                        (1 - fx) * fy, fx * fy], axis=1)
    return rows, cols, weights


def sample_texture(atlas, uv) -> tuple[np.ndarray, BilinearFootprint]:
    """Bilinear sample of one uv location; returns (rgb, footprint)."""
    values = _atlas_values(atlas)
    uvs = np.asarray(uv, dtype=np.float64).reshape(1, 2)
    rows, cols, weights = bilinear_footprints(uvs, values.shape[:2])
    rgb = np.einsum("nk,nkc->nc", weights, values[rows, cols])[0]
    fp = BilinearFootprint(
        texel_indices=np.stack([rows[0], cols[0]], axis=1),
        weights=weights[0],
    )
    return rgb, fp


def sample_texture_grid(atlas, uvs: np.ndarray) -> np.ndarray:
    """Bilinear sample of (N, 2) uv locations; returns (N, C)."""
    values = _atlas_values(atlas)
    rows, cols, weights = bilinear_footprints(uvs, values.shape[:2])
    return np.einsum("nk,nkc->nc", weights, values[rows, cols])


def scatter_weighted(rows: np.ndarray, cols: np.ndarray, weights: np.ndarray,
                     grads: np.ndarray, atlas_hw: tuple[int, int]) -> np.ndarray:
    """Accumulate grads (M, C) into footprints (rows/cols/weights, each (M, 4)).

    Accumulation order follows the row order of the inputs; callers that need
    bit-determinism must present footprints in a fixed order.
    """
    ah, aw = atlas_hw
    channels = grads.shape[-1]
    vals = weights[..., None] * grads.reshape(-1, 1, channels)
    flat = (rows * aw + cols).reshape(-1)
    flat_vals = vals.reshape(-1, channels)
    # bincount accumulates in input order (like np.add.at) but much faster
    out = np.stack([np.bincount(flat, weights=flat_vals[:, ch], minlength=ah * aw)
                    for ch in range(channels)], axis=1)
    return out.reshape(ah, aw, channels)


def backward_to_texture(gbuffer: GBuffer, image_grad: np.ndarray,
                        atlas_shape: tuple[int, ...], workers: int = 1) -> np.ndarray:
    """Scatter per-pixel gradients into the 4-texel footprints of each pixel.

    image_grad: (H, W, C) with zeros outside the mask. The scatter order is
    row-major over pixels for any worker count (workers parallelize footprint
    computation only; a single ordered accumulation performs the reduction),
    so results are bit-identical regardless of concurrency.
    """
    h, w = gbuffer.mask.shape
    image_grad = np.asarray(image_grad, dtype=np.float64)
    if image_grad.shape[:2] != (h, w):
        raise ShapeMismatch(f"image_grad {image_grad.shape} vs gbuffer {(h, w)}")
    channels = image_grad.shape[2] if image_grad.ndim == 3 else 1
    ah, aw = atlas_shape[0], atlas_shape[1]

    def strip(row0: int, row1: int):
        m = gbuffer.mask[row0:row1]
        if not m.any():
            return (np.empty(0, dtype=np.int64), np.empty((0, channels)))
        uvs = gbuffer.uv[row0:row1][m]
        rows, cols, weights = bilinear_footprints(uvs, (ah, aw))
        g = image_grad[row0:row1][m].reshape(-1, 1, channels)
        vals = weights[..., None] * g                      # (M, 4, C)
        flat = (rows * aw + cols).reshape(-1)
        return flat, vals.reshape(-1, channels)

    parts = map_strips(strip, h, workers)
    flat = np.concatenate([p[0] for p in parts])
    vals = np.concatenate([p[1] for p in parts], axis=0)
    grad = np.zeros((ah * aw, channels))
    np.add.at(grad, flat, vals)
    return grad.reshape(ah, aw, channels)
