"""Viewpoint schedule, perspective camera, and normalized depth maps.

The canonical schedule is 8 views on the equatorial ring plus a top and a
bottom view. Cameras orbit a target point (the mesh center) at a fixed
radius; the look-at up vector is +y, switched to +x for the pole views.
Depth maps use the near-is-1 / far-is-0 convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EmptyMask(Exception):
    """Depth normalization needs at least one covered pixel."""


@dataclass(frozen=True)
class Viewpoint:
    """Orbit camera pose plus projection parameters (square image)."""

    azimuth: float
    elevation: float
    radius: float
    fov_y: float
    image_size: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not 0 < self.fov_y < math.pi:
            raise ValueError("fov_y must be in (0, pi)")
        if not -math.pi / 2 <= self.elevation <= math.pi / 2:
            raise ValueError("elevation must be in [-pi/2, pi/2]")
        if self.image_size <= 0:
            raise ValueError("image_size must be positive")


@dataclass
class DepthMap:
    """Normalized depth in [0, 1] (near=1) with an object coverage mask."""

    values: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class ProjectedPoint:
    ndc: np.ndarray          # (2,) in [-1, 1]^2 when inside the frustum
    depth: float             # camera-space distance along the view axis
    behind: bool             # depth <= 0: caller must cull


_POLE_ELEVATION = math.pi / 2 - 1e-9


class Camera:
    """Look-at perspective camera derived from a Viewpoint and a target point."""

    def __init__(self, vp: Viewpoint, target=(0.0, 0.0, 0.0)):
        self.vp = vp
        self.target = np.asarray(target, dtype=np.float64)
        el, az = vp.elevation, vp.azimuth
        direction = np.array([
            math.cos(el) * math.sin(az),
            math.sin(el),
            math.cos(el) * math.cos(az),
        ])
        self.position = self.target + vp.radius * direction
        up = np.array([1.0, 0.0, 0.0]) if abs(el) >= _POLE_ELEVATION \
            else np.array([0.0, 1.0, 0.0])
        forward = self.target - self.position
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        self.forward = forward
        self.right = right
        self.up = np.cross(right, forward)
        self.tan_half_fov = math.tan(vp.fov_y / 2)

    def project(self, points: np.ndarray):
        """Project (N, 3) world points to ((N, 2) ndc, (N,) depth).

        Depth is the forward-axis camera distance; depth <= 0 means the point
        is at or behind the camera plane and its ndc values are meaningless.
        """
        rel = np.atleast_2d(points) - self.position
        x = rel @ self.right
        y = rel @ self.up
        z = rel @ self.forward
        with np.errstate(divide="ignore", invalid="ignore"):
            ndc = np.stack([x, y], axis=-1) / (z[:, None] * self.tan_half_fov)
        return ndc, z


def schedule_viewpoints(radius: float, fov_y: float, image_size: int) -> list[Viewpoint]:
    """Eight equatorial views at 45 degree steps, then top and bottom."""
    ring = [Viewpoint(k * 2 * math.pi / 8, 0.0, radius, fov_y, image_size)
            for k in range(8)]
    top = Viewpoint(0.0, math.pi / 2, radius, fov_y, image_size)
    bottom = Viewpoint(0.0, -math.pi / 2, radius, fov_y, image_size)
    return ring + [top, bottom]


def random_viewpoint(rng: np.random.Generator, radius: float, fov_y: float,
                     image_size: int) -> Viewpoint:
    """Seeded single-view sampler: uniform azimuth, elevation in [-pi/6, pi/3]."""
    azimuth = float(rng.uniform(0.0, 2 * math.pi))
    elevation = float(rng.uniform(-math.pi / 6, math.pi / 3))
    return Viewpoint(azimuth, elevation, radius, fov_y, image_size)


def view_project(vp: Viewpoint, point, target=(0.0, 0.0, 0.0)) -> ProjectedPoint:
    """Project a single world point through the viewpoint's camera."""
    cam = Camera(vp, target)
    ndc, z = cam.project(np.asarray(point, dtype=np.float64))
    depth = float(z[0])
    return ProjectedPoint(ndc=ndc[0], depth=depth, behind=depth <= 0.0)


def normalize_depth(raw: np.ndarray, mask: np.ndarray) -> DepthMap:
    """Affinely map masked camera depths so nearest -> 1 and farthest -> 0.

    Unmasked pixels are set to 0. If all masked depths coincide the map is
    degenerate and every masked pixel becomes 0.5.
    """
    raw = np.asarray(raw, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if raw.shape != mask.shape:
        raise ValueError("raw and mask shapes differ")
    if not mask.any():
        raise EmptyMask("mask has no true pixels")
    covered = raw[mask]
    near, far = covered.min(), covered.max()
    values = np.zeros_like(raw)
    if far == near:
        values[mask] = 0.5
    else:
        values[mask] = (far - raw[mask]) / (far - near)
    return DepthMap(values=values, mask=mask)
