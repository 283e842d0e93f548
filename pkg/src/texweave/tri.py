"""2D triangle coverage and barycentrics shared by the rasterizer and UV probes.

Points exactly on a shared edge are claimed by exactly one of the two
adjacent triangles (a top-left style tie rule on the edge direction), so
tilings produce neither holes nor double coverage.
"""
from __future__ import annotations

import numpy as np


def edge_function(ax, ay, bx, by, px, py):
    """Signed area (doubled) of triangle (a, b, p); positive when p is left of a->b."""
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _edge_owns_boundary(ax, ay, bx, by) -> bool:
    # Tie rule for points with edge_function == 0. For an edge shared by two
    # consistently wound triangles the traversal directions are opposite, so
    # exactly one of the two triangles claims the boundary point.
    if by != ay:
        return by > ay
    return bx < ax


def triangle_coverage(tri: np.ndarray, px: np.ndarray, py: np.ndarray):
    """Coverage mask and barycentrics of sample points against one triangle.

    tri: (3, 2) vertex positions. px, py: flat arrays of sample coordinates.
    Returns (inside, bary) where bary has shape (len(px), 3) in the original
    vertex order; bary rows are valid only where inside is True.
    Degenerate (zero signed area) triangles cover nothing.
    """
    a, b, c = tri[0], tri[1], tri[2]
    area = edge_function(a[0], a[1], b[0], b[1], c[0], c[1])
    if area == 0.0:
        return np.zeros(px.shape, dtype=bool), np.zeros((px.shape[0], 3))
    if area < 0.0:
        # Normalize to positive orientation; remember to swap barycentrics back.
        inside, bary = triangle_coverage(tri[[0, 2, 1]], px, py)
        return inside, bary[:, [0, 2, 1]]

    e_ab = edge_function(a[0], a[1], b[0], b[1], px, py)
    e_bc = edge_function(b[0], b[1], c[0], c[1], px, py)
    e_ca = edge_function(c[0], c[1], a[0], a[1], px, py)

    inside = np.ones(px.shape, dtype=bool)
    for e, (p0, p1) in ((e_ab, (a, b)), (e_bc, (b, c)), (e_ca, (c, a))):
        if _edge_owns_boundary(p0[0], p0[1], p1[0], p1[1]):
            inside &= e >= 0.0
        else:
            inside &= e > 0.0

    bary = np.stack([e_bc, e_ca, e_ab], axis=-1) / area
    return inside, bary
