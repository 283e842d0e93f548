import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from texweave.camera import (Camera, EmptyMask, Viewpoint, normalize_depth,
                             random_viewpoint, schedule_viewpoints, view_project)


def test_schedule_has_ten_views():
    views = schedule_viewpoints(radius=2.0, fov_y=math.pi / 4, image_size=64)
    assert len(views) == 10


def test_schedule_structure():
    views = schedule_viewpoints(2.0, math.pi / 4, 64)
    for k in range(8):
        assert views[k].elevation == 0.0
        assert math.isclose(views[k].azimuth, k * 2 * math.pi / 8)
    assert math.isclose(views[4].azimuth - views[0].azimuth, math.pi)
    assert views[8].elevation == math.pi / 2
    assert views[9].elevation == -math.pi / 2


def test_schedule_ring_azimuths_unique():
    views = schedule_viewpoints(2.0, math.pi / 4, 64)
    az = sorted(v.azimuth % (2 * math.pi) for v in views[:8])
    assert all(b - a > 1e-6 for a, b in zip(az, az[1:]))


def test_viewpoint_invariants():
    with pytest.raises(ValueError):
        Viewpoint(0, 0, -1.0, math.pi / 4, 64)
    with pytest.raises(ValueError):
        Viewpoint(0, 0, 1.0, math.pi, 64)
    with pytest.raises(ValueError):
        Viewpoint(0, 2.0, 1.0, math.pi / 4, 64)


def test_project_target_hits_image_center():
    vp = Viewpoint(0.7, 0.3, 2.5, math.pi / 4, 128)
    target = (0.3, -0.2, 1.0)
    p = view_project(vp, target, target=target)
    assert np.allclose(p.ndc, [0, 0], atol=1e-12)
    assert math.isclose(p.depth, 2.5)
    assert not p.behind


def test_point_at_camera_is_flagged():
    vp = Viewpoint(0.0, 0.0, 2.0, math.pi / 4, 64)
    cam = Camera(vp)
    p = view_project(vp, cam.position)
    assert p.behind


def test_frustum_edge_maps_to_ndc_one():
    # A point offset from the target along the camera right axis by
    # radius * tan(fov/2) sits exactly on the frustum edge.
    vp = Viewpoint(1.1, 0.4, 3.0, 0.9, 64)
    cam = Camera(vp)
    point = cam.target + cam.right * vp.radius * math.tan(vp.fov_y / 2)
    p = view_project(vp, point)
    assert math.isclose(p.ndc[0], 1.0, abs_tol=1e-9)
    assert math.isclose(p.ndc[1], 0.0, abs_tol=1e-9)


def test_pole_views_use_x_up():
    vp = Viewpoint(0.0, math.pi / 2, 2.0, math.pi / 4, 64)
    cam = Camera(vp)
    assert np.isfinite(cam.right).all()
    assert abs(np.linalg.norm(cam.right) - 1) < 1e-9


def test_normalize_depth_endpoints():
    raw = np.array([[2.0, 4.0]])
    mask = np.array([[True, True]])
    dm = normalize_depth(raw, mask)
    assert np.allclose(dm.values, [[1.0, 0.0]])


def test_normalize_depth_three_values():
    dm = normalize_depth(np.array([[1.0, 2.0, 3.0]]), np.ones((1, 3), bool))
    assert np.allclose(dm.values, [[1.0, 0.5, 0.0]])


def test_normalize_depth_degenerate_is_half():
    dm = normalize_depth(np.full((2, 2), 7.0), np.ones((2, 2), bool))
    assert np.allclose(dm.values, 0.5)


def test_normalize_depth_zeroes_unmasked():
    raw = np.array([[5.0, 1.0], [2.0, 9.0]])
    mask = np.array([[True, False], [True, False]])
    dm = normalize_depth(raw, mask)
    assert dm.values[0, 1] == 0.0 and dm.values[1, 1] == 0.0
    assert np.isclose(dm.values[1, 0], 1.0) and np.isclose(dm.values[0, 0], 0.0)


def test_normalize_depth_empty_mask():
    with pytest.raises(EmptyMask):
        normalize_depth(np.ones((2, 2)), np.zeros((2, 2), bool))


@settings(max_examples=40, deadline=None)
@given(
    raw=arrays(np.float64, (3, 4), elements=st.floats(0.1, 100.0)),
    a=st.floats(0.01, 50.0),
    b=st.floats(-10.0, 10.0),
)
def test_normalize_depth_affine_invariance(raw, a, b):
    mask = np.ones_like(raw, dtype=bool)
    base = normalize_depth(raw, mask)
    scaled = normalize_depth(a * raw + b, mask)
    assert np.allclose(base.values, scaled.values, atol=1e-8)


def test_random_viewpoint_is_seeded_and_bounded():
    rng1 = np.random.default_rng(5)
    rng2 = np.random.default_rng(5)
    vp1 = random_viewpoint(rng1, 2.0, math.pi / 4, 64)
    vp2 = random_viewpoint(rng2, 2.0, math.pi / 4, 64)
    assert vp1 == vp2
    assert -math.pi / 6 <= vp1.elevation <= math.pi / 3
