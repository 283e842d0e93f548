import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from texweave.mesh import (DegenerateFace, EmptyMesh, Mesh, MissingUV,
                           ParseError, compute_normals, load_obj, save_obj,
                           validate_uv_atlas)
from texweave.procedural import make_cube, make_octahedron, make_plane

SINGLE_TRIANGLE = """\
# smallest valid mesh
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
vn 0 0 1
vn 0 0 1
vn 0 0 1
f 1/1/1 2/2/2 3/3/3
"""


def write_obj(tmp_path, text, name="mesh.obj"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_single_triangle(tmp_path):
    mesh = load_obj(write_obj(tmp_path, SINGLE_TRIANGLE))
    assert mesh.num_faces == 1
    assert len(mesh.vertices) == 3
    assert np.allclose(mesh.normals, [[0, 0, 1]] * 3)


def test_quad_fan_triangulates(tmp_path):
    text = """\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0 0
vt 1 0
vt 1 1
vt 0 1
vn 0 0 1
f 1/1/1 2/2/1 3/3/1 4/4/1
"""
    mesh = load_obj(write_obj(tmp_path, text))
    assert mesh.num_faces == 2
    # fan shares the first corner
    assert mesh.face_vertices[0][0] == mesh.face_vertices[1][0]


def test_missing_uv_raises(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
    with pytest.raises(MissingUV):
        load_obj(write_obj(tmp_path, text))


def test_negative_indices(tmp_path):
    text = """\
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
f -3/-3 -2/-2 -1/-1
"""
    mesh = load_obj(write_obj(tmp_path, text))
    assert mesh.num_faces == 1
    assert np.array_equal(mesh.face_vertices[0], [0, 1, 2])


def test_parse_error_carries_line_number(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 nope/1\n"
    with pytest.raises(ParseError, match="line 5"):
        load_obj(write_obj(tmp_path, text))


def test_empty_mesh(tmp_path):
    with pytest.raises(EmptyMesh):
        load_obj(write_obj(tmp_path, "# nothing here\n"))


def test_missing_normals_are_computed(tmp_path):
    text = """\
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
f 1/1 2/2 3/3
"""
    mesh = load_obj(write_obj(tmp_path, text))
    assert np.allclose(mesh.normals[mesh.face_normals[0]], [[0, 0, 1]] * 3)


def test_save_load_round_trip(tmp_path):
    mesh = make_cube()
    path = tmp_path / "cube.obj"
    save_obj(mesh, path)
    back = load_obj(path)
    assert np.allclose(back.vertices, mesh.vertices)
    assert np.allclose(back.uvs, mesh.uvs)
    assert np.allclose(back.normals, mesh.normals)
    assert np.array_equal(back.face_vertices, mesh.face_vertices)


def test_plane_normals_point_up():
    mesh = compute_normals(make_plane())
    assert np.allclose(mesh.normals, [[0, 0, 1]] * len(mesh.normals))


def test_octahedron_normals_follow_positions():
    # Analytic symmetry: every vertex of a regular octahedron sees four
    # congruent incident faces, so its area-weighted normal is radial.
    mesh = make_octahedron()
    expected = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
    assert np.allclose(mesh.normals, expected, atol=1e-12)


def test_zero_area_face_does_not_disturb_normals():
    base = compute_normals(make_plane())
    fv = np.vstack([base.face_vertices, [[0, 1, 0]]]).astype(np.int32)
    ft = np.vstack([base.face_uvs, [[0, 1, 0]]]).astype(np.int32)
    mesh = Mesh(base.vertices, base.normals, base.uvs, fv, ft, fv.copy())
    out = compute_normals(mesh)
    assert np.allclose(out.normals, [[0, 0, 1]] * 4)


def test_all_degenerate_vertex_raises():
    verts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
    fv = np.array([[0, 1, 2]], dtype=np.int32)
    uvs = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
    n = np.array([[0, 0, 1.0]] * 3)
    mesh = Mesh(verts, n, uvs, fv, fv.copy(), fv.copy())
    with pytest.raises(DegenerateFace):
        compute_normals(mesh)


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(min_value=1e-3, max_value=1e3))
def test_normals_invariant_under_uniform_scaling(scale):
    mesh = make_octahedron()
    scaled = Mesh(mesh.vertices * scale, mesh.normals, mesh.uvs,
                  mesh.face_vertices, mesh.face_uvs, mesh.face_normals)
    out = compute_normals(scaled)
    assert np.allclose(out.normals, mesh.normals, atol=1e-9)


def test_uv_probe_full_tiling_no_overlap():
    mesh = make_plane()
    report = validate_uv_atlas(mesh, 64)
    assert report.overlap_texel_count == 0
    assert report.coverage_fraction == 1.0


def test_uv_probe_detects_overlap():
    base = make_plane()
    fv = np.vstack([base.face_vertices, base.face_vertices[:1]]).astype(np.int32)
    ft = np.vstack([base.face_uvs, base.face_uvs[:1]]).astype(np.int32)
    mesh = Mesh(base.vertices, base.normals, base.uvs, fv, ft,
                np.zeros_like(fv))
    report = validate_uv_atlas(mesh, 64)
    assert report.overlap_texel_count > 0


def test_uv_probe_half_coverage():
    # One triangle over half the unit square: texel count approaches the
    # analytic area at the probe resolution.
    base = make_plane()
    mesh = Mesh(base.vertices, base.normals, base.uvs,
                base.face_vertices[:1], base.face_uvs[:1],
                np.zeros((1, 3), dtype=np.int32))
    res = 128
    report = validate_uv_atlas(mesh, res)
    assert abs(report.coverage_fraction - 0.5) <= 2.0 / res
    assert report.overlap_texel_count == 0


def test_uv_probe_rejects_tiny_resolution():
    with pytest.raises(ValueError):
        validate_uv_atlas(make_plane(), 8)


def test_bundled_meshes_have_clean_charts():
    for mesh in (make_plane(), make_cube(), make_octahedron()):
        assert validate_uv_atlas(mesh, 256).overlap_texel_count == 0
