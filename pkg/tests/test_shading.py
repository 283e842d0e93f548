import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from texweave.camera import Viewpoint
from texweave.procedural import make_cube, make_plane
from texweave.raster import rasterize, sample_texture_grid
from texweave.shading import (BRDFParams, LightSource, SHLighting, Y00,
                              cook_torrance_specular, fresnel_schlick, ggx_ndf,
                              phong_diffuse, render_cook_torrance, render_sh,
                              sh_basis, smith_ggx)

Z = np.array([0.0, 0.0, 1.0])


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class TestPhongDiffuse:
    def test_aligned(self):
        assert phong_diffuse(BRDFParams(k_d=1.0), Z, Z) == 1.0

    def test_backlit_clamps_to_zero(self):
        assert phong_diffuse(BRDFParams(), -Z, Z) == 0.0

    def test_hand_value(self):
        l = np.array([0.5, 0.0, math.sqrt(0.75)])
        n = np.array([0.0, 0.0, 1.0])
        # l.n = sqrt(0.75); pick instead the exact 0.5 case used in docs
        l = np.array([math.sqrt(0.75), 0.0, 0.5])
        assert np.isclose(phong_diffuse(BRDFParams(k_d=0.8), l, n), 0.4)


class TestGGX:
    def test_rough_one_peak_is_inv_pi(self):
        assert np.isclose(ggx_ndf(1.0, 1.0), 1.0 / math.pi, atol=1e-9)

    def test_hand_value_rough_half(self):
        # alpha = 0.25: D(1) = alpha^2 / (pi * alpha^4) = 1 / (pi * 0.0625)
        assert np.isclose(ggx_ndf(1.0, 0.5), 1.0 / (math.pi * 0.0625), rtol=1e-9)

    def test_projected_integral_is_one(self):
        rng = np.random.default_rng(0)
        for rough in (0.4, 0.7, 1.0):
            cos = rng.uniform(0, 1, 200_000)
            est = float(np.mean(ggx_ndf(cos, rough) * cos) * 2 * math.pi)
            assert abs(est - 1.0) < 0.03

    def test_nonnegative(self):
        nh = np.linspace(0, 1, 50)
        assert (ggx_ndf(nh, 0.3) >= 0).all()


class TestFresnel:
    def test_normal_incidence_returns_f0(self):
        assert np.allclose(fresnel_schlick(1.0, (0.04, 0.1, 0.5)), [0.04, 0.1, 0.5])

    def test_grazing_incidence_returns_one(self):
        assert np.allclose(fresnel_schlick(0.0, (0.04, 0.1, 0.5)), 1.0)

    def test_hand_value(self):
        assert np.allclose(fresnel_schlick(0.5, (0.04,) * 3), 0.07)

    @settings(max_examples=30, deadline=None)
    @given(c=st.floats(0, 1))
    def test_range(self, c):
        f = fresnel_schlick(c, (0.04,) * 3)
        assert ((f >= 0.04 - 1e-12) & (f <= 1.0 + 1e-12)).all()


class TestSmith:
    def test_normal_incidence_is_one(self):
        for rough in (0.1, 0.5, 1.0):
            assert np.isclose(smith_ggx(1.0, 1.0, rough), 1.0)

    def test_smooth_limit(self):
        assert np.isclose(smith_ggx(0.3, 0.8, 0.05), 1.0, atol=1e-3)

    def test_hand_value_alpha_one(self):
        # G1(0.5) = 1 / 1.5 at alpha = 1; symmetric angles square it.
        g = smith_ggx(0.5, 0.5, 1.0)
        assert np.isclose(g, (2 * 0.5 / (0.5 + 1.0)) ** 2)
        assert np.isclose(g, 4.0 / 9.0)


class TestCookTorrance:
    def test_unlit_orientation_is_zero(self):
        v = unit([0.3, 0.1, 0.9])
        l = -Z
        assert np.allclose(cook_torrance_specular(BRDFParams(), l, v, Z), 0.0)

    def test_composed_hand_value(self):
        # l = v = n: h = n, D = 1/(pi*0.0625), F = f0, G = 1, denom = 4.
        val = cook_torrance_specular(BRDFParams(roughness=0.5), Z, Z, Z)
        expected = (1.0 / (math.pi * 0.0625)) * 0.04 / 4.0
        assert np.allclose(val, expected, rtol=1e-6)
        assert np.isclose(expected, 0.050930, atol=1e-6)

    def test_reciprocity_swapping_l_and_v(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            l = unit(rng.standard_normal(3))
            v = unit(rng.standard_normal(3))
            if (l + v)[2] <= 0:
                l, v = -l, -v
            a = cook_torrance_specular(BRDFParams(roughness=0.4), l, v, Z)
            b = cook_torrance_specular(BRDFParams(roughness=0.4), v, l, Z)
            assert np.allclose(a, b, atol=1e-12)


class TestSHBasis:
    def test_constant_band_value(self):
        rng = np.random.default_rng(3)
        n = unit(rng.standard_normal(3))
        assert np.isclose(sh_basis(n)[0], 0.2820948, atol=1e-7)
        assert np.isclose(Y00, 0.2820948, atol=1e-7)

    def test_axis_symmetry_at_north_pole(self):
        y = sh_basis(np.array([0.0, 0.0, 1.0]))
        assert y[1] == 0.0     # band proportional to y
        assert y[3] == 0.0     # band proportional to x

    def test_orthonormality_monte_carlo(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal((200_000, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        y = sh_basis(v)
        gram = (y.T @ y) / len(v) * 4 * math.pi
        assert np.abs(gram - np.eye(9)).max() < 0.02


def _plane_gbuffer(size=48):
    return rasterize(make_plane(), Viewpoint(0.0, 0.0, 2.2, math.pi / 4, size))


class TestRenderSH:
    def test_pure_ambient_reproduces_albedo(self):
        rng = np.random.default_rng(4)
        atlas = rng.uniform(0, 1, (16, 16, 3))
        gb = _plane_gbuffer()
        img = render_sh(gb, atlas, SHLighting((1.0 / Y00, 0, 0, 0, 0, 0, 0, 0, 0)))
        expected = sample_texture_grid(atlas, gb.uv[gb.mask])
        assert np.allclose(img[gb.mask], expected, atol=1e-12)

    def test_zero_lighting_is_black_inside_mask(self):
        gb = _plane_gbuffer()
        img = render_sh(gb, np.ones((8, 8, 3)), SHLighting((0.0,) * 9),
                        background=(0.3, 0.3, 0.3))
        assert np.allclose(img[gb.mask], 0.0)
        assert np.allclose(img[~gb.mask], 0.3)

    def test_pure_function_of_normal_and_uv(self):
        gb = _plane_gbuffer()
        rows, cols = np.nonzero(gb.mask)
        a, b = (rows[0], cols[0]), (rows[-1], cols[-1])
        gb.uv[b] = gb.uv[a]
        gb.normal[b] = gb.normal[a]
        rng = np.random.default_rng(5)
        img = render_sh(gb, rng.uniform(0, 1, (16, 16, 3)), SHLighting())
        assert np.allclose(img[a], img[b])

    def test_negative_factor_clamps_to_zero(self):
        gb = _plane_gbuffer()
        img = render_sh(gb, np.ones((8, 8, 3)),
                        SHLighting((-5.0, 0, 0, 0, 0, 0, 0, 0, 0)))
        assert np.allclose(img[gb.mask], 0.0)


class TestRenderCookTorrance:
    def test_zero_intensity_black_inside(self):
        gb = _plane_gbuffer()
        img = render_cook_torrance(gb, np.ones((8, 8, 3)), BRDFParams(),
                                   LightSource(Z, intensity=(0, 0, 0)),
                                   background=(0.2, 0.2, 0.2))
        assert np.allclose(img[gb.mask], 0.0)
        assert np.allclose(img[~gb.mask], 0.2)

    def test_constant_atlas_pure_diffuse_is_constant(self):
        gb = _plane_gbuffer()
        img = render_cook_torrance(gb, np.full((8, 8, 3), 0.6), BRDFParams(k_d=0.9),
                                   LightSource(Z), specular_enabled=False)
        vals = img[gb.mask]
        assert np.allclose(vals, vals[0])
        assert np.allclose(vals[0], 0.6 * 0.9)

    def test_doubling_atlas_doubles_diffuse_only(self):
        rng = np.random.default_rng(6)
        atlas = rng.uniform(0, 0.5, (8, 8, 3))
        gb = rasterize(make_cube(), Viewpoint(0.4, 0.3, 2.4, math.pi / 4, 48))
        light = LightSource(unit([0.4, 0.5, 0.8]))
        one = render_cook_torrance(gb, atlas, BRDFParams(), light)
        two = render_cook_torrance(gb, 2.0 * atlas, BRDFParams(), light)
        spec = render_cook_torrance(gb, np.zeros((8, 8, 3)), BRDFParams(), light)
        assert np.allclose(two - one, one - spec, atol=1e-12)

    def test_specular_support_set(self):
        gb = rasterize(make_cube(), Viewpoint(0.4, 0.3, 2.4, math.pi / 4, 48))
        light = LightSource(unit([0.2, 0.4, 0.9]))
        atlas = np.full((8, 8, 3), 0.5)
        with_spec = render_cook_torrance(gb, atlas, BRDFParams(), light, True)
        without = render_cook_torrance(gb, atlas, BRDFParams(), light, False)
        differ = np.any(with_spec != without, axis=2)
        n_dot_l = gb.normal @ np.asarray(light.direction)
        v = gb.camera_position - gb.position
        v /= np.maximum(np.linalg.norm(v, axis=2, keepdims=True), 1e-12)
        n_dot_v = np.sum(gb.normal * v, axis=2)
        allowed = gb.mask & (n_dot_l > 0) & (n_dot_v > 0)
        assert differ.any()
        assert not (differ & ~allowed).any()

    def test_diffuse_linearity_in_atlas(self):
        rng = np.random.default_rng(7)
        t1 = rng.uniform(0, 1, (8, 8, 3))
        t2 = rng.uniform(0, 1, (8, 8, 3))
        gb = _plane_gbuffer()
        light = LightSource(unit([0.1, 0.2, 0.97]))
        a, b = 0.3, 0.6
        mixed = render_cook_torrance(gb, a * t1 + b * t2, BRDFParams(), light)
        r1 = render_cook_torrance(gb, t1, BRDFParams(), light, False)
        r2 = render_cook_torrance(gb, t2, BRDFParams(), light, False)
        spec = render_cook_torrance(gb, np.zeros((8, 8, 3)), BRDFParams(), light)
        m = gb.mask
        assert np.allclose(mixed[m], a * r1[m] + b * r2[m] + spec[m], atol=1e-12)


def test_brdf_params_validation():
    with pytest.raises(ValueError):
        BRDFParams(roughness=0.0)
    with pytest.raises(ValueError):
        LightSource((1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        SHLighting((1.0, 2.0))
