"""Per-pixel lighting: Cook-Torrance microfacet specular over a Phong diffuse
base, and a 9-coefficient spherical-harmonic model.

The SH model is the one used during texture optimization because it keeps
specular reflections out of the backward pass; Cook-Torrance is forward
rendering. All functions are pure and broadcast over arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .raster import GBuffer, sample_texture_grid

_DENOM_CLAMP = 1e-4


@dataclass(frozen=True)
class BRDFParams:
    """Diffuse coefficient, normal-incidence Fresnel reflectance, roughness."""

    k_d: float = 1.0
    f0: tuple[float, float, float] = (0.04, 0.04, 0.04)
    roughness: float = 0.5

    def __post_init__(self):
        if not 0 < self.roughness <= 1:
            raise ValueError("roughness must be in (0, 1]")
        if self.k_d < 0:
            raise ValueError("k_d must be nonnegative")


@dataclass(frozen=True)
class LightSource:
    """Directional light; direction points from the surface toward the light."""

    direction: tuple[float, float, float]
    intensity: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError("light direction must be unit length")


# Coefficient order: (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0), (2,1), (2,2)
SH_INDEX = ((0, 0), (1, -1), (1, 0), (1, 1),
            (2, -2), (2, -1), (2, 0), (2, 1), (2, 2))

Y00 = 0.5 * math.sqrt(1.0 / math.pi)           # 0.2820948


@dataclass(frozen=True)
class SHLighting:
    """First three real spherical-harmonic bands (9 coefficients).

    The default is ambient-dominant (constant band only, w00 = 3.0), the most
    uniform environment; identity() instead scales the constant band so the
    shading factor is exactly 1 and a render reproduces raw albedo.
    """

    coefficients: tuple = (3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.coefficients) != 9:
            raise ValueError("expected exactly 9 coefficients")

    @staticmethod
    def ambient(level: float = 3.0) -> "SHLighting":
        return SHLighting((level, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0))

    @staticmethod
    def identity() -> "SHLighting":
        return SHLighting.ambient(1.0 / Y00)


def phong_diffuse(params: BRDFParams, l: np.ndarray, n: np.ndarray):
    """k_d * max(l . n, 0); the clamp keeps back-lit pixels at zero."""
    ln = np.maximum(np.sum(np.asarray(l) * np.asarray(n), axis=-1), 0.0)
    return params.k_d * ln


def ggx_ndf(n_dot_h, roughness: float):
    """GGX / Trowbridge-Reitz normal distribution with alpha = roughness^2."""
    alpha2 = float(roughness) ** 4
    nh2 = np.asarray(n_dot_h, dtype=np.float64) ** 2
    denom = nh2 * (alpha2 - 1.0) + 1.0
    return alpha2 / (math.pi * denom * denom)


def fresnel_schlick(v_dot_h, f0):
    """Schlick Fresnel: f0 + (1 - f0) * (1 - v.h)^5, per channel."""
    v_dot_h = np.asarray(v_dot_h, dtype=np.float64)
    f0 = np.asarray(f0, dtype=np.float64)
    return f0 + (1.0 - f0) * (1.0 - v_dot_h[..., None]) ** 5


def _smith_g1(x, alpha2: float):
    x = np.asarray(x, dtype=np.float64)
    return 2.0 * x / (x + np.sqrt(alpha2 + (1.0 - alpha2) * x * x))


def smith_ggx(n_dot_l, n_dot_v, roughness: float):
    """Separable Smith masking-shadowing for GGX."""
    alpha2 = float(roughness) ** 4
    return _smith_g1(n_dot_l, alpha2) * _smith_g1(n_dot_v, alpha2)


def cook_torrance_specular(params: BRDFParams, l, v, n):
    """Microfacet specular D*F*G / (4 (n.l)(n.v)); zero when n.l or n.v <= 0.

    Broadcasts over leading dimensions; returns (..., 3). Denominator terms
    are clamped below at 1e-4 against the grazing-angle singularity.
    """
    l = np.asarray(l, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    n_dot_l = np.sum(n * l, axis=-1)
    n_dot_v = np.sum(n * v, axis=-1)
    lit = (n_dot_l > 0.0) & (n_dot_v > 0.0)

    h = l + v
    h_norm = np.linalg.norm(h, axis=-1, keepdims=True)
    h = h / np.maximum(h_norm, 1e-12)
    n_dot_h = np.clip(np.sum(n * h, axis=-1), 0.0, 1.0)
    v_dot_h = np.clip(np.sum(v * h, axis=-1), 0.0, 1.0)

    d = ggx_ndf(n_dot_h, params.roughness)
    f = fresnel_schlick(v_dot_h, params.f0)
    g = smith_ggx(np.clip(n_dot_l, _DENOM_CLAMP, 1.0),
                  np.clip(n_dot_v, _DENOM_CLAMP, 1.0), params.roughness)
    denom = 4.0 * np.maximum(n_dot_l, _DENOM_CLAMP) * np.maximum(n_dot_v, _DENOM_CLAMP)
    spec = (d * g / denom)[..., None] * f
    return np.where(lit[..., None], spec, 0.0)


def sh_basis(n) -> np.ndarray:
    """Real orthonormal SH basis values for the first 3 bands at unit vectors n.

    Accepts (..., 3); returns (..., 9) in SH_INDEX order.
    """
    n = np.asarray(n, dtype=np.float64)
    x, y, z = n[..., 0], n[..., 1], n[..., 2]
    c1 = math.sqrt(3.0 / (4.0 * math.pi))
    c2 = math.sqrt(15.0 / (4.0 * math.pi))
    c3 = math.sqrt(5.0 / (16.0 * math.pi))
    c4 = math.sqrt(15.0 / (16.0 * math.pi))
    return np.stack([
        np.full_like(x, Y00),
        c1 * y,
        c1 * z,
        c1 * x,
        c2 * x * y,
        c2 * y * z,
        c3 * (3.0 * z * z - 1.0),
        c2 * x * z,
        c4 * (x * x - y * y),
    ], axis=-1)


def sh_shading_factor(normals: np.ndarray, lighting: SHLighting) -> np.ndarray:
    """Scalar irradiance factor sum_lm w_lm Y_lm(n), clamped at 0 below."""
    basis = sh_basis(normals)
    coeffs = np.asarray(lighting.coefficients, dtype=np.float64)
    return np.maximum(basis @ coeffs, 0.0)


def diffuse_shade_and_specular(gbuffer: GBuffer, model: str,
                               brdf: BRDFParams | None = None,
                               light: LightSource | None = None,
                               sh: SHLighting | None = None,
                               specular_enabled: bool = True):
    """Masked per-pixel diffuse factor (M, 3) and additive specular term (M, 3).

    The render is albedo * diffuse_factor + specular; the diffuse factor is
    the only path through which atlas gradients flow.
    """
    m = gbuffer.mask
    normals = gbuffer.normal[m]
    if model == "sh":
        factor = sh_shading_factor(normals, sh or SHLighting())[:, None]
        return np.broadcast_to(factor, (len(normals), 3)).copy(), np.zeros((len(normals), 3))
    if model != "cook_torrance":
        raise ValueError(f"unknown shading model {model!r}")
    brdf = brdf or BRDFParams()
    light = light or LightSource(direction=(0.0, 0.0, 1.0))
    l = np.asarray(light.direction, dtype=np.float64)
    intensity = np.asarray(light.intensity, dtype=np.float64)
    diffuse = phong_diffuse(brdf, l, normals)[:, None] * intensity
    if specular_enabled:
        v = gbuffer.camera_position - gbuffer.position[m]
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        spec = cook_torrance_specular(brdf, l, v, normals) * intensity
    else:
        spec = np.zeros((len(normals), 3))
    return diffuse, spec


def _compose(gbuffer: GBuffer, atlas, diffuse, specular, background) -> np.ndarray:
    h, w = gbuffer.mask.shape
    image = np.empty((h, w, 3))
    image[:] = np.asarray(background, dtype=np.float64)
    albedo = sample_texture_grid(atlas, gbuffer.uv[gbuffer.mask])
    image[gbuffer.mask] = albedo * diffuse + specular
    return image


def render_cook_torrance(gbuffer: GBuffer, atlas, params: BRDFParams,
                         light: LightSource, specular_enabled: bool = True,
                         background=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Diffuse-plus-specular local illumination over the covered pixels."""
    diffuse, spec = diffuse_shade_and_specular(
        gbuffer, "cook_torrance", brdf=params, light=light,
        specular_enabled=specular_enabled)
    return _compose(gbuffer, atlas, diffuse, spec, background)


def render_sh(gbuffer: GBuffer, atlas, lighting: SHLighting,
              background=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Albedo scaled by the SH irradiance factor; no specular term."""
    diffuse, spec = diffuse_shade_and_specular(gbuffer, "sh", sh=lighting)
    return _compose(gbuffer, atlas, diffuse, spec, background)


@dataclass(frozen=True)
class ShadingSetup:
    """One bundle of shading choices threaded through render and optimize."""

    model: str = "sh"
    brdf: BRDFParams = field(default_factory=BRDFParams)
    light: LightSource = field(default_factory=lambda: LightSource((0.0, 0.0, 1.0)))
    sh: SHLighting = field(default_factory=SHLighting)
    specular_enabled: bool = True
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def shade(self, gbuffer: GBuffer):
        return diffuse_shade_and_specular(
            gbuffer, self.model, brdf=self.brdf, light=self.light, sh=self.sh,
            specular_enabled=self.specular_enabled)

    def render(self, gbuffer: GBuffer, atlas) -> np.ndarray:
        diffuse, spec = self.shade(gbuffer)
        return _compose(gbuffer, atlas, diffuse, spec, self.background)
