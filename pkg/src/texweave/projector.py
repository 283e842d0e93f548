"""Texture-atlas optimization against per-view target images.

The objective per view is a masked mean-squared image residual plus a
smoothness term weighted by ``lam``: forward-difference total variation of
the rendered image inside the mask, and of the atlas over the texels the
view touches. The texture-space half is what makes under-determined
bilinear footprints (several free texels behind one rendered pixel)
converge to a unique solution; the image-space half suppresses residual
speckle between neighboring pixels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .raster import (GBuffer, ShapeMismatch, bilinear_footprints, rasterize,
                     scatter_weighted)
from .shading import ShadingSetup

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


class NoViews(Exception):
    """optimize_texture needs at least one view."""


@dataclass
class TextureAtlas:
    """The optimization variable: an RGB grid in [0, 1] plus a touched mask.

    touched marks texels that ever sat inside a rendered pixel's bilinear
    footprint with positive weight; everything else keeps its initial value.
    """

    values: np.ndarray
    touched: np.ndarray

    @staticmethod
    def constant(size: int = 2048, color=(0.5, 0.5, 0.5)) -> "TextureAtlas":
        values = np.empty((size, size, 3))
        values[:] = np.asarray(color, dtype=np.float64)
        return TextureAtlas(values, np.zeros((size, size), dtype=bool))

    @staticmethod
    def random(size: int, rng: np.random.Generator) -> "TextureAtlas":
        return TextureAtlas(rng.uniform(0.0, 1.0, size=(size, size, 3)),
                            np.zeros((size, size), dtype=bool))

    def copy(self) -> "TextureAtlas":
        return TextureAtlas(self.values.copy(), self.touched.copy())


@dataclass(frozen=True)
class ProjectionConfig:
    """Optimizer settings; lam weighs the smoothness penalty (Eq.-style 0.01)."""

    lam: float = 0.01
    steps: int = 400
    step_size: float = 1e-2
    render_size: int = 2400
    decay: bool = True          # linear step-size decay to zero over the run


def projection_loss(atlas: TextureAtlas, gbuffer: GBuffer, target: np.ndarray,
                    shading: ShadingSetup):
    """Masked mean squared residual and its per-pixel image gradient.

    loss = sum over masked pixels of |render - target|^2 / (#masked pixels);
    the returned gradient is zero outside the mask and does not include the
    smoothness penalty.
    """
    if target.shape[:2] != gbuffer.mask.shape:
        raise ShapeMismatch(f"target {target.shape} vs gbuffer {gbuffer.mask.shape}")
    render = shading.render(gbuffer, atlas)
    m = gbuffer.mask
    count = int(m.sum())
    if count == 0:
        return 0.0, np.zeros_like(render)
    resid = render[m] - target[m]
    loss = float(np.sum(resid * resid)) / count
    image_grad = np.zeros_like(render)
    image_grad[m] = 2.0 * resid / count
    return loss, image_grad


def gradient_penalty(render: np.ndarray, mask: np.ndarray):
    """Forward-difference total variation of the render inside the mask.

    Differences that cross the mask boundary (or the image edge) are
    excluded; the subgradient of |d| at d == 0 is taken as 0. Returns the
    raw penalty sum and its per-pixel image-gradient contribution.
    """
    render = np.asarray(render, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    grad = np.zeros_like(render)
    penalty = 0.0

    dx = render[:, 1:] - render[:, :-1]
    keep_x = (mask[:, 1:] & mask[:, :-1])[..., None]
    sx = np.where(keep_x, np.sign(dx), 0.0)
    penalty += float(np.abs(np.where(keep_x, dx, 0.0)).sum())
    grad[:, 1:] += sx
    grad[:, :-1] -= sx

    dy = render[1:, :] - render[:-1, :]
    keep_y = (mask[1:, :] & mask[:-1, :])[..., None]
    sy = np.where(keep_y, np.sign(dy), 0.0)
    penalty += float(np.abs(np.where(keep_y, dy, 0.0)).sum())
    grad[1:, :] += sy
    grad[:-1, :] -= sy
    return penalty, grad


def texture_smoothness_penalty(values: np.ndarray, active: np.ndarray):
    """Forward-difference total variation of the atlas over active texels.

    Only differences between horizontally or vertically adjacent texels that
    are both active are counted, mirroring the image-space mask-boundary
    exclusion. Returns the raw sum and its texel-gradient contribution.
    """
    grad = np.zeros_like(values)
    penalty = 0.0

    dx = values[:, 1:] - values[:, :-1]
    keep_x = (active[:, 1:] & active[:, :-1])[..., None]
    sx = np.where(keep_x, np.sign(dx), 0.0)
    penalty += float(np.abs(np.where(keep_x, dx, 0.0)).sum())
    grad[:, 1:] += sx
    grad[:, :-1] -= sx

    dy = values[1:, :] - values[:-1, :]
    keep_y = (active[1:, :] & active[:-1, :])[..., None]
    sy = np.where(keep_y, np.sign(dy), 0.0)
    penalty += float(np.abs(np.where(keep_y, dy, 0.0)).sum())
    grad[1:, :] += sy
    grad[:-1, :] -= sy
    return penalty, grad


def _bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    if len(rows) == 0:
        return 0, 1, 0, 1
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


class ViewObjective:
    """Cached per-view state evaluating the combined loss and texel gradient.

    All per-step work is restricted to the mask's image bounding box and the
    footprints' atlas bounding box; this is exact because the loss terms
    vanish outside both.
    """

    def __init__(self, gbuffer: GBuffer, target: np.ndarray,
                 shading: ShadingSetup, lam: float):
        target = np.asarray(target, dtype=np.float64)
        if target.shape[:2] != gbuffer.mask.shape:
            raise ShapeMismatch(f"target {target.shape} vs gbuffer {gbuffer.mask.shape}")
        self.lam = lam
        self.count = max(int(gbuffer.mask.sum()), 1)
        ir0, ir1, ic0, ic1 = _bbox(gbuffer.mask)
        self.mask_crop = gbuffer.mask[ir0:ir1, ic0:ic1]
        self.render_buf = np.zeros(self.mask_crop.shape + (3,))
        self.target_pix = target[gbuffer.mask]
        self.diffuse, self.specular = shading.shade(gbuffer)
        self.uvs = gbuffer.uv[gbuffer.mask]
        self._atlas_hw: tuple[int, int] | None = None

    def prepare(self, atlas_hw: tuple[int, int]):
        """Resolve footprints for an atlas size; returns the active-texel box."""
        if self._atlas_hw != atlas_hw:
            rows, cols, self.weights = bilinear_footprints(self.uvs, atlas_hw)
            self._atlas_hw = atlas_hw
            active = np.zeros(atlas_hw, dtype=bool)
            pos = self.weights > 0.0
            active[rows[pos], cols[pos]] = True
            self.active_full = active
            ar0, ar1, ac0, ac1 = _bbox(active)
            self.box = (ar0, ar1, ac0, ac1)
            self.active = active[ar0:ar1, ac0:ac1]
            self.rows = rows - ar0
            self.cols = cols - ac0
        return self.box

    def loss_and_grad(self, values: np.ndarray):
        """Combined loss and its gradient over the active atlas box."""
        ar0, ar1, ac0, ac1 = self.prepare(values.shape[:2])
        sub = values[ar0:ar1, ac0:ac1]
        albedo = np.einsum("nk,nkc->nc", self.weights, sub[self.rows, self.cols])
        render_pix = albedo * self.diffuse + self.specular

        resid = render_pix - self.target_pix
        loss = float(np.sum(resid * resid)) / self.count
        image_grad_pix = 2.0 * resid / self.count

        self.render_buf[self.mask_crop] = render_pix
        pen_img, pen_img_grad = gradient_penalty(self.render_buf, self.mask_crop)
        image_grad_pix += (self.lam / self.count) * pen_img_grad[self.mask_crop]

        tex_grad = scatter_weighted(self.rows, self.cols, self.weights,
                                    image_grad_pix * self.diffuse, sub.shape[:2])

        pen_tex, pen_tex_grad = texture_smoothness_penalty(sub, self.active)
        tex_grad += (self.lam / self.count) * pen_tex_grad
        loss += self.lam * (pen_img + pen_tex) / self.count
        return loss, tex_grad

    def loss_and_grad_full(self, values: np.ndarray):
        """Same objective with the gradient expanded to the full atlas."""
        loss, grad = self.loss_and_grad(values)
        ar0, ar1, ac0, ac1 = self.box
        full = np.zeros_like(values)
        full[ar0:ar1, ac0:ac1] = grad
        return loss, full


def optimize_on_gbuffer(atlas: TextureAtlas, gbuffer: GBuffer, target: np.ndarray,
                        cfg: ProjectionConfig, shading: ShadingSetup):
    """Adam-style descent of the combined objective for one view.

    Returns (atlas, loss_curve). The atlas is updated in place (values
    clamped to [0, 1] after every step; touched mask extended by this view's
    footprints). Texels outside the view's footprints receive zero gradient
    and are left untouched by construction.
    """
    objective = ViewObjective(gbuffer, target, shading, cfg.lam)
    ar0, ar1, ac0, ac1 = objective.prepare(atlas.values.shape[:2])
    atlas.touched |= objective.active_full
    sub = atlas.values[ar0:ar1, ac0:ac1]

    m = np.zeros_like(sub)
    v = np.zeros_like(sub)
    losses = []
    for step in range(cfg.steps):
        loss, grad = objective.loss_and_grad(atlas.values)
        losses.append(loss)
        m = _ADAM_BETA1 * m + (1.0 - _ADAM_BETA1) * grad
        v = _ADAM_BETA2 * v + (1.0 - _ADAM_BETA2) * grad * grad
        m_hat = m / (1.0 - _ADAM_BETA1 ** (step + 1))
        v_hat = v / (1.0 - _ADAM_BETA2 ** (step + 1))
        lr = cfg.step_size
        if cfg.decay:
            lr *= 1.0 - step / cfg.steps
        sub -= lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        np.clip(sub, 0.0, 1.0, out=sub)
    return atlas, losses


def optimize_texture(atlas: TextureAtlas, mesh, views, cfg: ProjectionConfig,
                     shading: ShadingSetup, workers: int = 1) -> TextureAtlas:
    """Optimize the atlas against (Viewpoint, target image) pairs in order.

    Each view is rasterized once and optimized for cfg.steps; later views
    start from the atlas state the previous view left behind. Texels outside
    every view's footprints keep their initial values.
    """
    views = list(views)
    if not views:
        raise NoViews("need at least one (viewpoint, target) pair")
    for vp, target in views:
        gbuffer = rasterize(mesh, vp, workers=workers)
        atlas, _ = optimize_on_gbuffer(atlas, gbuffer, np.asarray(target), cfg, shading)
    return atlas


def psnr_on_mask(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    """Peak signal-to-noise ratio over masked texels, peak value 1.0."""
    diff = (np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))[mask]
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return float("inf")
    return -10.0 * np.log10(mse)
