"""End-to-end texture generation: per-view depth, window-reconciled
denoising, target decoding, and texture projection, in schedule order.

Each view only repaints surface regions no earlier view touched: painted
atlas coverage is projected into the current view and thresholded, and the
resulting update mask filters the denoising windows. Every produced file is
recorded exactly once in the run manifest; on failure the manifest is still
written with the error annotated by view index, and partial outputs remain.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import DepthMap, normalize_depth, schedule_viewpoints
from .config import PipelineConfig
from .denoiser import (BackendError, RemoteDenoiser, TransportError,
                       make_mock_denoiser, mock_register_prompt, register_prompt,
                       remote_decode, resolve_endpoint)
from .imgio import (load_float, load_png, resize_bilinear, save_depth, save_float,
                    save_png)
from .mesh import Mesh, MeshError, load_obj, validate_uv_atlas
from .multidiffusion import (DenoiserFailure, LatentGrid, run_md_denoising,
                             save_latent)
from .projector import ProjectionConfig, TextureAtlas, optimize_on_gbuffer
from .raster import GBuffer, rasterize, sample_texture_grid

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3


class PipelineInputError(Exception):
    """Bad mesh, config, or target files (exit code 2)."""


class PipelineBackendError(Exception):
    """Denoiser or decoder backend failure (exit code 3)."""


@dataclass
class RunManifest:
    """Everything needed to reproduce and audit one generation run."""

    config: dict
    seed: int
    views: list = field(default_factory=list)
    files: list = field(default_factory=list)
    error: str | None = None
    atlas_float: str | None = None
    atlas_png: str | None = None

    def register(self, path) -> str:
        entry = str(path)
        if entry not in self.files:
            self.files.append(entry)
        return entry

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        payload = {
            "config": self.config, "seed": self.seed, "views": self.views,
            "files": self.files, "error": self.error,
            "atlas_float": self.atlas_float, "atlas_png": self.atlas_png,
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")
        return path

    @staticmethod
    def load(path: str | Path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return RunManifest(**data)


def pool_any(mask: np.ndarray, out_size: int) -> np.ndarray:
    """Boolean downsample where an output cell is true if any source pixel is."""
    s = mask.shape[0]
    idx = (np.arange(s) * out_size) // s
    flat = idx[:, None] * out_size + idx[None, :]
    counts = np.bincount(flat.ravel(), weights=mask.ravel().astype(np.float64),
                         minlength=out_size * out_size)
    return (counts > 0).reshape(out_size, out_size)


def latent_depth(depth: DepthMap, out_size: int) -> DepthMap:
    """Bilinear depth downsample with any-pooled coverage, zeroed outside."""
    values = resize_bilinear(depth.values, out_size, out_size)
    mask = pool_any(depth.mask, out_size)
    values[~mask] = 0.0
    return DepthMap(values=values.astype(np.float32), mask=mask)


def build_update_mask(gbuffer: GBuffer, painted: np.ndarray,
                      latent_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Latent cells eligible for repainting this view, and the object mask.

    A render pixel is "new" when it is covered and the painted-coverage map
    sampled at its uv falls below 0.5; new pixels are any-pooled to latent
    resolution and intersected with the pooled object mask.
    """
    object_latent = pool_any(gbuffer.mask, latent_size)
    new_pixels = np.zeros_like(gbuffer.mask)
    if gbuffer.mask.any():
        coverage = sample_texture_grid(painted.astype(np.float64)[..., None],
                                       gbuffer.uv[gbuffer.mask])[:, 0]
        new_pixels[gbuffer.mask] = coverage < 0.5
    update = pool_any(new_pixels, latent_size) & object_latent
    return update, object_latent


def _init_atlas(cfg: PipelineConfig, rng: np.random.Generator) -> TextureAtlas:
    spec = cfg.atlas_init
    if spec == "random":
        return TextureAtlas.random(cfg.atlas_size, rng)
    if spec.startswith("constant:"):
        level = float(spec.split(":", 1)[1])
        return TextureAtlas.constant(cfg.atlas_size, (level, level, level))
    values = _load_image_any(spec)
    if values.shape[:2] != (cfg.atlas_size, cfg.atlas_size):
        raise PipelineInputError(
            f"atlas_init {spec}: got {values.shape[:2]}, need {cfg.atlas_size}")
    return TextureAtlas(values, np.zeros(values.shape[:2], dtype=bool))


def _load_image_any(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise PipelineInputError(f"missing image file {path}")
    if p.suffix == ".npy":
        return np.asarray(load_float(p), dtype=np.float64)
    return load_png(p)


def _resolve_denoiser(cfg: PipelineConfig):
    """Returns (denoiser callable, prompt handle, decode function or None)."""
    spec = cfg.denoiser
    if spec.startswith("mock:"):
        return make_mock_denoiser(spec[5:]), mock_register_prompt(cfg.prompt), None
    if spec != "remote":
        raise PipelineInputError(f"unknown denoiser {spec!r}")
    endpoint = resolve_endpoint(cfg.denoiser_endpoint)
    denoiser = RemoteDenoiser(endpoint, cfg.denoiser_timeout, cfg.denoiser_retries)
    handle = register_prompt(endpoint, prompt_text=cfg.prompt,
                             timeout=cfg.denoiser_timeout,
                             retries=cfg.denoiser_retries)

    def decode(latent: LatentGrid, session_id: str) -> np.ndarray:
        return remote_decode(endpoint, latent.values, session_id,
                             timeout=cfg.denoiser_timeout,
                             retries=cfg.denoiser_retries)

    return denoiser, handle, decode


def _resolve_targets(cfg: PipelineConfig, shading, decode):
    """Target image source: backend decode, renders of a known atlas, or files."""
    spec = cfg.targets
    if spec == "decode":
        if decode is None:
            raise PipelineInputError(
                "targets='decode' needs a remote denoiser; configure "
                "targets='render:<atlas>' or 'files:<dir>' for mock runs")

        def provider(k, gbuffer, latent):
            image = decode(latent, f"view{k:02d}")
            return resize_bilinear(image, cfg.render_size, cfg.render_size)
        return provider
    if spec.startswith("render:"):
        truth = _load_image_any(spec.split(":", 1)[1])

        def provider(k, gbuffer, latent):
            return shading.render(gbuffer, truth)
        return provider
    if spec.startswith("files:"):
        root = Path(spec.split(":", 1)[1])

        def provider(k, gbuffer, latent):
            for ext in (".npy", ".png"):
                p = root / f"target_view{k:02d}{ext}"
                if p.exists():
                    img = _load_image_any(str(p))
                    return resize_bilinear(img, cfg.render_size, cfg.render_size)
            raise PipelineInputError(f"no target file for view {k} under {root}")
        return provider
    raise PipelineInputError(f"unknown targets spec {cfg.targets!r}")


def generate(cfg: PipelineConfig) -> RunManifest:
    """Run the full loop over the 10 scheduled views; returns the manifest.

    Raises PipelineInputError or PipelineBackendError after writing the
    manifest (with the failing view annotated); partial outputs stay on disk.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=cfg.to_dict(), seed=cfg.seed)
    manifest_path = out / "run_manifest.json"

    def fail(kind, view_index, exc):
        manifest.error = f"view {view_index}: {exc}"
        manifest.save(manifest_path)
        raise kind(manifest.error) from exc

    try:
        mesh = load_obj(cfg.mesh_path)
    except (OSError, MeshError) as exc:
        manifest.error = f"mesh: {exc}"
        manifest.save(manifest_path)
        manifest.register(manifest_path)
        raise PipelineInputError(manifest.error) from exc

    center, bsr = mesh.bounding_sphere()
    views = schedule_viewpoints(cfg.radius_factor * bsr, cfg.fov_y, cfg.render_size)
    shading = cfg.shading()
    rng = np.random.default_rng(cfg.seed)
    atlas = _init_atlas(cfg, rng)
    pcfg = ProjectionConfig(lam=cfg.lam, steps=cfg.steps, step_size=cfg.step_size,
                            render_size=cfg.render_size, decay=cfg.step_decay)
    try:
        denoiser, prompt_handle, decode = _resolve_denoiser(cfg)
        provider = _resolve_targets(cfg, shading, decode)
    except (TransportError, BackendError) as exc:
        fail(PipelineBackendError, 0, exc)

    lsize = cfg.latent_size
    for k, vp in enumerate(views):
        t0 = time.perf_counter()
        record = {"index": k, "viewpoint": {
            "azimuth": vp.azimuth, "elevation": vp.elevation,
            "radius": vp.radius, "fov_y": vp.fov_y, "image_size": vp.image_size}}
        try:
            gbuffer = rasterize(mesh, vp, workers=cfg.workers)
            if not gbuffer.mask.any():
                record["note"] = "no coverage; view skipped"
                manifest.views.append(record)
                continue
            depth_full = normalize_depth(gbuffer.depth, gbuffer.mask)
            dfloat, dpng = save_depth(out / f"view{k:02d}_depth", depth_full)
            record["depth_float"] = manifest.register(dfloat)
            record["depth_png"] = manifest.register(dpng)

            update_mask, object_latent = build_update_mask(
                gbuffer, atlas.touched, lsize)
            record["update_mask_cells"] = int(update_mask.sum())

            if k == 0 and cfg.target_override:
                target = resize_bilinear(_load_image_any(cfg.target_override),
                                         cfg.render_size, cfg.render_size)
            else:
                noise = rng.standard_normal(
                    (cfg.latent_channels, lsize, lsize)).astype(np.float32)
                init_latent = LatentGrid(noise, cfg.md_steps)
                latent = run_md_denoising(
                    init_latent, denoiser, latent_depth(depth_full, lsize),
                    prompt_handle, update_mask,
                    schedule=list(range(cfg.md_steps - 1, -1, -1)),
                    object_mask=object_latent, window_size=cfg.window_size,
                    stride=cfg.window_stride,
                    linear_weights=cfg.linear_md_weights,
                    concurrency=cfg.md_concurrency,
                    session_id=f"view{k:02d}-seed{cfg.seed}")
                blob, header = save_latent(latent, out / f"view{k:02d}_latent")
                record["latent"] = manifest.register(blob)
                manifest.register(header)
                target = provider(k, gbuffer, latent)

            tpng = save_png(out / f"view{k:02d}_target.png", target)
            record["target_png"] = manifest.register(tpng)

            atlas, losses = optimize_on_gbuffer(atlas, gbuffer, target, pcfg, shading)
            record["loss_first"] = losses[0] if losses else None
            record["loss_last"] = losses[-1] if losses else None
            record["loss_curve"] = losses

            rpng = save_png(out / f"view{k:02d}_render.png",
                            shading.render(gbuffer, atlas))
            record["render_png"] = manifest.register(rpng)
        except (TransportError, BackendError, DenoiserFailure) as exc:
            manifest.views.append(record)
            fail(PipelineBackendError, k, exc)
        except (OSError, PipelineInputError) as exc:
            manifest.views.append(record)
            fail(PipelineInputError, k, exc)
        record["wall_time_s"] = time.perf_counter() - t0
        manifest.views.append(record)

    manifest.atlas_float = manifest.register(
        save_float(out / "atlas.npy", atlas.values))
    manifest.atlas_png = manifest.register(
        save_png(out / "atlas.png", atlas.values, flip_v=True))
    manifest.register(save_png(out / "atlas_touched.png",
                               atlas.touched.astype(np.float64)))
    manifest.register(manifest_path)
    manifest.save(manifest_path)
    return manifest


def render_view(mesh: Mesh, atlas_values: np.ndarray, vp, shading,
                out_dir: str | Path, stem: str = "render",
                workers: int = 1) -> dict:
    """Rasterize and shade one view; writes PNG, float image, and mask."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gbuffer = rasterize(mesh, vp, workers=workers)
    image = shading.render(gbuffer, atlas_values)
    paths = {
        "png": str(save_png(out / f"{stem}.png", image)),
        "float": str(save_float(out / f"{stem}.npy", image)),
        "mask": str(save_png(out / f"{stem}_mask.png",
                             gbuffer.mask.astype(np.float64))),
    }
    return paths


def validate_mesh(path: str | Path, probe_resolution: int = 512):
    """UV chart report plus normal and bounds statistics; exit 0 iff no overlap."""
    mesh = load_obj(path)
    report = validate_uv_atlas(mesh, probe_resolution)
    center, radius = mesh.bounding_sphere()
    lengths = np.linalg.norm(mesh.normals, axis=1)
    summary = {
        "faces": mesh.num_faces,
        "vertices": len(mesh.vertices),
        "uv_overlap_texels": report.overlap_texel_count,
        "uv_coverage_fraction": report.coverage_fraction,
        "probe_resolution": report.probe_resolution,
        "normal_length_min": float(lengths.min()),
        "normal_length_max": float(lengths.max()),
        "bounding_sphere_center": [float(x) for x in center],
        "bounding_sphere_radius": radius,
    }
    code = EXIT_OK if report.overlap_texel_count == 0 else EXIT_VALIDATION
    return summary, code
