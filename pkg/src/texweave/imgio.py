"""Image and array I/O: 8-bit PNG previews, lossless float checkpoints (.npy),
and a bilinear resampler shared by target upscaling and latent downsampling.

Atlas PNGs are written with the v axis pointing up (row 0 at the bottom) so
external texture tools display them conventionally; renders and depth
previews keep screen orientation.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .camera import DepthMap
from .raster import sample_texture_grid


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample (H, W) or (H, W, C) by bilinear interpolation at pixel centers."""
    img = np.asarray(img, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[..., None]
    if img.shape[0] == out_h and img.shape[1] == out_w:
        out = img.copy()
    else:
        jj, ii = np.meshgrid(np.arange(out_w), np.arange(out_h))
        uv = np.stack([(jj.ravel() + 0.5) / out_w, (ii.ravel() + 0.5) / out_h],
                      axis=1)
        out = sample_texture_grid(img, uv).reshape(out_h, out_w, img.shape[2])
    return out[..., 0] if squeeze else out


def downsample_mask(mask: np.ndarray, out_h: int, out_w: int,
                    threshold: float = 0.5) -> np.ndarray:
    """Boolean downsample: bilinear coverage fraction thresholded."""
    return resize_bilinear(mask.astype(np.float64), out_h, out_w) >= threshold


def save_png(path: str | Path, img: np.ndarray, flip_v: bool = False) -> Path:
    """Write a [0, 1] float image as 8-bit PNG (grayscale or RGB)."""
    path = Path(path)
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    if flip_v:
        arr = arr[::-1]
    data = np.round(arr * 255.0).astype(np.uint8)
    mode = "L" if data.ndim == 2 else "RGB"
    Image.fromarray(data, mode=mode).save(path)
    return path


def load_png(path: str | Path, flip_v: bool = False) -> np.ndarray:
    arr = np.asarray(Image.open(path), dtype=np.float64) / 255.0
    if flip_v:
        arr = arr[::-1]
    return arr


def save_float(path: str | Path, arr: np.ndarray) -> Path:
    """Lossless checkpoint as .npy."""
    path = Path(path)
    np.save(path, np.asarray(arr))
    return path if path.suffix == ".npy" else path.with_suffix(path.suffix + ".npy")


def load_float(path: str | Path) -> np.ndarray:
    return np.load(path)


def save_depth(stem: str | Path, depth: DepthMap) -> tuple[Path, Path]:
    """Write <stem>.npy (float32 single channel) and <stem>.png preview."""
    stem = Path(stem)
    float_path = save_float(stem.with_suffix(".npy"),
                            depth.values.astype(np.float32))
    png_path = save_png(stem.with_suffix(".png"), depth.values)
    return float_path, png_path


def smooth_random_atlas(size: int, rng: np.random.Generator,
                        cells: int = 16) -> np.ndarray:
    """Low-frequency random RGB field: bilinear upsample of a coarse grid."""
    coarse = rng.uniform(0.05, 0.95, (cells, cells, 3))
    return resize_bilinear(coarse, size, size)
