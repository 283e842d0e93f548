"""Sliding-window reconciliation of per-region denoiser proposals.

A latent grid is tiled by overlapping windows; a denoiser proposes the next
latent for each window; the reconciled grid is the closed-form minimizer of
the weighted least-squares disagreement between windows. Window weights are
the object-mask proportion inside the window, so background-dominated
windows barely influence the result. Cells no retained window covers (or
whose weights are all zero) pass through unchanged.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .denoiser import DenoiseRequest, DenoiseResponse
from .raster import ShapeMismatch


class WindowTooLarge(Exception):
    """Window size exceeds the latent grid."""


class DenoiserFailure(Exception):
    """A denoiser query failed; carries the window id and timestep."""


class EmptyProposalsWarning(UserWarning):
    """md_step received no proposals and passed the latent through."""


@dataclass
class LatentGrid:
    """Channel-major square latent with its diffusion timestep."""

    values: np.ndarray       # (C, L, L) float32
    timestep: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3 or self.values.shape[1] != self.values.shape[2]:
            raise ShapeMismatch("latent values must be (C, L, L)")

    @property
    def size(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Window:
    """A square region of the latent grid with its object-coverage weight."""

    origin: tuple[int, int]  # (row, col)
    size: int = 64
    weight: float = 0.0


@dataclass(frozen=True)
class DenoiseProposal:
    """One window's proposed next-step latent."""

    window: Window
    values: np.ndarray       # (C, size, size)


def tile_windows(grid_size: int, size: int = 64, stride: int = 16) -> list[tuple[int, int]]:
    """Window origins at stride multiples, plus a final flush origin per axis.

    The appended origin at grid_size - size guarantees full coverage when the
    stride does not divide the remaining span.
    """
    if grid_size < size:
        raise WindowTooLarge(f"grid {grid_size} smaller than window {size}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    axis = list(range(0, grid_size - size + 1, stride))
    if axis[-1] != grid_size - size:
        axis.append(grid_size - size)
    return [(r, c) for r in axis for c in axis]


def region_weight(window: Window, object_mask: np.ndarray) -> float:
    """Fraction of object-mask cells inside the window."""
    r, c = window.origin
    s = window.size
    if r < 0 or c < 0 or r + s > object_mask.shape[0] or c + s > object_mask.shape[1]:
        raise WindowTooLarge(f"window at {window.origin} exceeds the grid")
    return float(object_mask[r:r + s, c:c + s].sum()) / (s * s)


def filter_windows(windows: list[Window], update_mask: np.ndarray) -> list[Window]:
    """Keep windows whose area intersects at least one true update-mask cell."""
    kept = []
    for w in windows:
        r, c = w.origin
        if update_mask[r:r + w.size, c:c + w.size].any():
            kept.append(w)
    return kept


def md_step(j_t: LatentGrid, proposals: list[DenoiseProposal],
            linear_weights: bool = False) -> LatentGrid:
    """Reconcile proposals into the weighted least-squares minimizer.

    Per cell and channel the result is sum(w_i^2 * proposal_i) / sum(w_i^2)
    over covering windows (w_i when linear_weights is set, matching the
    plain-averaging lineage). Uncovered or all-zero-weight cells keep their
    current value. Accumulation runs in proposal order in float64 and is
    bit-deterministic.
    """
    if not proposals:
        warnings.warn("md_step called with no proposals; latent passed through",
                      EmptyProposalsWarning, stacklevel=2)
        return LatentGrid(j_t.values.copy(), j_t.timestep)
    c, size = j_t.channels, j_t.size
    num = np.zeros((c, size, size), dtype=np.float64)
    den = np.zeros((size, size), dtype=np.float64)
    for p in proposals:
        r, col = p.window.origin
        s = p.window.size
        if p.values.shape != (c, s, s):
            raise ShapeMismatch(
                f"proposal {p.values.shape} vs window ({c}, {s}, {s})")
        if r < 0 or col < 0 or r + s > size or col + s > size:
            raise WindowTooLarge(f"window at {p.window.origin} exceeds the grid")
        w = p.window.weight if linear_weights else p.window.weight ** 2
        num[:, r:r + s, col:col + s] += w * p.values.astype(np.float64)
        den[r:r + s, col:col + s] += w
    covered = den > 0.0
    out = j_t.values.astype(np.float64).copy()
    out[:, covered] = num[:, covered] / den[covered]
    return LatentGrid(out.astype(np.float32), j_t.timestep)


def run_md_denoising(init: LatentGrid, denoiser, depth, prompt_handle: str,
                     update_mask: np.ndarray, schedule: list[int],
                     object_mask: np.ndarray | None = None,
                     window_size: int = 64, stride: int = 16,
                     linear_weights: bool = False, concurrency: int = 1,
                     session_id: str = "md") -> LatentGrid:
    """Iterate tile -> filter -> weight -> denoise -> reconcile down to t=0.

    depth supplies per-window conditioning crops (values) and, unless
    object_mask is given, the object coverage (mask) used for weights;
    both must already be at latent resolution. Window queries may run
    concurrently; aggregation order is fixed, so a deterministic denoiser
    plus a fixed seed yields a bit-identical trajectory at any concurrency.
    """
    if any(b >= a for a, b in zip(schedule, schedule[1:])) or not schedule \
            or schedule[-1] != 0:
        raise ValueError("schedule must be strictly decreasing and end at 0")
    depth_values = np.asarray(getattr(depth, "values", depth), dtype=np.float32)
    if object_mask is None:
        object_mask = np.asarray(depth.mask, dtype=bool)
    size = init.size
    if depth_values.shape != (size, size) or object_mask.shape != (size, size) \
            or update_mask.shape != (size, size):
        raise ShapeMismatch("depth, object mask, and update mask must match the latent")

    current = LatentGrid(init.values.copy(), init.timestep)
    origins = tile_windows(size, window_size, stride)
    for t in schedule:
        windows = [Window(origin, window_size) for origin in origins]
        retained = filter_windows(windows, update_mask)
        retained = [replace(w, weight=region_weight(w, object_mask))
                    for w in retained]

        def query(indexed) -> DenoiseResponse:
            i, w = indexed
            r, c = w.origin
            request = DenoiseRequest(
                session_id=session_id,
                timestep=t,
                latent=current.values[:, r:r + w.size, c:c + w.size].copy(),
                depth=depth_values[r:r + w.size, c:c + w.size].copy(),
                prompt_handle=prompt_handle,
            )
            try:
                return denoiser(request)
            except Exception as exc:
                raise DenoiserFailure(
                    f"window {i} at {w.origin}, timestep {t}: {exc}") from exc

        items = list(enumerate(retained))
        if concurrency > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=concurrency) as pool:
                responses = list(pool.map(query, items))
        else:
            responses = [query(item) for item in items]
        proposals = [DenoiseProposal(window=w, values=resp.latent)
                     for (_, w), resp in zip(items, responses)]
        with warnings.catch_warnings():
            if not proposals:
                warnings.simplefilter("ignore", EmptyProposalsWarning)
            current = md_step(current, proposals, linear_weights=linear_weights)
        current.timestep = t
    return current


def save_latent(grid: LatentGrid, stem: str | Path) -> tuple[Path, Path]:
    """Write <stem>.bin (raw little-endian float32) and <stem>.json header."""
    stem = Path(stem)
    blob_path = stem.with_suffix(".bin")
    header_path = stem.with_suffix(".json")
    blob_path.write_bytes(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())
    header_path.write_text(json.dumps({
        "channels": grid.channels,
        "size": grid.size,
        "timestep": grid.timestep,
    }))
    return blob_path, header_path


def load_latent(stem: str | Path) -> LatentGrid:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    shape = (header["channels"], header["size"], header["size"])
    raw = stem.with_suffix(".bin").read_bytes()
    if len(raw) != int(np.prod(shape)) * 4:
        raise ShapeMismatch("latent blob length does not match its header")
    values = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return LatentGrid(values, header["timestep"])
