"""Denoiser contract: deterministic in-process mocks plus an HTTP client.

Wire protocol v1 (bit-exact): blobs are little-endian float32, row-major,
base64. POST {endpoint}/v1/denoise with
{"session_id", "timestep", "shape": [C, H, W], "latent_b64", "depth_b64",
"prompt_handle"} -> {"status": "ok", "latent_b64"} or
{"status": "error", "message"}. POST {endpoint}/v1/embed with
{"prompt_text"} or {"embedding_b64", "dim"} -> {"prompt_handle"}.
POST {endpoint}/v1/decode with {"session_id", "shape": [C, H, W],
"latent_b64"} -> {"status": "ok", "shape": [H', W', 3], "image_b64"}.
The env var TEXWEAVE_DENOISER_URL overrides any configured endpoint.
"""
from __future__ import annotations

import base64
import hashlib
import os
from dataclasses import dataclass

import numpy as np
import requests
from scipy.ndimage import uniform_filter

from .raster import ShapeMismatch

ENDPOINT_ENV_VAR = "TEXWEAVE_DENOISER_URL"


class TransportError(Exception):
    """The endpoint could not be reached (after exhausting retries)."""


class Timeout(TransportError):
    """The endpoint did not answer within the deadline."""


class BackendError(Exception):
    """The backend answered with an error message (surfaced verbatim)."""


@dataclass(frozen=True)
class DenoiseRequest:
    """One window's denoising query: latent crop, depth crop, conditioning."""

    session_id: str
    timestep: int
    latent: np.ndarray        # (C, H, W) float32
    depth: np.ndarray         # (H, W) float32 in [0, 1]
    prompt_handle: str

    def __post_init__(self):
        if self.latent.ndim != 3:
            raise ShapeMismatch("latent must be (C, H, W)")
        if self.depth.shape != self.latent.shape[1:]:
            raise ShapeMismatch(
                f"depth {self.depth.shape} does not match latent {self.latent.shape}")


@dataclass(frozen=True)
class DenoiseResponse:
    latent: np.ndarray        # same shape as the request latent


def encode_f32(arr: np.ndarray) -> str:
    """Base64 of the array as little-endian float32, row-major."""
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def decode_f32(blob_b64: str, shape) -> np.ndarray:
    """Inverse of encode_f32; validates the byte count against the shape."""
    raw = base64.b64decode(blob_b64.encode("ascii"), validate=True)
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise ShapeMismatch(f"blob holds {len(raw)} bytes, shape {tuple(shape)} "
                            f"needs {expected}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def request_to_wire(request: DenoiseRequest) -> dict:
    return {
        "session_id": request.session_id,
        "timestep": int(request.timestep),
        "shape": [int(x) for x in request.latent.shape],
        "latent_b64": encode_f32(request.latent),
        "depth_b64": encode_f32(request.depth),
        "prompt_handle": request.prompt_handle,
    }


# ---------------------------------------------------------------------------
# Mocks: pure, deterministic stand-ins used throughout the test suite.

def mock_denoise(kind: str, request: DenoiseRequest) -> DenoiseResponse:
    """Evaluate one mock denoiser.

    kind is "identity", "constant:<c>", "shrink:<gamma>", or "box_blur:<k>".
    """
    name, _, arg = kind.partition(":")
    latent = request.latent.astype(np.float32, copy=True)
    if name == "identity":
        out = latent
    elif name == "constant":
        out = np.full_like(latent, np.float32(float(arg)))
    elif name == "shrink":
        out = (np.float32(float(arg)) * latent).astype(np.float32)
    elif name == "box_blur":
        k = int(arg)
        out = np.stack([uniform_filter(ch, size=k, mode="nearest")
                        for ch in latent]).astype(np.float32)
    else:
        raise ValueError(f"unknown mock denoiser {kind!r}")
    return DenoiseResponse(latent=out)


def make_mock_denoiser(kind: str):
    """Bind a kind string into a callable matching the denoiser contract."""
    mock_denoise(kind, DenoiseRequest("probe", 0,
                                      np.zeros((1, 2, 2), np.float32),
                                      np.zeros((2, 2), np.float32), "probe"))
    return lambda request: mock_denoise(kind, request)


def mock_register_prompt(prompt_text: str) -> str:
    """Stable opaque handle for mock runs; identical text maps to one handle."""
    return "mock-" + hashlib.sha1(prompt_text.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Remote client.

def resolve_endpoint(configured: str | None) -> str | None:
    return os.environ.get(ENDPOINT_ENV_VAR) or configured


def _post(endpoint: str, route: str, body: dict, timeout: float, retries: int) -> dict:
    url = endpoint.rstrip("/") + route
    attempts = retries + 1
    last: Exception | None = None
    for _ in range(attempts):
        try:
            resp = requests.post(url, json=body, timeout=timeout)
            break
        except requests.exceptions.Timeout as exc:
            last = Timeout(f"{url}: {exc}")
        except requests.exceptions.RequestException as exc:
            last = TransportError(f"{url}: {exc}")
    else:
        raise last
    try:
        payload = resp.json()
    except ValueError as exc:
        raise BackendError(f"{url}: non-JSON response ({resp.status_code})") from exc
    if payload.get("status") == "error":
        raise BackendError(payload.get("message", "unspecified backend error"))
    if resp.status_code != 200:
        raise BackendError(f"{url}: HTTP {resp.status_code}")
    return payload


def remote_denoise(endpoint: str, request: DenoiseRequest, timeout: float = 30.0,
                   retries: int = 2) -> DenoiseResponse:
    """POST one denoise query; retry transport failures idempotently.

    Retries are safe because a denoise step is deterministic for a backend
    with fixed seed discipline, keyed by (session_id, timestep, window).
    """
    payload = _post(endpoint, "/v1/denoise", request_to_wire(request),
                    timeout, retries)
    if "latent_b64" not in payload:
        raise BackendError("denoise response lacks latent_b64")
    latent = decode_f32(payload["latent_b64"], request.latent.shape)
    return DenoiseResponse(latent=latent)


def register_prompt(endpoint: str, prompt_text: str | None = None,
                    embedding: np.ndarray | None = None,
                    timeout: float = 30.0, retries: int = 2) -> str:
    """Register conditioning with the backend; returns an opaque handle."""
    if (prompt_text is None) == (embedding is None):
        raise ValueError("pass exactly one of prompt_text, embedding")
    if prompt_text is not None:
        body = {"prompt_text": prompt_text}
    else:
        emb = np.asarray(embedding, dtype=np.float32).reshape(-1)
        body = {"embedding_b64": encode_f32(emb), "dim": int(emb.size)}
    payload = _post(endpoint, "/v1/embed", body, timeout, retries)
    handle = payload.get("prompt_handle")
    if not handle:
        raise BackendError("embed response lacks prompt_handle")
    return str(handle)


def remote_decode(endpoint: str, latent: np.ndarray, session_id: str = "",
                  timeout: float = 60.0, retries: int = 2) -> np.ndarray:
    """Ask the backend to decode a latent into an RGB float image (H, W, 3)."""
    body = {
        "session_id": session_id,
        "shape": [int(x) for x in latent.shape],
        "latent_b64": encode_f32(latent),
    }
    payload = _post(endpoint, "/v1/decode", body, timeout, retries)
    shape = payload.get("shape")
    if not shape or "image_b64" not in payload:
        raise BackendError("decode response lacks shape or image_b64")
    if len(shape) != 3 or shape[2] != 3:
        raise ShapeMismatch(f"decode shape {shape} is not (H, W, 3)")
    return decode_f32(payload["image_b64"], shape)


class RemoteDenoiser:
    """Callable denoiser bound to one endpoint, for use in the MD loop."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def __call__(self, request: DenoiseRequest) -> DenoiseResponse:
        return remote_denoise(self.endpoint, request, self.timeout, self.retries)
