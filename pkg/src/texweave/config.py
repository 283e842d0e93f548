"""Pipeline configuration: one dataclass, JSON in, JSON out.

Unset fields fall back to the reference operating point: 2048^2 atlas,
2400^2 render, 1024^2 reconciled output (stride 16, window 64), smoothness
weight 0.01, 10 scheduled views. The JSON key for the smoothness weight is
"lambda"; the attribute is ``lam`` (keyword collision).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .shading import BRDFParams, LightSource, SHLighting, ShadingSetup

_JSON_KEY_OVERRIDES = {"lam": "lambda"}
_ATTR_FOR_KEY = {v: k for k, v in _JSON_KEY_OVERRIDES.items()}


@dataclass
class PipelineConfig:
    mesh_path: str = ""
    output_dir: str = "texweave_out"
    seed: int = 0

    atlas_size: int = 2048
    render_size: int = 2400
    md_output_size: int = 1024
    window_stride: int = 16
    window_size: int = 64
    latent_channels: int = 4
    latent_compression: int = 8
    lam: float = 0.01
    steps: int = 400
    step_size: float = 1e-2
    step_decay: bool = True
    md_steps: int = 10
    linear_md_weights: bool = False

    fov_y: float = math.pi / 4
    radius_factor: float = 1.8

    shading_model: str = "sh"
    k_d: float = 1.0
    f0: tuple[float, float, float] = (0.04, 0.04, 0.04)
    roughness: float = 0.5
    light_dir: tuple[float, float, float] = (0.0, 0.0, 1.0)
    light_intensity: tuple[float, float, float] = (1.0, 1.0, 1.0)
    specular_enabled: bool = True
    sh_coeffs: tuple = (3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    denoiser: str = "remote"               # "remote" or "mock:<kind>"
    denoiser_endpoint: str = "http://127.0.0.1:8642"
    denoiser_timeout: float = 30.0
    denoiser_retries: int = 2
    md_concurrency: int = 4
    prompt: str = "an object"

    targets: str = "decode"                # "decode", "render:<atlas>", "files:<dir>"
    target_override: str = ""              # optional image for view 0, skips MD
    atlas_init: str = "random"             # "random", "constant:<v>", or a file path

    workers: int = 1

    @property
    def latent_size(self) -> int:
        return self.md_output_size // self.latent_compression

    def shading(self) -> ShadingSetup:
        return ShadingSetup(
            model=self.shading_model,
            brdf=BRDFParams(k_d=self.k_d, f0=tuple(self.f0),
                            roughness=self.roughness),
            light=LightSource(tuple(self.light_dir), tuple(self.light_intensity)),
            sh=SHLighting(tuple(self.sh_coeffs)),
            specular_enabled=self.specular_enabled,
            background=tuple(self.background),
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[_JSON_KEY_OVERRIDES.get(f.name, f.name)] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            attr = _ATTR_FOR_KEY.get(key, key)
            if attr not in known:
                raise KeyError(f"unknown config key {key!r}")
            if isinstance(value, list):
                value = tuple(value)
            kwargs[attr] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path
