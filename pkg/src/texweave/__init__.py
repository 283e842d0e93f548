"""texweave: multi-view texture synthesis for UV-mapped meshes.

CPU-only and deterministic: a differentiable rasterizer, two analytic
lighting models, gradient-based texture-atlas projection, and a
sliding-window latent reconciliation loop with a pluggable denoiser.
"""

__version__ = "0.1.0"

from .camera import (DepthMap, Viewpoint, normalize_depth, random_viewpoint,
                     schedule_viewpoints, view_project)
from .mesh import Mesh, UVChartReport, compute_normals, load_obj, save_obj, validate_uv_atlas
from .multidiffusion import (DenoiseProposal, LatentGrid, Window, filter_windows,
                             md_step, region_weight, run_md_denoising, tile_windows)
from .projector import (ProjectionConfig, TextureAtlas, gradient_penalty,
                        optimize_texture, projection_loss)
from .raster import GBuffer, backward_to_texture, rasterize, sample_texture
from .shading import (BRDFParams, LightSource, SHLighting, ShadingSetup,
                      cook_torrance_specular, fresnel_schlick, ggx_ndf,
                      phong_diffuse, render_cook_torrance, render_sh, sh_basis,
                      smith_ggx)

__all__ = [name for name in dir() if not name.startswith("_")]
