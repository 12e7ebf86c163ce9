from ghair.raster.settings import RasterSettings
from ghair.raster.framebuffer import FrameBuffer, write_ghfb, read_ghfb
from ghair.raster.project import ProjectedSplats, project_gaussians, project_model
from ghair.raster.composite import (
    composite_pass,
    render_color,
    render_orientation,
    light_pass,
    synthesize_light_camera,
    LightInsideModelError,
)

__all__ = [
    "RasterSettings",
    "FrameBuffer",
    "write_ghfb",
    "read_ghfb",
    "ProjectedSplats",
    "project_gaussians",
    "project_model",
    "composite_pass",
    "render_color",
    "render_orientation",
    "light_pass",
    "synthesize_light_camera",
    "LightInsideModelError",
]
