"""High-level render entry points shared by the CLI and the HTTP service."""

from __future__ import annotations

import numpy as np

from ghair import sh
from ghair.camera import CameraView
from ghair.model import HairModel, ScatterParams
from ghair.raster import (
    FrameBuffer,
    RasterSettings,
    composite_pass,
    light_pass,
    render_orientation,
)
from ghair.raster.composite import view_directions
from ghair.scatter import LightSource, shade_points


def render_color(model: HairModel, cam: CameraView, settings: RasterSettings | None = None) -> FrameBuffer:
    return composite_pass(model, cam, "sh_color", settings)


def render_relight(
    model: HairModel,
    cam: CameraView,
    lights: list[LightSource],
    params: ScatterParams,
    settings: RasterSettings | None = None,
) -> FrameBuffer:
    """Shaded render: per-light transmittance passes, fiber + local scattering
    on hair Gaussians, SH color on the frozen head set, then compositing."""
    settings = settings or RasterSettings()
    n_gauss = model.num_hair_gaussians + model.head.count
    taus = np.ones((len(lights), n_gauss), dtype=np.float64)
    for k, light in enumerate(lights):
        taus[k] = light_pass(model, light.position, settings, update_model=False)

    hair_count = model.num_hair_gaussians
    radiance = np.zeros((n_gauss, 3), dtype=np.float64)
    if hair_count:
        centers = model.centers().reshape(-1, 3)
        dirs = model.directions().reshape(-1, 3)
        base = sh.dc_color(model.sh.reshape(hair_count, 3, -1)[:, :, 0])
        wo = -view_directions(centers, cam)
        radiance[:hair_count] = shade_points(
            centers, dirs, base, wo, lights, params, taus[:, :hair_count]
        )
    if model.head.count:
        dirs_to_head = view_directions(model.head.means, cam)
        radiance[hair_count:] = sh.eval_color(model.head.sh, dirs_to_head, model.sh_degree)
    return composite_pass(model, cam, "shaded_radiance", settings, radiance=radiance)


def render_mode(
    model: HairModel,
    cam: CameraView,
    mode: str,
    lights: list[LightSource] | None = None,
    params: ScatterParams | None = None,
    settings: RasterSettings | None = None,
) -> FrameBuffer:
    """Dispatch on render mode: color, relight, or orientation."""
    if mode == "color":
        return render_color(model, cam, settings)
    if mode == "relight":
        return render_relight(model, cam, lights or [], params or ScatterParams(), settings)
    if mode == "orientation":
        return render_orientation(model, cam, settings)
    raise ValueError(f"unknown render mode {mode!r}")


def framebuffer_to_png_color(fb: FrameBuffer) -> np.ndarray:
    """Displayable RGB for any pass kind."""
    if fb.color is not None:
        return np.clip(fb.color, 0.0, 1.0)
    if fb.orientation is not None:
        # map the unit vector to RG, validity to B
        ori = fb.orientation
        rgb = np.zeros(ori.shape[:2] + (3,))
        rgb[:, :, 0] = 0.5 * (ori[:, :, 0] + 1.0)
        rgb[:, :, 1] = 0.5 * (ori[:, :, 1] + 1.0)
        rgb[:, :, 2] = fb.validity
        return rgb
    return np.repeat(fb.alpha[:, :, None], 3, axis=2)
