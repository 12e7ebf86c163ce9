"""Tile-binned front-to-back splatting passes.

Payload kinds:
  sh_color         view-dependent SH color per Gaussian
  orientation      image-plane tangent direction (composited 2-vector)
  shaded_radiance  caller-supplied radiance (relighting path)
  alpha_only       coverage only

render_orientation picks, per pixel, the tangent of the largest single
contribution (argmax of T*w) rather than the composited blend; the blend is
what the orientation training loss uses.

light_pass renders the scene from a light's point of view with contributor
records and assigns each responsible Gaussian (kernel value > 0.5) the
transmittance in front of it; Gaussians touched by several rays keep the
minimum.
"""

from __future__ import annotations

import numpy as np

from ghair import backend, sh
from ghair.camera import CameraView, look_at
from ghair.model import HairModel
from ghair.raster.framebuffer import FrameBuffer
from ghair.raster.project import ProjectedSplats, project_model
from ghair.raster.settings import RasterSettings

PAYLOAD_KINDS = ("sh_color", "orientation", "shaded_radiance", "alpha_only")

RESPONSIBILITY_THRESHOLD = 0.5


class LightInsideModelError(ValueError):
    """Point light placed inside the model's bounding sphere."""


def tile_bin(splats: ProjectedSplats, width: int, height: int, tile_size: int):
    """CSR tile lists; splats stay in global depth order within each tile."""
    n_tiles_x = (width + tile_size - 1) // tile_size
    n_tiles_y = (height + tile_size - 1) // tile_size
    n_tiles = n_tiles_x * n_tiles_y
    k = splats.count
    if k == 0:
        return np.zeros(n_tiles + 1, dtype=np.int64), np.zeros(0, dtype=np.int64), n_tiles_x

    x0 = np.clip(((splats.mean2d[:, 0] - splats.radius) // tile_size).astype(np.int64), 0, n_tiles_x - 1)
    x1 = np.clip(((splats.mean2d[:, 0] + splats.radius) // tile_size).astype(np.int64), 0, n_tiles_x - 1)
    y0 = np.clip(((splats.mean2d[:, 1] - splats.radius) // tile_size).astype(np.int64), 0, n_tiles_y - 1)
    y1 = np.clip(((splats.mean2d[:, 1] + splats.radius) // tile_size).astype(np.int64), 0, n_tiles_y - 1)

    spans_x = (x1 - x0 + 1).astype(np.int64)
    spans_y = (y1 - y0 + 1).astype(np.int64)
    counts = spans_x * spans_y
    total = int(counts.sum())
    splat_of = np.repeat(np.arange(k, dtype=np.int64), counts)

    # enumerate each splat's tile rectangle row-major
    offs = np.concatenate([[0], np.cumsum(counts)])
    local = np.arange(total, dtype=np.int64) - offs[splat_of]
    lx = local % spans_x[splat_of]
    ly = local // spans_x[splat_of]
    tiles = (y0[splat_of] + ly) * n_tiles_x + (x0[splat_of] + lx)

    order = np.lexsort((splat_of, tiles))  # tile-major, depth order within tile
    tiles_sorted = tiles[order]
    tile_splats = splat_of[order]
    tile_counts = np.bincount(tiles_sorted, minlength=n_tiles)
    tile_offsets = np.zeros(n_tiles + 1, dtype=np.int64)
    np.cumsum(tile_counts, out=tile_offsets[1:])
    return tile_offsets, tile_splats, n_tiles_x


def view_directions(centers: np.ndarray, cam: CameraView) -> np.ndarray:
    v = centers - cam.position
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(n, 1e-30)


def projected_tangents(
    dirs_world: np.ndarray, t_cam: np.ndarray, cam: CameraView
) -> np.ndarray:
    """Unit image-plane direction of world tangents at camera-space points.

    Sign-canonicalized to the upper half-plane (y > 0, or y == 0 and x >= 0)
    since fiber orientation is 180-degree ambiguous.
    """
    d_cam = dirs_world @ cam.rotation.T
    x, y, z = t_cam[:, 0], t_cam[:, 1], t_cam[:, 2]
    # J @ d_cam per splat
    px = cam.fx / z * d_cam[:, 0] - cam.fx * x / (z * z) * d_cam[:, 2]
    py = cam.fy / z * d_cam[:, 1] - cam.fy * y / (z * z) * d_cam[:, 2]
    p = np.stack([px, py], axis=-1)
    n = np.linalg.norm(p, axis=-1, keepdims=True)
    p = np.where(n > 1e-12, p / np.maximum(n, 1e-30), 0.0)
    flip = (p[:, 1] < 0) | ((p[:, 1] == 0) & (p[:, 0] < 0))
    p[flip] *= -1.0
    return p


def gather_payload(
    model: HairModel,
    splats: ProjectedSplats,
    hair_count: int,
    kind: str,
    radiance: np.ndarray | None = None,
):
    """Per-visible-splat payload array for the requested pass kind."""
    if kind == "alpha_only":
        return np.zeros((splats.count, 1), dtype=np.float64)
    if kind == "shaded_radiance":
        if radiance is None:
            raise ValueError("shaded_radiance requires a radiance array")
        return radiance[splats.source_id]
    if kind == "sh_color":
        all_sh = model.sh.reshape(-1, 3, model.sh.shape[-1])
        if model.head.count:
            all_sh = np.concatenate([all_sh, model.head.sh], axis=0)
        centers = model.centers().reshape(-1, 3)
        if model.head.count:
            centers = np.concatenate([centers, model.head.means], axis=0)
        sel = splats.source_id
        dirs = view_directions(centers[sel], splats.cam)
        return sh.eval_color(all_sh[sel], dirs, model.sh_degree)
    if kind == "orientation":
        tangents = model.directions().reshape(-1, 3)
        sel = splats.source_id
        pay = np.zeros((splats.count, 2), dtype=np.float64)
        is_hair = sel < hair_count
        if np.any(is_hair):
            sub = np.nonzero(is_hair)[0]
            pay[sub] = projected_tangents(
                tangents[sel[sub]], splats.t_cam[sub], splats.cam
            )
        return pay
    raise ValueError(f"unknown payload kind {kind!r} (expected one of {PAYLOAD_KINDS})")


def composite_splats(
    splats: ProjectedSplats,
    payload: np.ndarray,
    width: int,
    height: int,
    settings: RasterSettings,
    record: bool = False,
):
    """Run the kernel over binned splats; returns (color, alpha, records)."""
    kern = backend.get_kernels()
    tile_offsets, tile_splats, n_tiles_x = tile_bin(splats, width, height, settings.tile_size)
    return kern.composite(
        height,
        width,
        settings.tile_size,
        n_tiles_x,
        tile_offsets,
        tile_splats,
        splats.mean2d,
        splats.conic,
        splats.opacity,
        np.ascontiguousarray(payload, dtype=np.float64),
        settings.eps_t,
        settings.q_cut,
        record,
    )


def composite_pass(
    model: HairModel,
    cam: CameraView,
    payload_kind: str,
    settings: RasterSettings | None = None,
    radiance: np.ndarray | None = None,
    record: bool = False,
) -> FrameBuffer:
    settings = settings or RasterSettings()
    splats, hair_count = project_model(model, cam, settings)
    payload = gather_payload(model, splats, hair_count, payload_kind, radiance)
    color, alpha, records = composite_splats(
        splats, payload, cam.width, cam.height, settings, record
    )
    fb = FrameBuffer(width=cam.width, height=cam.height, contributors=records)
    fb.channels["alpha"] = alpha
    if payload_kind in ("sh_color", "shaded_radiance"):
        fb.channels["color"] = color
    elif payload_kind == "orientation":
        n = np.linalg.norm(color, axis=-1, keepdims=True)
        fb.channels["orientation"] = np.where(n > 1e-12, color / np.maximum(n, 1e-30), 0.0)
        fb.channels["validity"] = (alpha >= settings.eps_alpha).astype(np.float64)
    return fb


def render_color(
    model: HairModel,
    cam: CameraView,
    settings: RasterSettings | None = None,
) -> FrameBuffer:
    return composite_pass(model, cam, "sh_color", settings)


def render_orientation(
    model: HairModel,
    cam: CameraView,
    settings: RasterSettings | None = None,
    composited: bool = False,
) -> FrameBuffer:
    """Per-pixel fiber orientation map.

    Default: tangent of the max-contribution Gaussian per pixel. With
    composited=True, the alpha-blended tangent field instead (differentiable
    flavor used by the orientation loss).
    """
    settings = settings or RasterSettings()
    if composited:
        return composite_pass(model, cam, "orientation", settings)

    splats, hair_count = project_model(model, cam, settings)
    payload = gather_payload(model, splats, hair_count, "orientation")
    _, alpha, records = composite_splats(
        splats, payload, cam.width, cam.height, settings, record=True
    )
    rec_offsets, rec_idx, rec_w, _, rec_t = records
    contrib = rec_w * rec_t
    orient = np.zeros((cam.height * cam.width, 2), dtype=np.float64)
    valid = np.zeros(cam.height * cam.width, dtype=bool)
    # hair splats only compete for the argmax
    is_hair = splats.source_id[rec_idx] < hair_count
    contrib = np.where(is_hair, contrib, -1.0)
    counts = np.diff(rec_offsets)
    has = counts > 0
    if np.any(has):
        seg_best = np.full(cam.height * cam.width, -1, dtype=np.int64)
        pix_of = np.repeat(np.arange(cam.height * cam.width), counts)
        order = np.lexsort((contrib, pix_of))
        # last entry per pixel after sorting by (pixel, contribution)
        ends = np.cumsum(counts[has]) - 1
        seg_best[has] = order[ends]
        best = seg_best[has]
        good = contrib[best] > 0.0
        rows = np.nonzero(has)[0][good]
        orient[rows] = payload[rec_idx[best[good]]]
        valid[rows] = True
    valid &= alpha.reshape(-1) >= settings.eps_alpha
    orient[~valid] = 0.0
    fb = FrameBuffer(width=cam.width, height=cam.height)
    fb.channels["alpha"] = alpha
    fb.channels["orientation"] = orient.reshape(cam.height, cam.width, 2)
    fb.channels["validity"] = valid.reshape(cam.height, cam.width).astype(np.float64)
    return fb


def synthesize_light_camera(
    light_pos: np.ndarray,
    center: np.ndarray,
    radius: float,
    resolution: int,
) -> CameraView:
    """Perspective view from the light covering the model bounding sphere."""
    light_pos = np.asarray(light_pos, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    dist = float(np.linalg.norm(center - light_pos))
    if dist <= radius:
        raise LightInsideModelError(
            f"light at distance {dist:.4g} lies inside bounding radius {radius:.4g}"
        )
    half_extent = np.tan(np.arcsin(min(radius / dist, 0.999))) * 1.05
    c = (resolution - 1) / 2.0
    f = c / half_extent
    return CameraView(
        fx=f,
        fy=f,
        cx=c,
        cy=c,
        width=resolution,
        height=resolution,
        world_to_camera=look_at(light_pos, center),
    )


def light_pass(
    model: HairModel,
    light_position: np.ndarray,
    settings: RasterSettings | None = None,
    update_model: bool = True,
) -> np.ndarray:
    """Per-Gaussian light transmittance tau from one point light.

    Returns tau for all Gaussians (hair first, then head). Runs without early
    stop so fully shadowed Gaussians receive their (near-zero) tau instead of
    keeping the default.
    """
    settings = settings or RasterSettings()
    center, radius = model.bounding_sphere()
    cam = synthesize_light_camera(
        light_position, center, radius, settings.light_resolution
    )
    light_settings = RasterSettings(**{**settings.to_dict(), "eps_t": 0.0})
    splats, hair_count = project_model(model, cam, light_settings)
    total = model.num_hair_gaussians + model.head.count
    tau = np.ones(total, dtype=np.float64)
    if splats.count:
        payload = np.zeros((splats.count, 1), dtype=np.float64)
        _, _, records = composite_splats(
            splats, payload, cam.width, cam.height, light_settings, record=True
        )
        _, rec_idx, _, rec_g, rec_t = records
        resp = rec_g > RESPONSIBILITY_THRESHOLD
        if np.any(resp):
            np.minimum.at(tau, splats.source_id[rec_idx[resp]], rec_t[resp])
    if update_model:
        n, m = model.num_strands, model.segments_per_strand
        model.tau = tau[: n * m].reshape(n, m)
        if model.head.count:
            model.head.tau = tau[n * m :]
    return tau
