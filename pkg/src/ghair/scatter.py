"""Fiber scattering: longitudinal/azimuthal factorized lobes plus a
transmittance-weighted local compensation term.

The three scattering paths (surface reflection R, double transmission TT,
transmission-internal-reflection-transmission TRT) are evaluated as
S = sum_t gain_t * M_t(theta_h) * N_t(theta_d, phi). Closed forms are the
real-time approximation documented in docs/scattering.md: unit-height
Gaussian longitudinal lobes whose widths derive from roughness and whose
centers shift with the specular shift parameter, and azimuthal terms built
from a Schlick Fresnel with base-color absorption on the transmission paths.

Radiance per Gaussian combines the fiber term and the local term, each
attenuated by per-light transmittance tau from the light pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ghair import sh
from ghair.model import ScatterParams

INV_4PI = 1.0 / (4.0 * np.pi)
# Rec.709 relative luminance coefficients
LUMA = np.array([0.2126, 0.7152, 0.0722])
# shift multipliers per lobe (R, TT, TRT); TRT carries the largest shift
SHIFT_SCALE = (-2.0, 1.0, 4.0)
PARALLEL_EPS = 1e-9
_MIN_COS_THETA_D = 1e-4
_MIN_ROUGHNESS = 1.0 / 255.0


class DegenerateDirectionError(ValueError):
    """View direction parallel to the fiber tangent."""


@dataclass
class LightSource:
    position: np.ndarray  # (3,)
    intensity: np.ndarray  # (3,) RGB, >= 0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.intensity = np.asarray(self.intensity, dtype=np.float64)
        if not np.all(np.isfinite(self.intensity)):
            raise ValueError("light intensity must be finite")


def read_lights(path) -> list[LightSource]:
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise ValueError("lights file must hold a JSON array")
    return [LightSource(position=e["position"], intensity=e["intensity"]) for e in data]


def write_lights(path, lights: list[LightSource]) -> None:
    data = [
        {"position": [float(v) for v in l.position], "intensity": [float(v) for v in l.intensity]}
        for l in lights
    ]
    with open(path, "w") as f:
        json.dump(data, f, indent=2)


@dataclass
class FiberAngles:
    theta_i: np.ndarray
    theta_o: np.ndarray
    phi: np.ndarray  # relative azimuth phi_o - phi_i, wrapped to (-pi, pi]
    theta_h: np.ndarray
    theta_d: np.ndarray


def _fiber_frame(d: np.ndarray):
    """Deterministic (v, w) axes spanning the plane perpendicular to d.

    v is the rejection of world +z from d; when d is (anti)parallel to +z the
    rejection of world +x is used instead.
    """
    d = np.asarray(d, dtype=np.float64)
    up = np.zeros_like(d)
    up[..., 2] = 1.0
    v = up - d * (d[..., 2:3])
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    fallback = np.zeros_like(d)
    fallback[..., 0] = 1.0
    alt = fallback - d * d[..., 0:1]
    alt_n = np.linalg.norm(alt, axis=-1, keepdims=True)
    use_alt = n < 1e-6
    v = np.where(use_alt, alt / np.maximum(alt_n, 1e-30), v / np.maximum(n, 1e-30))
    w = np.cross(d, v)
    return v, w


def wrap_angle(phi: np.ndarray) -> np.ndarray:
    """Wrap to (-pi, pi]."""
    out = np.mod(np.asarray(phi, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


def fiber_angles(d: np.ndarray, wi: np.ndarray, wo: np.ndarray) -> FiberAngles:
    """Longitudinal and azimuthal angles of wi/wo about the fiber axis d."""
    d = np.asarray(d, dtype=np.float64)
    wi = np.asarray(wi, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    theta_i = np.arcsin(np.clip(np.sum(wi * d, axis=-1), -1.0, 1.0))
    theta_o = np.arcsin(np.clip(np.sum(wo * d, axis=-1), -1.0, 1.0))
    v, w = _fiber_frame(d)
    phi_i = np.arctan2(np.sum(wi * w, axis=-1), np.sum(wi * v, axis=-1))
    phi_o = np.arctan2(np.sum(wo * w, axis=-1), np.sum(wo * v, axis=-1))
    phi = wrap_angle(phi_o - phi_i)
    return FiberAngles(
        theta_i=theta_i,
        theta_o=theta_o,
        phi=phi,
        theta_h=0.5 * (theta_i + theta_o),
        theta_d=0.5 * (theta_i - theta_o),
    )


def _fresnel(cos_t, eta):
    f0 = ((1.0 - eta) / (1.0 + eta)) ** 2
    c = np.clip(cos_t, 0.0, 1.0)
    return f0 + (1.0 - f0) * (1.0 - c) ** 5


def longitudinal_lobes(theta_h, params: ScatterParams):
    """Unit-height Gaussian lobes (M_R, M_TT, M_TRT) at theta_h."""
    r = max(params.roughness, _MIN_ROUGHNESS)
    widths = (r * r, r * r / 2.0, 2.0 * r * r)
    out = []
    for scale, width in zip(SHIFT_SCALE, widths):
        center = scale * params.shift
        x = (np.asarray(theta_h, dtype=np.float64) - center) / width
        out.append(np.exp(-0.5 * x * x))
    return out


def _pow_color(b, e):
    """Channelwise b**e with the zero-channel convention 0**e = 0 for e > 0."""
    b = np.asarray(b, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    return np.where(b > 0.0, np.power(np.maximum(b, 1e-300), e), np.where(e == 0.0, 1.0, 0.0))


def bsdf(angles: FiberAngles, params: ScatterParams, base_color: np.ndarray) -> np.ndarray:
    """Fiber scattering S(wi, wo) as RGB; nonnegative and finite everywhere."""
    base_color = np.asarray(base_color, dtype=np.float64)
    m_r, m_tt, m_trt = longitudinal_lobes(angles.theta_h, params)

    cos_td = np.maximum(np.cos(angles.theta_d), _MIN_COS_THETA_D)
    cos_phi = np.cos(angles.phi)
    cos_half_phi = np.sqrt(np.clip(0.5 + 0.5 * cos_phi, 0.0, 1.0))
    sin_ti = np.sin(angles.theta_i)
    sin_to = np.sin(angles.theta_o)
    cos_ti = np.cos(angles.theta_i)
    cos_to = np.cos(angles.theta_o)
    cos_io = sin_ti * sin_to + cos_ti * cos_to * cos_phi

    # R: achromatic Fresnel-weighted surface reflection
    n_r = 0.25 * cos_half_phi * _fresnel(np.sqrt(np.clip(0.5 + 0.5 * cos_io, 0.0, 1.0)), params.eta)

    # modified index for inclined incidence
    eta_prime = np.sqrt(np.maximum(params.eta**2 - np.sin(angles.theta_d) ** 2, 1e-12)) / cos_td
    a = 1.0 / eta_prime

    # TT: double transmission with absorption along the chord
    h_tt = cos_half_phi * (1.0 + a * (0.6 - 0.8 * cos_phi))
    f_tt = _fresnel(cos_td * np.sqrt(np.clip(1.0 - h_tt * h_tt, 0.0, 1.0)), params.eta)
    atten_tt = (1.0 - f_tt) ** 2
    exp_tt = 0.5 * np.sqrt(np.clip(1.0 - (h_tt * a) ** 2, 0.0, 1.0)) / cos_td
    dist_tt = np.exp(-3.65 * cos_phi - 3.98)
    n_tt = atten_tt * dist_tt

    # TRT: one internal bounce, longer absorption path
    f_trt = _fresnel(0.5 * cos_td, params.eta)
    atten_trt = (1.0 - f_trt) ** 2 * f_trt
    exp_trt = 0.8 / cos_td
    dist_trt = np.exp(17.0 * cos_phi - 16.78)
    n_trt = atten_trt * dist_trt

    scalar = params.gain_r * m_r * n_r
    tt = params.gain_tt * m_tt * n_tt
    trt = params.gain_trt * m_trt * n_trt
    out = (
        scalar[..., None]
        + tt[..., None] * _pow_color(base_color, exp_tt[..., None])
        + trt[..., None] * _pow_color(base_color, exp_trt[..., None])
    )
    return out


def pseudo_normal(d: np.ndarray, wo: np.ndarray) -> np.ndarray:
    """Unit normal surrogate: view direction with its tangential part removed."""
    d = np.asarray(d, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    dot = np.sum(d * wo, axis=-1, keepdims=True)
    if np.any(np.abs(dot) >= 1.0 - PARALLEL_EPS):
        raise DegenerateDirectionError("view direction parallel to fiber tangent")
    n = wo - d * dot
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def relative_luminance(color: np.ndarray) -> np.ndarray:
    return np.sum(np.asarray(color, dtype=np.float64) * LUMA, axis=-1)


def local_scatter(
    base_color: np.ndarray, n: np.ndarray, wi: np.ndarray, tau
) -> np.ndarray:
    """Diffuse-like multiple-bounce compensation term.

    sqrt(b) * (n.wi + 1) / (4 pi) * (b / luminance(b))^tau, channelwise; a
    zero-luminance base color yields exactly zero.
    """
    b = np.asarray(base_color, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    lum = relative_luminance(b)
    ndl = np.sum(np.asarray(n, dtype=np.float64) * np.asarray(wi, dtype=np.float64), axis=-1)
    geom = (ndl + 1.0) * INV_4PI
    safe_lum = np.where(lum > 0.0, lum, 1.0)
    ratio = b / safe_lum[..., None]
    power = _pow_color_ratio(ratio, tau[..., None] if tau.ndim < b.ndim else tau)
    out = np.sqrt(b) * geom[..., None] * power
    return np.where(lum[..., None] > 0.0, out, 0.0)


def _pow_color_ratio(ratio, tau):
    # numpy already gives 0**positive = 0 and anything**0 = 1, which matches
    # the zero-channel limit convention
    return np.power(np.asarray(ratio, dtype=np.float64), np.asarray(tau, dtype=np.float64))


def shade_points(
    centers: np.ndarray,  # (G, 3)
    directions: np.ndarray,  # (G, 3) unit fiber tangents
    base_colors: np.ndarray,  # (G, 3) in [0, 1]
    wo: np.ndarray,  # (G, 3) unit directions toward the viewer
    lights: list[LightSource],
    params: ScatterParams,
    taus: np.ndarray,  # (num_lights, G) per-light transmittance
) -> np.ndarray:
    """Outgoing radiance of each fiber Gaussian under point lights.

    L_o = sum_k (S + S_local) * tau_k * intensity_k. Lights whose direction is
    parallel to a fiber skip only that fiber's local term.
    """
    g = centers.shape[0]
    out = np.zeros((g, 3), dtype=np.float64)
    dot = np.sum(directions * wo, axis=-1, keepdims=True)
    perp = wo - directions * dot
    perp_n = np.linalg.norm(perp, axis=-1, keepdims=True)
    n_ok = perp_n[:, 0] > PARALLEL_EPS
    normal = np.where(n_ok[:, None], perp / np.maximum(perp_n, 1e-30), 0.0)
    for k, light in enumerate(lights):
        to_light = light.position - centers
        dist = np.linalg.norm(to_light, axis=-1, keepdims=True)
        wi = to_light / np.maximum(dist, 1e-30)
        angles = fiber_angles(directions, wi, wo)
        s = bsdf(angles, params, base_colors)
        s_local = local_scatter(base_colors, normal, wi, taus[k])
        s_local = np.where(n_ok[:, None], s_local, 0.0)
        out += (s + s_local) * taus[k][:, None] * light.intensity[None, :]
    return out


def shade_gaussian(
    g,
    wo: np.ndarray,
    lights: list[LightSource],
    params: ScatterParams,
    center: np.ndarray = (0.0, 0.0, 0.0),
    taus: np.ndarray | None = None,
) -> np.ndarray:
    """Radiance of a single segment Gaussian (see shade_points for batches).

    taus holds one transmittance per light; defaults to the segment's cached
    value for every light.
    """
    center = np.asarray(center, dtype=np.float64)
    if taus is None:
        taus = np.full(len(lights), g.tau, dtype=np.float64)
    base = sh.dc_color(g.sh[:, 0])
    out = shade_points(
        centers=center[None, :],
        directions=g.direction[None, :],
        base_colors=base[None, :],
        wo=np.asarray(wo, dtype=np.float64)[None, :],
        lights=lights,
        params=params,
        taus=np.asarray(taus, dtype=np.float64)[:, None],
    )
    return out[0]
