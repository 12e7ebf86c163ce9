"""Analytic gradients through compositing, projection, covariance and the
strand chain.

The image losses differentiate the exact forward path (same kernels, same
records), so central finite differences on forward_loss reproduce these
gradients to first order. Hair roots and head Gaussians receive no gradient.

Layering:
  image_pass_grads   one view -> per-Gaussian d(mean3d), d(cov3d), d(alpha),
                     d(sh) for any flat Gaussian list
  cov_grad_to_pose   d(cov3d) -> quaternion/length gradients for cylinders
  backward           full chained-model assembly incl. smoothness terms
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ghair import backend, quaternion, sh
from ghair.camera import CameraView
from ghair.model import HairModel, sigmoid
from ghair.raster.composite import composite_splats, tile_bin, view_directions
from ghair.raster.project import ProjectedSplats, project_gaussians
from ghair.raster.settings import RasterSettings
from ghair.optim.losses import (
    LossWeights,
    loss_alpha_with_grad,
    loss_photometric_with_grad,
    loss_strand_smoothness,
)
from ghair.model import sh_band_count


@dataclass
class ViewTarget:
    cam: CameraView
    image: np.ndarray  # (H, W, 3) in [0, 1]
    alpha: np.ndarray  # (H, W) in [0, 1]


@dataclass
class GradBuffer:
    d_sh: np.ndarray  # (N, M, 3, K)
    d_opacity: np.ndarray  # (N, M) w.r.t. pre-sigmoid storage
    d_rotation: np.ndarray  # (N, M, 4) w.r.t. raw quaternion storage
    d_length: np.ndarray  # (N, M)

    def groups(self) -> dict[str, np.ndarray]:
        return {
            "sh": self.d_sh,
            "opacity": self.d_opacity,
            "rotation": self.d_rotation,
            "length": self.d_length,
        }


def _sym_from_packed_grad(packed: np.ndarray) -> np.ndarray:
    """Packed (a, b, c) gradient -> unconstrained-entry 2x2 matrix gradient."""
    g = np.empty(packed.shape[:-1] + (2, 2), dtype=np.float64)
    g[..., 0, 0] = packed[..., 0]
    g[..., 0, 1] = 0.5 * packed[..., 1]
    g[..., 1, 0] = 0.5 * packed[..., 1]
    g[..., 1, 1] = packed[..., 2]
    return g


def projection_backward(
    splats: ProjectedSplats,
    d_mean2d: np.ndarray,
    d_conic: np.ndarray,
    settings: RasterSettings,
):
    """Adjoint of project_gaussians for the surviving splats.

    Returns (d_mean3d, d_cov3d) in world coordinates, per splat.
    """
    cam = splats.cam
    k = splats.count
    t = splats.t_cam
    x, y, z = t[:, 0], t[:, 1], t[:, 2]
    fx, fy = cam.fx, cam.fy

    # conic -> cov2d (inverse chain): dM = -C G C
    g_conic = _sym_from_packed_grad(d_conic)
    conic_m = _sym_from_packed_grad(
        np.stack([splats.conic[:, 0], 2 * splats.conic[:, 1], splats.conic[:, 2]], -1)
    )
    d_cov2d = -np.einsum("kij,kjl,klm->kim", conic_m, g_conic, conic_m)

    # cov2d = J Sigma_cam J^T + eps I
    j = np.zeros((k, 2, 3), dtype=np.float64)
    j[:, 0, 0] = fx / z
    j[:, 0, 2] = -fx * x / (z * z)
    j[:, 1, 1] = fy / z
    j[:, 1, 2] = -fy * y / (z * z)
    d_cov_cam = np.einsum("kji,kjl,klm->kim", j, d_cov2d, j)
    d_j = 2.0 * np.einsum("kij,kjl,klm->kim", d_cov2d, j, splats.cov_cam)

    # J's dependence on the camera-space mean
    d_t = np.zeros((k, 3), dtype=np.float64)
    d_t[:, 0] += d_j[:, 0, 2] * (-fx / (z * z))
    d_t[:, 1] += d_j[:, 1, 2] * (-fy / (z * z))
    d_t[:, 2] += (
        d_j[:, 0, 0] * (-fx / (z * z))
        + d_j[:, 1, 1] * (-fy / (z * z))
        + d_j[:, 0, 2] * (2 * fx * x / (z * z * z))
        + d_j[:, 1, 2] * (2 * fy * y / (z * z * z))
    )

    # pinhole mean projection
    d_t[:, 0] += d_mean2d[:, 0] * fx / z
    d_t[:, 1] += d_mean2d[:, 1] * fy / z
    d_t[:, 2] += -d_mean2d[:, 0] * fx * x / (z * z) - d_mean2d[:, 1] * fy * y / (z * z)

    r = cam.rotation
    d_mean3d = d_t @ r
    d_cov3d = np.einsum("ji,kjl,lm->kim", r, d_cov_cam, r)
    return d_mean3d, d_cov3d


def image_pass_grads(
    means: np.ndarray,
    covs: np.ndarray,
    opacities_pre: np.ndarray,
    sh_coeffs: np.ndarray,
    sh_degree: int,
    view: ViewTarget,
    weights: LossWeights,
    settings: RasterSettings,
    trainable_mask: np.ndarray | None = None,
):
    """Photometric + alpha losses and their per-Gaussian gradients for one view.

    Returns (loss, d_mean3d, d_cov3d, d_opacity_pre, d_sh) over the full
    pre-cull Gaussian list; culled Gaussians keep zeros.
    """
    cam = view.cam
    n_gauss = means.shape[0]
    splats = project_gaussians(means, covs, opacities_pre, cam, settings)
    sel = splats.source_id
    dirs = view_directions(means[sel], cam)
    color, basis, active = sh.eval_color_with_grads(sh_coeffs[sel], dirs, sh_degree)
    out_color, out_alpha, records = composite_splats(
        splats, color, cam.width, cam.height, settings, record=True
    )

    loss_pho, d_img = loss_photometric_with_grad(out_color, view.image, weights)
    loss_alp, d_alp_img = loss_alpha_with_grad(out_alpha, view.alpha)
    loss = loss_pho + weights.w_alp * loss_alp
    d_alp_img = weights.w_alp * d_alp_img

    kern = backend.get_kernels()
    d_payload, d_alpha_eff, d_mean2d, d_conic = kern.backward(
        cam.height,
        cam.width,
        records,
        np.ascontiguousarray(d_img),
        np.ascontiguousarray(d_alp_img),
        splats.count,
        splats.opacity,
        color,
        splats.mean2d,
        splats.conic,
    )

    d_mean_s, d_cov_s = projection_backward(splats, d_mean2d, d_conic, settings)

    # payload chain: SH coefficients and the view-direction term
    d_payload = d_payload * active  # zero-clamp mask
    d_sh_s = basis[:, None, :] * d_payload[:, :, None]  # (K, 3, B)
    bgrad = sh.basis_grad(dirs, sh_degree)  # (K, B, 3)
    d_dir = np.einsum("kc,kcb,kbx->kx", d_payload, sh_coeffs[sel], bgrad)
    r = np.linalg.norm(means[sel] - cam.position, axis=1, keepdims=True)
    proj = d_dir - dirs * np.sum(dirs * d_dir, axis=1, keepdims=True)
    d_mean_s = d_mean_s + proj / r

    # alpha: effective = min(sigmoid(pre), alpha_max)
    s_pre = sigmoid(opacities_pre[sel])
    gate = (s_pre < settings.alpha_max) | (settings.alpha_max >= 1.0)
    d_pre_s = d_alpha_eff * s_pre * (1.0 - s_pre) * gate

    d_mean3d = np.zeros((n_gauss, 3), dtype=np.float64)
    d_cov3d = np.zeros((n_gauss, 3, 3), dtype=np.float64)
    d_opacity_pre = np.zeros(n_gauss, dtype=np.float64)
    d_sh = np.zeros_like(sh_coeffs)
    np.add.at(d_mean3d, sel, d_mean_s)
    np.add.at(d_cov3d, sel, d_cov_s)
    np.add.at(d_opacity_pre, sel, d_pre_s)
    np.add.at(d_sh, sel, d_sh_s)
    if trainable_mask is not None:
        d_mean3d[~trainable_mask] = 0.0
        d_cov3d[~trainable_mask] = 0.0
        d_opacity_pre[~trainable_mask] = 0.0
        d_sh[~trainable_mask] = 0.0
    return loss, d_mean3d, d_cov3d, d_opacity_pre, d_sh


def cov_grad_to_pose(
    d_cov3d: np.ndarray,
    quats_raw: np.ndarray,
    lengths: np.ndarray,
    diameter: float,
):
    """Route covariance gradients to raw quaternions and lengths.

    Sigma = R diag(d^2, d^2, s^2) R^T with R from the normalized quaternion.
    """
    q_hat = quaternion.normalize(quats_raw)
    r = quaternion.to_matrix(q_hat)
    m = np.zeros(lengths.shape + (3, 3), dtype=np.float64)
    m[..., 0, 0] = diameter * diameter
    m[..., 1, 1] = diameter * diameter
    m[..., 2, 2] = lengths * lengths

    d_r = 2.0 * np.einsum("...ij,...jk,...kl->...il", d_cov3d, r, m)
    rtdr = np.einsum("...ji,...jk,...kl->...il", r, d_cov3d, r)
    d_len = 2.0 * lengths * rtdr[..., 2, 2]

    mg = quaternion.matrix_grad(q_hat)  # (..., 4, 3, 3)
    d_qhat = np.einsum("...kij,...ij->...k", mg, d_r)
    ng = quaternion.normalize_grad(quats_raw)  # (..., 4, 4)
    d_qraw = np.einsum("...ij,...i->...j", ng, d_qhat)
    return d_qraw, d_len


def direction_grad_to_quat(d_dir: np.ndarray, quats_raw: np.ndarray) -> np.ndarray:
    """Route tangent-direction gradients to raw quaternions."""
    q_hat = quaternion.normalize(quats_raw)
    zg = quaternion.z_axis_grad(q_hat)  # (..., 3, 4)
    d_qhat = np.einsum("...ik,...i->...k", zg, d_dir)
    ng = quaternion.normalize_grad(quats_raw)
    return np.einsum("...ij,...i->...j", ng, d_qhat)


def smoothness_backward(model: HairModel, weights: LossWeights):
    """Values and parameter gradients of the per-strand smoothness terms."""
    n, m = model.num_strands, model.segments_per_strand
    d_pre = np.zeros((n, m), dtype=np.float64)
    d_len = np.zeros((n, m), dtype=np.float64)
    d_dir = np.zeros((n, m, 3), dtype=np.float64)
    opa, pam = loss_strand_smoothness(model)
    if m >= 2:
        alpha = sigmoid(model.opacities)
        d1 = np.diff(alpha, axis=1)
        g_alpha = np.zeros_like(alpha)
        s1 = np.sign(d1)
        g_alpha[:, 1:] += 0.5 * weights.w_opa * s1
        g_alpha[:, :-1] -= 0.5 * weights.w_opa * s1
        if d1.shape[1] > 1:
            s2 = np.sign(np.diff(d1, axis=1))
            g_d1 = np.zeros_like(d1)
            g_d1[:, 1:] += 0.5 * weights.w_opa * s2
            g_d1[:, :-1] -= 0.5 * weights.w_opa * s2
            g_alpha[:, 1:] += g_d1
            g_alpha[:, :-1] -= g_d1
        d_pre += g_alpha * alpha * (1.0 - alpha)

        dirs = model.directions()
        sd = np.sign(np.diff(dirs, axis=1))
        d_dir[:, 1:] += weights.w_pam * sd
        d_dir[:, :-1] -= weights.w_pam * sd
        sl = np.sign(np.diff(model.lengths, axis=1))
        d_len[:, 1:] += weights.w_pam * sl
        d_len[:, :-1] -= weights.w_pam * sl
    value = weights.w_opa * opa + weights.w_pam * pam
    return value, d_pre, d_len, d_dir


def _gather_flat(model: HairModel):
    from ghair.raster.project import gather_model_gaussians

    return gather_model_gaussians(model)


def forward_loss(
    model: HairModel,
    views: list[ViewTarget],
    weights: LossWeights,
    settings: RasterSettings,
) -> float:
    """The exact scalar objective backward() differentiates."""
    from ghair.optim.losses import loss_alpha, loss_photometric
    from ghair.raster.composite import composite_pass

    total = 0.0
    for view in views:
        fb = composite_pass(model, view.cam, "sh_color", settings)
        total += loss_photometric(fb.color, view.image, weights)
        total += weights.w_alp * loss_alpha(fb.alpha, view.alpha)
    value, _, _, _ = smoothness_backward(model, weights)
    return total + value


def backward(
    model: HairModel,
    views: list[ViewTarget],
    weights: LossWeights,
    settings: RasterSettings | None = None,
) -> tuple[float, GradBuffer]:
    """Total loss over the view batch plus analytic parameter gradients."""
    settings = settings or RasterSettings()
    n, m = model.num_strands, model.segments_per_strand
    k = sh_band_count(model.sh_degree)
    hair_count = n * m

    means, covs, ops, _ = _gather_flat(model)
    all_sh = model.sh.reshape(hair_count, 3, k)
    if model.head.count:
        all_sh = np.concatenate([all_sh, model.head.sh], axis=0)
    trainable = np.zeros(means.shape[0], dtype=bool)
    trainable[:hair_count] = True

    total = 0.0
    d_mean = np.zeros((means.shape[0], 3))
    d_cov = np.zeros((means.shape[0], 3, 3))
    d_pre = np.zeros(means.shape[0])
    d_sh_flat = np.zeros_like(all_sh)
    for view in views:
        loss_v, dm, dc, dp, dsh = image_pass_grads(
            means, covs, ops, all_sh, model.sh_degree, view, weights, settings, trainable
        )
        total += loss_v
        d_mean += dm
        d_cov += dc
        d_pre += dp
        d_sh_flat += dsh

    # hair-only views of the flat buffers
    d_mean_h = d_mean[:hair_count].reshape(n, m, 3)
    d_cov_h = d_cov[:hair_count].reshape(n, m, 3, 3)

    sm_value, sm_pre, sm_len, sm_dir = smoothness_backward(model, weights)
    total += sm_value

    # chain rule: center mu_j = root + sum_{i<j} s_i dir_i + s_j dir_j / 2
    suffix = np.cumsum(d_mean_h[:, ::-1, :], axis=1)[:, ::-1, :]
    coef = suffix - 0.5 * d_mean_h
    dirs = model.directions()
    d_len = np.einsum("nmx,nmx->nm", dirs, coef) + sm_len
    d_dir = model.lengths[..., None] * coef + sm_dir

    d_q_cov, d_len_cov = cov_grad_to_pose(
        d_cov_h, model.rotations, model.lengths, model.diameter
    )
    d_len += d_len_cov
    d_rot = d_q_cov + direction_grad_to_quat(d_dir, model.rotations)

    grads = GradBuffer(
        d_sh=d_sh_flat[:hair_count].reshape(n, m, 3, k),
        d_opacity=d_pre[:hair_count].reshape(n, m) + sm_pre,
        d_rotation=d_rot,
        d_length=d_len,
    )
    return total, grads
