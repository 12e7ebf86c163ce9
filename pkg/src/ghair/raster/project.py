"""EWA-style projection of 3D Gaussians to 2D splats.

The projected covariance is J W Sigma W^T J^T restricted to the image plane,
dilated by an isotropic floor. Everything needed by the backward pass
(camera-space means, Jacobians, camera-space covariances, the survivor
index map) is retained on the returned ProjectedSplats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ghair.camera import CameraView
from ghair.model import HairModel, batch_covariance, sigmoid
from ghair.raster.settings import RasterSettings


@dataclass
class ProjectedSplats:
    """Depth-sorted visible splats plus retained projection intermediates."""

    mean2d: np.ndarray  # (K, 2)
    cov2d: np.ndarray  # (K, 3) packed (a, b, c) of [[a, b], [b, c]]
    conic: np.ndarray  # (K, 3) packed inverse
    depth: np.ndarray  # (K,) camera z
    opacity: np.ndarray  # (K,) effective alpha in (0, alpha_max]
    radius: np.ndarray  # (K,) binning radius in pixels
    source_id: np.ndarray  # (K,) index into the pre-cull Gaussian list
    t_cam: np.ndarray  # (K, 3) camera-space means
    cov_cam: np.ndarray  # (K, 3, 3)
    cam: CameraView

    @property
    def count(self) -> int:
        return self.mean2d.shape[0]


def _pack_sym2(m: np.ndarray) -> np.ndarray:
    return np.stack([m[..., 0, 0], m[..., 0, 1], m[..., 1, 1]], axis=-1)


def invert_sym2(packed: np.ndarray) -> np.ndarray:
    """Closed-form inverse of packed 2x2 symmetric matrices."""
    a, b, c = packed[..., 0], packed[..., 1], packed[..., 2]
    det = a * c - b * b
    if np.any(det <= 0):
        raise ValueError("projected covariance not positive definite")
    return np.stack([c / det, -b / det, a / det], axis=-1)


def projection_jacobian(t_cam: np.ndarray, fx: float, fy: float) -> np.ndarray:
    """Affine approximation of the pinhole projection at camera points (K, 3) -> (K, 2, 3)."""
    x, y, z = t_cam[..., 0], t_cam[..., 1], t_cam[..., 2]
    j = np.zeros(t_cam.shape[:-1] + (2, 3), dtype=np.float64)
    j[..., 0, 0] = fx / z
    j[..., 0, 2] = -fx * x / (z * z)
    j[..., 1, 1] = fy / z
    j[..., 1, 2] = -fy * y / (z * z)
    return j


def project_gaussians(
    means: np.ndarray,
    covs: np.ndarray,
    opacities_pre: np.ndarray,
    cam: CameraView,
    settings: RasterSettings,
) -> ProjectedSplats:
    """Project world-space Gaussians, cull, and depth-sort the survivors.

    Culling drops splats behind the near plane or whose cull_sigma extent
    misses the image entirely.
    """
    means = np.asarray(means, dtype=np.float64)
    covs = np.asarray(covs, dtype=np.float64)
    k = means.shape[0]
    t = cam.to_camera(means)
    in_front = t[:, 2] > settings.z_near

    idx = np.nonzero(in_front)[0]
    t = t[idx]
    j = projection_jacobian(t, cam.fx, cam.fy)
    r = cam.rotation
    cov_cam = np.einsum("ij,kjl,ml->kim", r, covs[idx], r)
    cov2d_m = np.einsum("kij,kjl,kml->kim", j, cov_cam, j)
    cov2d = _pack_sym2(cov2d_m)
    cov2d[:, 0] += settings.eps_cov
    cov2d[:, 2] += settings.eps_cov

    mean2d = np.stack(
        [cam.fx * t[:, 0] / t[:, 2] + cam.cx, cam.fy * t[:, 1] / t[:, 2] + cam.cy],
        axis=-1,
    )

    # max eigenvalue of [[a,b],[b,c]] gives the extent scale
    a, b, c = cov2d[:, 0], cov2d[:, 1], cov2d[:, 2]
    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - (a * c - b * b), 0.0))
    sigma = np.sqrt(lam_max)

    cull_r = settings.cull_sigma * sigma
    on_image = (
        (mean2d[:, 0] + cull_r >= 0)
        & (mean2d[:, 0] - cull_r <= cam.width - 1)
        & (mean2d[:, 1] + cull_r >= 0)
        & (mean2d[:, 1] - cull_r <= cam.height - 1)
    )

    sel = np.nonzero(on_image)[0]
    order = sel[np.argsort(t[sel, 2], kind="stable")]

    op = sigmoid(np.asarray(opacities_pre, dtype=np.float64)[idx[order]])
    if settings.alpha_max < 1.0:
        op = np.minimum(op, settings.alpha_max)

    return ProjectedSplats(
        mean2d=mean2d[order],
        cov2d=cov2d[order],
        conic=invert_sym2(cov2d[order]),
        depth=t[order, 2],
        opacity=op,
        radius=settings.bin_sigma * sigma[order],
        source_id=idx[order].astype(np.int64),
        t_cam=t[order],
        cov_cam=cov_cam[order],
        cam=cam,
    )


def gather_model_gaussians(model: HairModel):
    """Flatten hair + head Gaussians into (means, covs, opacities_pre, meta).

    Hair Gaussians come first in strand-major order; meta describes the split
    so gradients and tau updates can be routed back.
    """
    n, m = model.num_strands, model.segments_per_strand
    hair_count = n * m
    centers = model.centers().reshape(-1, 3)
    hair_covs = batch_covariance(
        model.rotations.reshape(-1, 4), model.lengths.reshape(-1), model.diameter
    )
    hair_ops = model.opacities.reshape(-1)

    head = model.head
    if head.count:
        from ghair import quaternion

        r = quaternion.to_matrix(quaternion.normalize(head.rotations))
        s2 = np.zeros((head.count, 3, 3))
        s2[:, 0, 0] = head.scales[:, 0] ** 2
        s2[:, 1, 1] = head.scales[:, 1] ** 2
        s2[:, 2, 2] = head.scales[:, 2] ** 2
        head_covs = np.einsum("kij,kjl,kml->kim", r, s2, r)
        means = np.concatenate([centers, head.means], axis=0)
        covs = np.concatenate([hair_covs, head_covs], axis=0)
        ops = np.concatenate([hair_ops, head.opacities])
    else:
        means, covs, ops = centers, hair_covs, hair_ops
    return means, covs, ops, hair_count


def project_model(
    model: HairModel, cam: CameraView, settings: RasterSettings
) -> tuple[ProjectedSplats, int]:
    """Project all model Gaussians; returns (splats, hair_count)."""
    means, covs, ops, hair_count = gather_model_gaussians(model)
    return project_gaussians(means, covs, ops, cam, settings), hair_count
