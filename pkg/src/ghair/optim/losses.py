"""Training losses.

Image losses return plain floats; the *_with_grad variants also return the
gradient with respect to the rendered input, which backward() routes through
the rasterizer adjoint. Strand smoothness terms operate directly on model
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ghair.model import HairModel, sigmoid
from ghair.optim import ssim as ssim_mod


@dataclass
class LossWeights:
    w_l1: float = 0.8
    w_dssim: float = 0.2
    w_ori: float = 0.1
    w_alp: float = 0.1
    w_opa: float = 0.01
    w_pam: float = 0.01
    w_geo_pos: float = 1.0
    w_geo_dir: float = 0.1

    def validate(self) -> "LossWeights":
        for f in self.__dataclass_fields__:
            v = getattr(self, f)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"loss weight {f} must be finite and >= 0, got {v}")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        known = {f: float(d[f]) for f in cls.__dataclass_fields__ if f in d}
        return cls(**known).validate()

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def loss_photometric(rendered: np.ndarray, gt: np.ndarray, weights: LossWeights) -> float:
    rendered = np.asarray(rendered, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(rendered, gt)
    l1 = float(np.mean(np.abs(rendered - gt)))
    dssim = (1.0 - ssim_mod.ssim(rendered, gt)) / 2.0
    return weights.w_l1 * l1 + weights.w_dssim * dssim


def loss_photometric_with_grad(rendered: np.ndarray, gt: np.ndarray, weights: LossWeights):
    rendered = np.asarray(rendered, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(rendered, gt)
    diff = rendered - gt
    l1 = float(np.mean(np.abs(diff)))
    g = weights.w_l1 * np.sign(diff) / diff.size
    if weights.w_dssim:
        s, gs = ssim_mod.ssim_with_grad(rendered, gt)
        value = weights.w_l1 * l1 + weights.w_dssim * (1.0 - s) / 2.0
        g = g - (weights.w_dssim / 2.0) * gs
    else:
        value = weights.w_l1 * l1
    return value, g


def loss_alpha(alpha_rendered: np.ndarray, alpha_gt: np.ndarray) -> float:
    alpha_rendered = np.asarray(alpha_rendered, dtype=np.float64)
    alpha_gt = np.asarray(alpha_gt, dtype=np.float64)
    _check_same_shape(alpha_rendered, alpha_gt)
    return float(np.sum(np.abs(alpha_gt - alpha_rendered)))


def loss_alpha_with_grad(alpha_rendered: np.ndarray, alpha_gt: np.ndarray):
    value = loss_alpha(alpha_rendered, alpha_gt)
    return value, np.sign(alpha_rendered - alpha_gt)


def loss_orientation(
    rendered_ori: np.ndarray, gt_ori: np.ndarray, validity: np.ndarray
) -> float:
    """Sum over valid pixels of 1 - |rendered . gt| (orientation is
    180-degree ambiguous, hence the absolute value)."""
    rendered_ori = np.asarray(rendered_ori, dtype=np.float64)
    gt_ori = np.asarray(gt_ori, dtype=np.float64)
    mask = np.asarray(validity, dtype=bool)
    dots = np.abs(np.sum(rendered_ori * gt_ori, axis=-1))
    return float(np.sum((1.0 - dots)[mask]))


def loss_orientation_with_grad(rendered_ori, gt_ori, validity):
    rendered_ori = np.asarray(rendered_ori, dtype=np.float64)
    gt_ori = np.asarray(gt_ori, dtype=np.float64)
    mask = np.asarray(validity, dtype=bool)
    dots = np.sum(rendered_ori * gt_ori, axis=-1)
    value = float(np.sum((1.0 - np.abs(dots))[mask]))
    grad = -np.sign(dots)[..., None] * gt_ori
    grad[~mask] = 0.0
    return value, grad


def loss_strand_smoothness(model: HairModel) -> tuple[float, float]:
    """(opacity smoothness, pose smoothness) along each strand.

    Opacity: half the summed first and second absolute differences of the
    post-sigmoid opacities. Pose: summed 1-norm of adjacent tangent
    differences plus absolute adjacent length differences.
    """
    if model.segments_per_strand < 2:
        return 0.0, 0.0
    alpha = sigmoid(model.opacities)
    d1 = np.diff(alpha, axis=1)
    opa = 0.5 * (np.abs(d1).sum() + (np.abs(np.diff(d1, axis=1)).sum() if d1.shape[1] > 1 else 0.0))
    dirs = model.directions()
    pam = float(
        np.abs(np.diff(dirs, axis=1)).sum() + np.abs(np.diff(model.lengths, axis=1)).sum()
    )
    return float(opa), pam
