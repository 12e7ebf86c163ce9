"""Real spherical harmonics color evaluation, degrees 0..3.

Colors follow the splatting convention: the DC band is offset by +0.5 and the
result is clamped at zero. Gradients are provided both for the coefficients
and for the (unit) view direction, so geometry parameters receive the
view-dependence term during backprop.
"""

from __future__ import annotations

import numpy as np

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)


def basis(dirs: np.ndarray, degree: int) -> np.ndarray:
    """SH basis values for unit directions (..., 3) -> (..., (degree+1)^2)."""
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    out = np.empty(dirs.shape[:-1] + ((degree + 1) ** 2,), dtype=np.float64)
    out[..., 0] = C0
    if degree >= 1:
        out[..., 1] = -C1 * y
        out[..., 2] = C1 * z
        out[..., 3] = -C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 4] = C2[0] * x * y
        out[..., 5] = C2[1] * y * z
        out[..., 6] = C2[2] * (2 * zz - xx - yy)
        out[..., 7] = C2[3] * x * z
        out[..., 8] = C2[4] * (xx - yy)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 9] = C3[0] * y * (3 * xx - yy)
        out[..., 10] = C3[1] * x * y * z
        out[..., 11] = C3[2] * y * (4 * zz - xx - yy)
        out[..., 12] = C3[3] * z * (2 * zz - 3 * xx - 3 * yy)
        out[..., 13] = C3[4] * x * (4 * zz - xx - yy)
        out[..., 14] = C3[5] * z * (xx - yy)
        out[..., 15] = C3[6] * x * (xx - yy)
    return out


def basis_grad(dirs: np.ndarray, degree: int) -> np.ndarray:
    """d basis / d direction, (..., (degree+1)^2, 3)."""
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    zero = np.zeros_like(x)
    k = (degree + 1) ** 2
    g = np.zeros(dirs.shape[:-1] + (k, 3), dtype=np.float64)
    if degree >= 1:
        g[..., 1, 1] = -C1
        g[..., 2, 2] = C1
        g[..., 3, 0] = -C1
    if degree >= 2:
        g[..., 4, 0] = C2[0] * y
        g[..., 4, 1] = C2[0] * x
        g[..., 5, 1] = C2[1] * z
        g[..., 5, 2] = C2[1] * y
        g[..., 6, 0] = C2[2] * (-2 * x)
        g[..., 6, 1] = C2[2] * (-2 * y)
        g[..., 6, 2] = C2[2] * (4 * z)
        g[..., 7, 0] = C2[3] * z
        g[..., 7, 2] = C2[3] * x
        g[..., 8, 0] = C2[4] * (2 * x)
        g[..., 8, 1] = C2[4] * (-2 * y)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        g[..., 9, 0] = C3[0] * 6 * x * y
        g[..., 9, 1] = C3[0] * (3 * xx - 3 * yy)
        g[..., 9, 2] = zero
        g[..., 10, 0] = C3[1] * y * z
        g[..., 10, 1] = C3[1] * x * z
        g[..., 10, 2] = C3[1] * x * y
        g[..., 11, 0] = C3[2] * (-2 * x * y)
        g[..., 11, 1] = C3[2] * (4 * zz - xx - 3 * yy)
        g[..., 11, 2] = C3[2] * (8 * y * z)
        g[..., 12, 0] = C3[3] * (-6 * x * z)
        g[..., 12, 1] = C3[3] * (-6 * y * z)
        g[..., 12, 2] = C3[3] * (6 * zz - 3 * xx - 3 * yy)
        g[..., 13, 0] = C3[4] * (4 * zz - 3 * xx - yy)
        g[..., 13, 1] = C3[4] * (-2 * x * y)
        g[..., 13, 2] = C3[4] * (8 * x * z)
        g[..., 14, 0] = C3[5] * (2 * x * z)
        g[..., 14, 1] = C3[5] * (-2 * y * z)
        g[..., 14, 2] = C3[5] * (xx - yy)
        g[..., 15, 0] = C3[6] * (3 * xx - yy)
        g[..., 15, 1] = C3[6] * (-2 * x * y)
        g[..., 15, 2] = zero
    return g


def eval_color(sh: np.ndarray, dirs: np.ndarray, degree: int) -> np.ndarray:
    """Clamped color: max(0, sh . basis + 0.5). sh is (..., 3, K), dirs (..., 3)."""
    b = basis(dirs, degree)
    c = np.einsum("...ck,...k->...c", np.asarray(sh, dtype=np.float64), b) + 0.5
    return np.maximum(c, 0.0)


def eval_color_with_grads(sh: np.ndarray, dirs: np.ndarray, degree: int):
    """Color plus what backprop needs.

    Returns (color, basis_values, active) where active marks channels not
    pinned by the zero clamp. Gradients:
      d color / d sh[c, k]   = active[c] * basis[k]
      d color / d direction  = active[c] * sum_k sh[c, k] * basis_grad[k]
    """
    b = basis(dirs, degree)
    raw = np.einsum("...ck,...k->...c", np.asarray(sh, dtype=np.float64), b) + 0.5
    active = raw > 0.0
    return np.maximum(raw, 0.0), b, active


def dc_color(sh_dc: np.ndarray) -> np.ndarray:
    """View-independent base color from the DC band, clamped to [0, 1]."""
    return np.clip(C0 * np.asarray(sh_dc, dtype=np.float64) + 0.5, 0.0, 1.0)


def dc_from_color(color: np.ndarray) -> np.ndarray:
    """Inverse of dc_color on (0, 1): DC coefficients reproducing the color."""
    return (np.asarray(color, dtype=np.float64) - 0.5) / C0
