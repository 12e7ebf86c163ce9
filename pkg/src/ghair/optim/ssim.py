"""Structural similarity with an analytic input gradient.

Population-covariance SSIM over an 11-tap Gaussian window (sigma 1.5),
symmetric boundary handling, scored as the mean of the map with the
half-window margin cropped. Agreement with scikit-image's implementation
(gaussian_weights=True, use_sample_covariance=False) is pinned by tests.
"""

from __future__ import annotations

import numpy as np

C1 = 0.01**2
C2 = 0.03**2
SIGMA = 1.5
RADIUS = 5  # 11-tap window


def _kernel() -> np.ndarray:
    x = np.arange(-RADIUS, RADIUS + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / SIGMA) ** 2)
    return k / k.sum()


_K = _kernel()


def _corr_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    """Valid correlation along one axis of a padded array."""
    out = np.zeros(
        tuple(
            s - 2 * RADIUS if ax == axis else s for ax, s in enumerate(arr.shape)
        ),
        dtype=np.float64,
    )
    sl = [slice(None)] * arr.ndim
    n = out.shape[axis]
    for k in range(2 * RADIUS + 1):
        sl[axis] = slice(k, k + n)
        out += _K[k] * arr[tuple(sl)]
    return out


def _filter(img: np.ndarray) -> np.ndarray:
    """Gaussian window means with symmetric (edge-reflecting) padding."""
    pad = [(RADIUS, RADIUS), (RADIUS, RADIUS)] + [(0, 0)] * (img.ndim - 2)
    padded = np.pad(img, pad, mode="symmetric")
    return _corr_axis(_corr_axis(padded, 0), 1)


def _fold_axis(arr: np.ndarray, axis: int, n: int) -> np.ndarray:
    """Adjoint of symmetric padding: fold pad margins back onto the interior.

    Pad index p < r came from interior r-1-p; trailing index r+n+j came from
    interior n-1-j. The reversed destination slices implement both maps.
    """
    sl = [slice(None)] * arr.ndim

    def take(s):
        sl[axis] = s
        return arr[tuple(sl)]

    core = take(slice(RADIUS, RADIUS + n)).copy()
    lead = take(slice(0, RADIUS))
    trail = take(slice(RADIUS + n, None))
    dst = [slice(None)] * core.ndim
    dst[axis] = slice(RADIUS - 1, None, -1)
    core[tuple(dst)] += lead
    dst[axis] = slice(n - 1, n - 1 - trail.shape[axis], -1)
    core[tuple(dst)] += trail
    return core


def _filter_adjoint(grad: np.ndarray, shape) -> np.ndarray:
    """Adjoint of _filter: full correlation then pad folding."""
    pad = [(RADIUS, RADIUS), (RADIUS, RADIUS)] + [(0, 0)] * (grad.ndim - 2)
    g = np.pad(grad, pad, mode="constant")
    g = _corr_axis_full(g, 0)
    g = _corr_axis_full(g, 1)
    g = _fold_axis(g, 0, shape[0])
    g = _fold_axis(g, 1, shape[1])
    return g


def _corr_axis_full(arr: np.ndarray, axis: int) -> np.ndarray:
    """Full correlation along one axis (adjoint of valid correlation)."""
    out = np.zeros(
        tuple(s + 2 * RADIUS if ax == axis else s for ax, s in enumerate(arr.shape)),
        dtype=np.float64,
    )
    sl = [slice(None)] * arr.ndim
    n = arr.shape[axis]
    for k in range(2 * RADIUS + 1):
        sl[axis] = slice(k, k + n)
        # kernel is symmetric so correlation == convolution
        out[tuple(sl)] += _K[k] * arr
    return out


def _ssim_maps(x: np.ndarray, y: np.ndarray):
    if min(x.shape[0], x.shape[1]) < 2 * RADIUS + 1:
        raise ValueError("images must be at least 11 pixels on each side")
    ux = _filter(x)
    uy = _filter(y)
    uxx = _filter(x * x)
    uyy = _filter(y * y)
    uxy = _filter(x * y)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    a1 = 2 * ux * uy + C1
    a2 = 2 * vxy + C2
    b1 = ux * ux + uy * uy + C1
    b2 = vx + vy + C2
    s = (a1 * a2) / (b1 * b2)
    return s, (ux, uy, a1, a2, b1, b2)


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Mean SSIM of two [0,1] images (HxW or HxWxC)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    s, _ = _ssim_maps(x, y)
    return float(s[RADIUS:-RADIUS, RADIUS:-RADIUS].mean(dtype=np.float64))


def ssim_with_grad(x: np.ndarray, y: np.ndarray):
    """(mean SSIM, d mean SSIM / d x)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    s, (ux, uy, a1, a2, b1, b2) = _ssim_maps(x, y)
    crop = s[RADIUS:-RADIUS, RADIUS:-RADIUS]
    value = float(crop.mean(dtype=np.float64))

    ds = np.zeros_like(s)
    ds[RADIUS:-RADIUS, RADIUS:-RADIUS] = 1.0 / crop.size

    inv_bb = 1.0 / (b1 * b2)
    d_a1 = ds * a2 * inv_bb
    d_a2 = ds * a1 * inv_bb
    d_b1 = -ds * s / b1
    d_b2 = -ds * s / b2

    d_ux = 2 * uy * d_a1 - 2 * uy * d_a2 + 2 * ux * d_b1 - 2 * ux * d_b2
    d_uxx = d_b2
    d_uxy = 2 * d_a2

    gx = _filter_adjoint(d_ux, x.shape)
    gx += 2 * x * _filter_adjoint(d_uxx, x.shape)
    gx += y * _filter_adjoint(d_uxy, x.shape)
    return value, gx
