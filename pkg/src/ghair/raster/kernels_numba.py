"""numba builds of the compositing kernels."""

import numpy as np
from numba import njit

from ghair.raster import _kernel_impl

_count = njit(cache=True)(_kernel_impl.count_contributors)
_fill = njit(cache=True)(_kernel_impl.composite_fill)
_plain = njit(cache=True)(_kernel_impl.composite_plain)
_backward = njit(cache=True)(_kernel_impl.backward_records)

NAME = "numba"


def composite(
    height,
    width,
    tile_size,
    n_tiles_x,
    tile_offsets,
    tile_splats,
    mean2d,
    conic,
    opacity,
    payload,
    eps_t,
    q_cut,
    record,
):
    out_color = np.zeros((height, width, payload.shape[1]), dtype=np.float64)
    out_alpha = np.zeros((height, width), dtype=np.float64)
    if not record:
        _plain(
            height, width, tile_size, n_tiles_x, tile_offsets, tile_splats,
            mean2d, conic, opacity, payload, eps_t, q_cut, out_color, out_alpha,
        )
        return out_color, out_alpha, None
    counts = np.zeros(height * width, dtype=np.int64)
    _count(
        height, width, tile_size, n_tiles_x, tile_offsets, tile_splats,
        mean2d, conic, opacity, eps_t, q_cut, counts,
    )
    rec_offsets = np.zeros(height * width + 1, dtype=np.int64)
    np.cumsum(counts, out=rec_offsets[1:])
    total = int(rec_offsets[-1])
    rec_idx = np.empty(total, dtype=np.int64)
    rec_w = np.empty(total, dtype=np.float64)
    rec_g = np.empty(total, dtype=np.float64)
    rec_t = np.empty(total, dtype=np.float64)
    _fill(
        height, width, tile_size, n_tiles_x, tile_offsets, tile_splats,
        mean2d, conic, opacity, payload, eps_t, q_cut, out_color, out_alpha,
        rec_offsets, rec_idx, rec_w, rec_g, rec_t,
    )
    return out_color, out_alpha, (rec_offsets, rec_idx, rec_w, rec_g, rec_t)


def backward(
    height,
    width,
    records,
    d_out_color,
    d_out_alpha,
    n_splats,
    opacity,
    payload,
    mean2d,
    conic,
):
    rec_offsets, rec_idx, rec_w, rec_g, rec_t = records
    d_payload = np.zeros((n_splats, payload.shape[1]), dtype=np.float64)
    d_opacity = np.zeros(n_splats, dtype=np.float64)
    d_mean2d = np.zeros((n_splats, 2), dtype=np.float64)
    d_conic = np.zeros((n_splats, 3), dtype=np.float64)
    suffix_c = np.zeros(payload.shape[1], dtype=np.float64)
    _backward(
        height, width, rec_offsets, rec_idx, rec_w, rec_g, rec_t,
        d_out_color, d_out_alpha, opacity, payload, mean2d, conic,
        d_payload, d_opacity, d_mean2d, d_conic, suffix_c,
    )
    return d_payload, d_opacity, d_mean2d, d_conic
