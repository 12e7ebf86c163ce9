"""Loop-level compositing kernels.

These are the hot inner loops, written in numba-compatible style so the same
source compiles under @njit (kernels_numba) and runs interpreted as the
reference semantics. Splats reach a pixel through per-tile CSR lists in
global depth order; per pixel the walk is front-to-back:

    for each listed splat:
        stop when transmittance < eps_t
        skip when Mahalanobis^2 > q_cut (contribution below float noise)
        w = alpha * exp(-q/2);  accumulate T*w*payload;  T *= 1 - w

Contributor records (splat id, w, kernel value g, transmittance-in-front T)
are stored pixel-major for the backward pass and the light pass.
"""

import math


def count_contributors(
    height,
    width,
    tile_size,
    n_tiles_x,
    tile_offsets,
    tile_splats,
    mean2d,
    conic,
    opacity,
    eps_t,
    q_cut,
    counts,
):
    n_tiles = tile_offsets.shape[0] - 1
    for t in range(n_tiles):
        s0 = tile_offsets[t]
        s1 = tile_offsets[t + 1]
        if s1 == s0:
            continue
        ty = t // n_tiles_x
        tx = t - ty * n_tiles_x
        y0 = ty * tile_size
        x0 = tx * tile_size
        y1 = min(y0 + tile_size, height)
        x1 = min(x0 + tile_size, width)
        for py in range(y0, y1):
            for px in range(x0, x1):
                tr = 1.0
                cnt = 0
                for si in range(s0, s1):
                    if tr < eps_t:
                        break
                    s = tile_splats[si]
                    dx = px - mean2d[s, 0]
                    dy = py - mean2d[s, 1]
                    q = (
                        conic[s, 0] * dx * dx
                        + 2.0 * conic[s, 1] * dx * dy
                        + conic[s, 2] * dy * dy
                    )
                    if q > q_cut:
                        continue
                    w = opacity[s] * math.exp(-0.5 * q)
                    cnt += 1
                    tr *= 1.0 - w
                counts[py * width + px] = cnt


def composite_fill(
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
    out_color,
    out_alpha,
    rec_offsets,
    rec_idx,
    rec_w,
    rec_g,
    rec_t,
):
    n_tiles = tile_offsets.shape[0] - 1
    n_ch = payload.shape[1]
    for t in range(n_tiles):
        s0 = tile_offsets[t]
        s1 = tile_offsets[t + 1]
        if s1 == s0:
            continue
        ty = t // n_tiles_x
        tx = t - ty * n_tiles_x
        y0 = ty * tile_size
        x0 = tx * tile_size
        y1 = min(y0 + tile_size, height)
        x1 = min(x0 + tile_size, width)
        for py in range(y0, y1):
            for px in range(x0, x1):
                pix = py * width + px
                r = rec_offsets[pix]
                tr = 1.0
                for si in range(s0, s1):
                    if tr < eps_t:
                        break
                    s = tile_splats[si]
                    dx = px - mean2d[s, 0]
                    dy = py - mean2d[s, 1]
                    q = (
                        conic[s, 0] * dx * dx
                        + 2.0 * conic[s, 1] * dx * dy
                        + conic[s, 2] * dy * dy
                    )
                    if q > q_cut:
                        continue
                    g = math.exp(-0.5 * q)
                    w = opacity[s] * g
                    wt = tr * w
                    for ch in range(n_ch):
                        out_color[py, px, ch] += wt * payload[s, ch]
                    out_alpha[py, px] += wt
                    rec_idx[r] = s
                    rec_w[r] = w
                    rec_g[r] = g
                    rec_t[r] = tr
                    r += 1
                    tr *= 1.0 - w


def composite_plain(
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
    out_color,
    out_alpha,
):
    n_tiles = tile_offsets.shape[0] - 1
    n_ch = payload.shape[1]
    for t in range(n_tiles):
        s0 = tile_offsets[t]
        s1 = tile_offsets[t + 1]
        if s1 == s0:
            continue
        ty = t // n_tiles_x
        tx = t - ty * n_tiles_x
        y0 = ty * tile_size
        x0 = tx * tile_size
        y1 = min(y0 + tile_size, height)
        x1 = min(x0 + tile_size, width)
        for py in range(y0, y1):
            for px in range(x0, x1):
                tr = 1.0
                for si in range(s0, s1):
                    if tr < eps_t:
                        break
                    s = tile_splats[si]
                    dx = px - mean2d[s, 0]
                    dy = py - mean2d[s, 1]
                    q = (
                        conic[s, 0] * dx * dx
                        + 2.0 * conic[s, 1] * dx * dy
                        + conic[s, 2] * dy * dy
                    )
                    if q > q_cut:
                        continue
                    w = opacity[s] * math.exp(-0.5 * q)
                    wt = tr * w
                    for ch in range(n_ch):
                        out_color[py, px, ch] += wt * payload[s, ch]
                    out_alpha[py, px] += wt
                    tr *= 1.0 - w


def backward_records(
    height,
    width,
    rec_offsets,
    rec_idx,
    rec_w,
    rec_g,
    rec_t,
    d_out_color,
    d_out_alpha,
    opacity,
    payload,
    mean2d,
    conic,
    d_payload,
    d_opacity,
    d_mean2d,
    d_conic,
    suffix_c,
):
    """Adjoint of the front-to-back walk: per pixel, iterate records back to
    front keeping suffix sums of composited contributions.

    d(out)/dw_i = T_i c_i - (sum over later contributors of T w c) / (1 - w_i)
    """
    n_ch = payload.shape[1]
    for py in range(height):
        for px in range(width):
            pix = py * width + px
            r0 = rec_offsets[pix]
            r1 = rec_offsets[pix + 1]
            if r1 == r0:
                continue
            for ch in range(n_ch):
                suffix_c[ch] = 0.0
            suffix_a = 0.0
            for r in range(r1 - 1, r0 - 1, -1):
                s = rec_idx[r]
                w = rec_w[r]
                g = rec_g[r]
                tr = rec_t[r]
                denom = 1.0 - w
                if denom < 1e-12:
                    denom = 1e-12
                dw = 0.0
                for ch in range(n_ch):
                    dc = d_out_color[py, px, ch]
                    d_payload[s, ch] += tr * w * dc
                    dw += dc * (tr * payload[s, ch] - suffix_c[ch] / denom)
                da = d_out_alpha[py, px]
                dw += da * (tr - suffix_a / denom)
                for ch in range(n_ch):
                    suffix_c[ch] += tr * w * payload[s, ch]
                suffix_a += tr * w
                d_opacity[s] += dw * g
                dq = -0.5 * g * (dw * opacity[s])
                dx = px - mean2d[s, 0]
                dy = py - mean2d[s, 1]
                d_mean2d[s, 0] += dq * (-2.0 * (conic[s, 0] * dx + conic[s, 1] * dy))
                d_mean2d[s, 1] += dq * (-2.0 * (conic[s, 1] * dx + conic[s, 2] * dy))
                d_conic[s, 0] += dq * dx * dx
                d_conic[s, 1] += dq * 2.0 * dx * dy
                d_conic[s, 2] += dq * dy * dy
