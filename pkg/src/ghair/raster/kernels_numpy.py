"""Pure-numpy build of the compositing kernels.

The forward pass vectorizes per tile with a (splats x pixels) matrix and a
shifted cumprod for transmittance, reproducing the loop semantics of
_kernel_impl exactly (same skip and early-stop predicates). The backward pass
reuses the interpreted loop implementation: it is the fallback path, clarity
beats speed there.
"""

import numpy as np

from ghair.raster import _kernel_impl

NAME = "numpy"


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
    n_ch = payload.shape[1]
    out_color = np.zeros((height, width, n_ch), dtype=np.float64)
    out_alpha = np.zeros((height, width), dtype=np.float64)
    rec_parts = []  # (pixel_linear, idx, w, g, T) per tile

    n_tiles = tile_offsets.shape[0] - 1
    for t in range(n_tiles):
        s0, s1 = tile_offsets[t], tile_offsets[t + 1]
        if s1 == s0:
            continue
        ids = tile_splats[s0:s1]
        ty, tx = divmod(t, n_tiles_x)
        y0, x0 = ty * tile_size, tx * tile_size
        y1, x1 = min(y0 + tile_size, height), min(x0 + tile_size, width)
        ys, xs = np.mgrid[y0:y1, x0:x1]
        xs = xs.reshape(-1).astype(np.float64)
        ys = ys.reshape(-1).astype(np.float64)

        dx = xs[None, :] - mean2d[ids, 0][:, None]  # (G, P)
        dy = ys[None, :] - mean2d[ids, 1][:, None]
        a = conic[ids, 0][:, None]
        b = conic[ids, 1][:, None]
        c = conic[ids, 2][:, None]
        q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
        ok = q <= q_cut
        g = np.exp(-0.5 * np.where(ok, q, 0.0))
        w = np.where(ok, opacity[ids][:, None] * g, 0.0)

        trans = np.empty_like(w)
        trans[0] = 1.0
        if w.shape[0] > 1:
            np.cumprod(1.0 - w[:-1], axis=0, out=trans[1:])
        live = trans >= eps_t
        contrib = ok & live
        wt = np.where(contrib, w * trans, 0.0)

        out_color[y0:y1, x0:x1] += (wt[:, :, None] * payload[ids][:, None, :]).sum(
            axis=0
        ).reshape(y1 - y0, x1 - x0, n_ch)
        out_alpha[y0:y1, x0:x1] += wt.sum(axis=0).reshape(y1 - y0, x1 - x0)

        if record:
            pi, gi = np.nonzero(contrib.T)  # pixel-major, depth order inside pixel
            if pi.size:
                pix_lin = (ys[pi].astype(np.int64) * width) + xs[pi].astype(np.int64)
                rec_parts.append(
                    (pix_lin, ids[gi], w[gi, pi], g[gi, pi], trans[gi, pi])
                )

    if not record:
        return out_color, out_alpha, None

    if rec_parts:
        pix_lin = np.concatenate([p[0] for p in rec_parts])
        order = np.argsort(pix_lin, kind="stable")
        pix_lin = pix_lin[order]
        rec_idx = np.concatenate([p[1] for p in rec_parts])[order].astype(np.int64)
        rec_w = np.concatenate([p[2] for p in rec_parts])[order]
        rec_g = np.concatenate([p[3] for p in rec_parts])[order]
        rec_t = np.concatenate([p[4] for p in rec_parts])[order]
    else:
        pix_lin = np.zeros(0, dtype=np.int64)
        rec_idx = np.zeros(0, dtype=np.int64)
        rec_w = np.zeros(0, dtype=np.float64)
        rec_g = np.zeros(0, dtype=np.float64)
        rec_t = np.zeros(0, dtype=np.float64)
    counts = np.bincount(pix_lin, minlength=height * width)
    rec_offsets = np.zeros(height * width + 1, dtype=np.int64)
    np.cumsum(counts, out=rec_offsets[1:])
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
    _kernel_impl.backward_records(
        height, width, rec_offsets, rec_idx, rec_w, rec_g, rec_t,
        d_out_color, d_out_alpha, opacity, payload, mean2d, conic,
        d_payload, d_opacity, d_mean2d, d_conic, suffix_c,
    )
    return d_payload, d_opacity, d_mean2d, d_conic
