"""Symmetric position+direction chamfer between strand points and field
Gaussians, with nearest neighbors found on a uniform spatial grid.

The grid stores point indices per cell in CSR form; queries expand cell
shells outward until the best distance provably beats the next shell.
"""

from __future__ import annotations

import numpy as np

from ghair import backend

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _query_impl(points, lo, cell, dims, cell_offsets, cell_points, queries, out_idx):
    nq = queries.shape[0]
    nx, ny, nz = dims[0], dims[1], dims[2]
    for qi in range(nq):
        qx, qy, qz = queries[qi, 0], queries[qi, 1], queries[qi, 2]
        cx = int((qx - lo[0]) // cell)
        cy = int((qy - lo[1]) // cell)
        cz = int((qz - lo[2]) // cell)
        if cx < 0:
            cx = 0
        if cy < 0:
            cy = 0
        if cz < 0:
            cz = 0
        if cx >= nx:
            cx = nx - 1
        if cy >= ny:
            cy = ny - 1
        if cz >= nz:
            cz = nz - 1
        best = -1
        best_d2 = 1e300
        max_ring = nx + ny + nz
        for ring in range(max_ring + 1):
            # any cell in this shell is at least (ring - 1) * cell away
            if best >= 0:
                bound = (ring - 1) * cell
                if bound > 0 and bound * bound > best_d2:
                    break
            x0, x1 = cx - ring, cx + ring
            y0, y1 = cy - ring, cy + ring
            z0, z1 = cz - ring, cz + ring
            any_cell = False
            for ix in range(max(x0, 0), min(x1, nx - 1) + 1):
                for iy in range(max(y0, 0), min(y1, ny - 1) + 1):
                    for iz in range(max(z0, 0), min(z1, nz - 1) + 1):
                        on_shell = (
                            ix == x0 or ix == x1 or iy == y0 or iy == y1 or iz == z0 or iz == z1
                        )
                        if not on_shell:
                            continue
                        any_cell = True
                        c = (ix * ny + iy) * nz + iz
                        for k in range(cell_offsets[c], cell_offsets[c + 1]):
                            p = cell_points[k]
                            dx = points[p, 0] - qx
                            dy = points[p, 1] - qy
                            dz = points[p, 2] - qz
                            d2 = dx * dx + dy * dy + dz * dz
                            if d2 < best_d2:
                                best_d2 = d2
                                best = p
            if not any_cell and best >= 0:
                break
        out_idx[qi] = best


if _HAVE_NUMBA:
    _query_numba = njit(cache=True)(_query_impl)


class UniformGridNN:
    """Nearest-neighbor index over a fixed point set."""

    def __init__(self, points: np.ndarray, target_per_cell: float = 2.0):
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.shape[0] == 0:
            raise ValueError("empty point set")
        self.points = points
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        span = float(max((hi - lo).max(), 1e-12))
        n = points.shape[0]
        cell = span / max(1.0, (n / target_per_cell) ** (1.0 / 3.0))
        self.lo = lo
        self.cell = float(cell)
        dims = np.maximum(((hi - lo) // self.cell).astype(np.int64) + 1, 1)
        self.dims = dims
        coords = np.clip(
            ((points - lo) // self.cell).astype(np.int64), 0, dims - 1
        )
        flat = (coords[:, 0] * dims[1] + coords[:, 1]) * dims[2] + coords[:, 2]
        order = np.argsort(flat, kind="stable")
        self.cell_points = order.astype(np.int64)
        counts = np.bincount(flat, minlength=int(dims.prod()))
        self.cell_offsets = np.zeros(int(dims.prod()) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.cell_offsets[1:])

    def query(self, queries: np.ndarray) -> np.ndarray:
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        out = np.empty(queries.shape[0], dtype=np.int64)
        fn = _query_numba if (_HAVE_NUMBA and backend.backend_name() == "numba") else _query_impl
        fn(
            self.points,
            self.lo,
            self.cell,
            self.dims,
            self.cell_offsets,
            self.cell_points,
            queries,
            out,
        )
        return out


def chamfer_terms(
    points_a: np.ndarray,
    dirs_a: np.ndarray,
    points_b: np.ndarray,
    dirs_b: np.ndarray,
    w_pos: float = 1.0,
    w_dir: float = 1.0,
):
    """One side of the chamfer sum plus the match indices."""
    nn = UniformGridNN(points_b).query(points_a)
    d = points_a - points_b[nn]
    dist = np.linalg.norm(d, axis=1)
    dirdot = np.sum(dirs_a * dirs_b[nn], axis=1)
    value = w_pos * dist.sum() + w_dir * (1.0 - dirdot).sum()
    return float(value), nn, dist


def loss_geo(
    strand_points: np.ndarray,
    strand_dirs: np.ndarray,
    field_points: np.ndarray,
    field_dirs: np.ndarray,
    w_pos: float = 1.0,
    w_dir: float = 1.0,
) -> float:
    """Symmetric nearest-neighbor chamfer with direction agreement."""
    if strand_points.shape[0] == 0 or field_points.shape[0] == 0:
        raise ValueError("chamfer requires non-empty point sets")
    fwd, _, _ = chamfer_terms(strand_points, strand_dirs, field_points, field_dirs, w_pos, w_dir)
    bwd, _, _ = chamfer_terms(field_points, field_dirs, strand_points, strand_dirs, w_pos, w_dir)
    return fwd + bwd
