"""Quaternion helpers (w, x, y, z convention, Hamilton product).

Rotations are stored as possibly-unnormalized quaternions; every consumer
normalizes first. The segment tangent is the third column of the rotation
matrix, so ``rotate_z_axis`` is the hot identity here.
"""

from __future__ import annotations

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q: np.ndarray) -> np.ndarray:
    """Unit-normalize quaternions, last axis = (w, x, y, z)."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n < 1e-30):
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for unit quaternions; shape (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    r[..., 0, 0] = 1 - 2 * (y * y + z * z)
    r[..., 0, 1] = 2 * (x * y - w * z)
    r[..., 0, 2] = 2 * (x * z + w * y)
    r[..., 1, 0] = 2 * (x * y + w * z)
    r[..., 1, 1] = 1 - 2 * (x * x + z * z)
    r[..., 1, 2] = 2 * (y * z - w * x)
    r[..., 2, 0] = 2 * (x * z - w * y)
    r[..., 2, 1] = 2 * (y * z + w * x)
    r[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return r


def rotate_z_axis(q: np.ndarray) -> np.ndarray:
    """Third column of to_matrix(q): the direction a +z tangent maps to."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)],
        axis=-1,
    )


def from_z_to(d: np.ndarray) -> np.ndarray:
    """Minimal-angle rotation mapping +z onto unit direction(s) d.

    Roll-free by construction: the rotation axis is z x d. Antiparallel d
    falls back to a 180-degree turn about +x.
    """
    d = np.asarray(d, dtype=np.float64)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    z = np.array([0.0, 0.0, 1.0])
    c = d @ z  # cos(angle)
    axis = np.cross(np.broadcast_to(z, d.shape), d)
    s = np.linalg.norm(axis, axis=-1)
    q = np.empty((d.shape[0], 4), dtype=np.float64)
    ok = s > 1e-12
    # half-angle form: w = cos(a/2), v = axis_hat * sin(a/2)
    half = 0.5 * np.arctan2(s[ok], c[ok])
    q[ok, 0] = np.cos(half)
    q[ok, 1:] = axis[ok] / s[ok, None] * np.sin(half)[:, None]
    # parallel or antiparallel
    para = ~ok
    q[para] = IDENTITY
    anti = para & (c < 0)
    q[anti] = np.array([0.0, 1.0, 0.0, 0.0])
    return q[0] if single else q


def matrix_grad(q: np.ndarray) -> np.ndarray:
    """d to_matrix / d q for unit quaternions: shape (..., 4, 3, 3).

    Entry [k, i, j] is dR[i, j]/dq[k]. Valid on the unit sphere; compose with
    normalize_grad when parameters are stored unnormalized.
    """
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    zero = np.zeros_like(w)
    g = np.empty(q.shape[:-1] + (4, 3, 3), dtype=np.float64)
    # dR/dw
    g[..., 0, 0, 0] = zero
    g[..., 0, 0, 1] = -2 * z
    g[..., 0, 0, 2] = 2 * y
    g[..., 0, 1, 0] = 2 * z
    g[..., 0, 1, 1] = zero
    g[..., 0, 1, 2] = -2 * x
    g[..., 0, 2, 0] = -2 * y
    g[..., 0, 2, 1] = 2 * x
    g[..., 0, 2, 2] = zero
    # dR/dx
    g[..., 1, 0, 0] = zero
    g[..., 1, 0, 1] = 2 * y
    g[..., 1, 0, 2] = 2 * z
    g[..., 1, 1, 0] = 2 * y
    g[..., 1, 1, 1] = -4 * x
    g[..., 1, 1, 2] = -2 * w
    g[..., 1, 2, 0] = 2 * z
    g[..., 1, 2, 1] = 2 * w
    g[..., 1, 2, 2] = -4 * x
    # dR/dy
    g[..., 2, 0, 0] = -4 * y
    g[..., 2, 0, 1] = 2 * x
    g[..., 2, 0, 2] = 2 * w
    g[..., 2, 1, 0] = 2 * x
    g[..., 2, 1, 1] = zero
    g[..., 2, 1, 2] = 2 * z
    g[..., 2, 2, 0] = -2 * w
    g[..., 2, 2, 1] = 2 * z
    g[..., 2, 2, 2] = -4 * y
    # dR/dz
    g[..., 3, 0, 0] = -4 * z
    g[..., 3, 0, 1] = -2 * w
    g[..., 3, 0, 2] = 2 * x
    g[..., 3, 1, 0] = 2 * w
    g[..., 3, 1, 1] = -4 * z
    g[..., 3, 1, 2] = 2 * y
    g[..., 3, 2, 0] = 2 * x
    g[..., 3, 2, 1] = 2 * y
    g[..., 3, 2, 2] = zero
    return g


def z_axis_grad(q: np.ndarray) -> np.ndarray:
    """d rotate_z_axis / d q for unit quaternions: shape (..., 3, 4).

    Entry [i, k] is dd[i]/dq[k].
    """
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    zero = np.zeros_like(w)
    g = np.empty(q.shape[:-1] + (3, 4), dtype=np.float64)
    g[..., 0, 0] = 2 * y
    g[..., 0, 1] = 2 * z
    g[..., 0, 2] = 2 * w
    g[..., 0, 3] = 2 * x
    g[..., 1, 0] = -2 * x
    g[..., 1, 1] = -2 * w
    g[..., 1, 2] = 2 * z
    g[..., 1, 3] = 2 * y
    g[..., 2, 0] = zero
    g[..., 2, 1] = -4 * x
    g[..., 2, 2] = -4 * y
    g[..., 2, 3] = zero
    return g


def normalize_grad(q_raw: np.ndarray) -> np.ndarray:
    """Jacobian of q_raw -> q_raw/|q_raw|: shape (..., 4, 4), [i, j] = dq_hat[i]/dq_raw[j]."""
    q_raw = np.asarray(q_raw, dtype=np.float64)
    n = np.linalg.norm(q_raw, axis=-1, keepdims=True)
    q_hat = q_raw / n
    eye = np.broadcast_to(np.eye(4), q_raw.shape[:-1] + (4, 4))
    outer = q_hat[..., :, None] * q_hat[..., None, :]
    return (eye - outer) / n[..., None]
