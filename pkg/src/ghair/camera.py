"""Pinhole camera with a rigid world-to-camera transform.

Conventions: camera looks down +z, image x grows right, image y grows down,
and pixel (row, col) samples the image plane at exactly (x=col, y=row).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RIGID_TOL = 1e-6


class NonRigidTransformError(ValueError):
    """world_to_camera is not a rotation + translation."""


@dataclass
class CameraView:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_to_camera: np.ndarray  # (4, 4)

    def __post_init__(self):
        self.world_to_camera = np.asarray(self.world_to_camera, dtype=np.float64)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive (fx={self.fx}, fy={self.fy})")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if self.world_to_camera.shape != (4, 4):
            raise ValueError("world_to_camera must be 4x4")
        r = self.world_to_camera[:3, :3]
        resid = np.abs(r.T @ r - np.eye(3)).max()
        if resid > RIGID_TOL:
            raise NonRigidTransformError(
                f"rotation block orthogonality residual {resid:.3e} exceeds {RIGID_TOL}"
            )

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:3, 3]

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def project(self, points: np.ndarray) -> np.ndarray:
        """Pixel coordinates of world points; no culling."""
        t = self.to_camera(points)
        z = t[..., 2]
        return np.stack(
            [self.fx * t[..., 0] / z + self.cx, self.fy * t[..., 1] / z + self.cy],
            axis=-1,
        )

    def to_dict(self, cam_id: int = 0) -> dict:
        return {
            "id": cam_id,
            "width": self.width,
            "height": self.height,
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "world_to_camera": [float(v) for v in self.world_to_camera.reshape(-1)],
        }


def look_at(
    eye: np.ndarray,
    target: np.ndarray,
    up: np.ndarray = (0.0, 1.0, 0.0),
) -> np.ndarray:
    """world_to_camera looking from eye toward target (x right, y down, z forward)."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValueError("eye and target coincide")
    fwd = fwd / n
    right = np.cross(fwd, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:  # forward parallel to up: pick any perpendicular
        alt = np.array([1.0, 0.0, 0.0])
        if abs(fwd[0]) > 0.9:
            alt = np.array([0.0, 0.0, 1.0])
        right = np.cross(fwd, alt)
        rn = np.linalg.norm(right)
    right = right / rn
    down = np.cross(fwd, right)
    w = np.eye(4)
    w[0, :3] = right
    w[1, :3] = down
    w[2, :3] = fwd
    w[:3, 3] = -w[:3, :3] @ eye
    return w
