import numpy as np
import pytest

from ghair.camera import CameraView, NonRigidTransformError, look_at
from ghair.raster.project import project_gaussians, projection_jacobian
from ghair.raster.settings import RasterSettings


def identity_cam(width=64, height=64, f=100.0, cx=32.0, cy=32.0):
    return CameraView(
        fx=f, fy=f, cx=cx, cy=cy, width=width, height=height, world_to_camera=np.eye(4)
    )


SET = RasterSettings(eps_cov=0.3)


class TestProjectGaussian:
    def test_on_axis_projection(self):
        cam = identity_cam()
        splats = project_gaussians(
            means=np.array([[0.0, 0.0, 1.0]]),
            covs=np.eye(3)[None] * 1e-6,
            opacities_pre=np.array([0.0]),
            cam=cam,
            settings=SET,
        )
        assert splats.count == 1
        np.testing.assert_allclose(splats.mean2d[0], [32.0, 32.0], atol=1e-12)

    def test_isotropic_on_axis_covariance(self):
        # oracle: exactly on-axis the affine approximation is exact, so the
        # projected covariance is (f*sigma)^2 I plus the dilation floor
        cam = identity_cam()
        sigma = 2e-3
        splats = project_gaussians(
            means=np.array([[0.0, 0.0, 1.0]]),
            covs=np.eye(3)[None] * sigma**2,
            opacities_pre=np.array([0.0]),
            cam=cam,
            settings=SET,
        )
        expect = (cam.fx * sigma) ** 2 + SET.eps_cov
        np.testing.assert_allclose(splats.cov2d[0, 0], expect, rtol=0.01)
        np.testing.assert_allclose(splats.cov2d[0, 2], expect, rtol=0.01)
        assert abs(splats.cov2d[0, 1]) < 1e-12

    def test_behind_camera_culled(self):
        splats = project_gaussians(
            means=np.array([[0.0, 0.0, -1.0]]),
            covs=np.eye(3)[None] * 1e-6,
            opacities_pre=np.array([0.0]),
            cam=identity_cam(),
            settings=SET,
        )
        assert splats.count == 0

    def test_far_offscreen_culled(self):
        splats = project_gaussians(
            means=np.array([[10.0, 0.0, 1.0]]),  # projects ~1000 px off image
            covs=np.eye(3)[None] * 1e-6,
            opacities_pre=np.array([0.0]),
            cam=identity_cam(),
            settings=SET,
        )
        assert splats.count == 0

    def test_depth_sorted(self, rng):
        means = rng.uniform(-0.05, 0.05, size=(50, 3))
        means[:, 2] = rng.uniform(0.5, 2.0, size=50)
        splats = project_gaussians(
            means,
            np.tile(np.eye(3) * 1e-6, (50, 1, 1)),
            np.zeros(50),
            identity_cam(),
            SET,
        )
        assert np.all(np.diff(splats.depth) >= 0)

    def test_general_pose_matches_numeric_jacobian(self, rng):
        # oracle: FD of the projection around the mean reproduces J
        cam = CameraView(
            fx=120.0, fy=95.0, cx=31.0, cy=30.0, width=64, height=64,
            world_to_camera=look_at([0.4, 0.3, -1.2], [0.0, 0.0, 0.0]),
        )
        p = np.array([[0.02, -0.01, 0.05]])
        t = cam.to_camera(p)
        j = projection_jacobian(t, cam.fx, cam.fy)[0]
        h = 1e-7
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            num = (_pinhole(t[0] + dp, cam) - _pinhole(t[0] - dp, cam)) / (2 * h)
            np.testing.assert_allclose(j[:, k], num, rtol=1e-5, atol=1e-5)


def _pinhole(t, cam):
    return np.array([cam.fx * t[0] / t[2] + cam.cx, cam.fy * t[1] / t[2] + cam.cy])


class TestCameraView:
    def test_rigidity_validated(self):
        w = np.eye(4)
        w[0, 1] = 0.01
        with pytest.raises(NonRigidTransformError):
            CameraView(fx=1, fy=1, cx=0, cy=0, width=2, height=2, world_to_camera=w)

    def test_bad_focal_rejected(self):
        with pytest.raises(ValueError):
            CameraView(fx=0, fy=1, cx=0, cy=0, width=2, height=2, world_to_camera=np.eye(4))

    def test_look_at_points_camera_at_target(self):
        w = look_at([0.0, 0.0, 2.0], [0.0, 0.0, 0.0])
        cam = CameraView(fx=50, fy=50, cx=16, cy=16, width=33, height=33, world_to_camera=w)
        np.testing.assert_allclose(cam.position, [0, 0, 2], atol=1e-12)
        # target projects to the principal point, in front of the camera
        t = cam.to_camera(np.array([[0.0, 0.0, 0.0]]))[0]
        assert t[2] > 0
        np.testing.assert_allclose(cam.project(np.zeros((1, 3)))[0], [16, 16], atol=1e-9)
        # world +y appears above image center (smaller row) for an upright camera
        up_px = cam.project(np.array([[0.0, 0.5, 0.0]]))[0]
        assert up_px[1] < 16
