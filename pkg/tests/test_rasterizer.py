import numpy as np
import pytest

from ghair import quaternion
from ghair.camera import CameraView
from ghair.model import inverse_sigmoid
from ghair.raster.composite import composite_splats, tile_bin
from ghair.raster.project import ProjectedSplats, project_gaussians
from ghair.raster.settings import RasterSettings


def identity_cam(width=64, height=64, f=60.0):
    return CameraView(
        fx=f, fy=f, cx=(width - 1) / 2, cy=(height - 1) / 2,
        width=width, height=height, world_to_camera=np.eye(4),
    )


def random_scene(rng, n=256, width=64, height=64, settings=None):
    settings = settings or RasterSettings()
    cam = identity_cam(width, height)
    means = np.empty((n, 3))
    means[:, 0] = rng.uniform(-0.45, 0.45, n)
    means[:, 1] = rng.uniform(-0.45, 0.45, n)
    means[:, 2] = rng.uniform(0.7, 1.6, n)
    quats = quaternion.normalize(rng.normal(size=(n, 4)))
    scales = rng.uniform(0.01, 0.05, size=(n, 3))
    r = quaternion.to_matrix(quats)
    covs = np.einsum("kij,kj,klj->kil", r, scales**2, r)
    ops = rng.uniform(-2.0, 2.0, size=n)
    splats = project_gaussians(means, covs, ops, cam, settings)
    payload = rng.uniform(0.0, 1.0, size=(splats.count, 3))
    return cam, splats, payload


def oracle_composite(splats, payload, width, height, eps_t):
    """Untiled per-pixel reference: every splat, global depth order, full
    accumulation with only the early-stop predicate."""
    ys, xs = np.mgrid[0:height, 0:width]
    px = xs.reshape(-1).astype(np.float64)
    py = ys.reshape(-1).astype(np.float64)
    dx = px[None, :] - splats.mean2d[:, 0][:, None]
    dy = py[None, :] - splats.mean2d[:, 1][:, None]
    a = splats.conic[:, 0][:, None]
    b = splats.conic[:, 1][:, None]
    c = splats.conic[:, 2][:, None]
    q = a * dx * dx + 2 * b * dx * dy + c * dy * dy
    w = splats.opacity[:, None] * np.exp(-0.5 * q)
    trans = np.empty_like(w)
    trans[0] = 1.0
    if w.shape[0] > 1:
        np.cumprod(1.0 - w[:-1], axis=0, out=trans[1:])
    live = trans >= eps_t if eps_t > 0 else np.ones_like(w, dtype=bool)
    wt = np.where(live, w * trans, 0.0)
    color = (wt[:, :, None] * payload[:, None, :]).sum(axis=0)
    alpha = wt.sum(axis=0)
    n_ch = payload.shape[1]
    return color.reshape(height, width, n_ch), alpha.reshape(height, width)


def manual_splats(cam, mean2d, cov2d, alphas):
    """Hand-assembled splat list (already 'projected'), in given order."""
    k = len(alphas)
    cov2d = np.asarray(cov2d, dtype=np.float64)
    a, b, c = cov2d[:, 0], cov2d[:, 1], cov2d[:, 2]
    det = a * c - b * b
    conic = np.stack([c / det, -b / det, a / det], axis=-1)
    mid = 0.5 * (a + c)
    lam = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    return ProjectedSplats(
        mean2d=np.asarray(mean2d, dtype=np.float64),
        cov2d=cov2d,
        conic=conic,
        depth=np.arange(k, dtype=np.float64) + 1.0,
        opacity=np.asarray(alphas, dtype=np.float64),
        radius=RasterSettings().bin_sigma * np.sqrt(lam),
        source_id=np.arange(k, dtype=np.int64),
        t_cam=np.zeros((k, 3)),
        cov_cam=np.zeros((k, 3, 3)),
        cam=cam,
    )


class TestCompositeBasics:
    def test_single_opaque_splat_saturates_pixel(self):
        cam = identity_cam(9, 9)
        splats = manual_splats(cam, [[4.0, 4.0]], [[4.0, 0.0, 4.0]], [1.0])
        payload = np.array([[0.2, 0.5, 0.9]])
        color, alpha, _ = composite_splats(splats, payload, 9, 9, RasterSettings())
        np.testing.assert_allclose(color[4, 4], payload[0], atol=0)
        assert alpha[4, 4] == 1.0

    def test_two_splat_hand_case(self):
        # front w=0.6 color c1, back w=0.5 color c2: C = 0.6 c1 + 0.2 c2
        cam = identity_cam(9, 9)
        splats = manual_splats(
            cam, [[4.0, 4.0], [4.0, 4.0]], [[4.0, 0, 4.0], [4.0, 0, 4.0]], [0.6, 0.5]
        )
        c1 = np.array([1.0, 0.0, 0.0])
        c2 = np.array([0.0, 1.0, 0.0])
        color, alpha, _ = composite_splats(
            splats, np.stack([c1, c2]), 9, 9, RasterSettings()
        )
        np.testing.assert_allclose(color[4, 4], 0.6 * c1 + 0.2 * c2, atol=1e-15)
        np.testing.assert_allclose(alpha[4, 4], 0.8, atol=1e-15)

    def test_transmittance_sequence_non_increasing(self, rng):
        _, splats, payload = random_scene(rng, n=64)
        _, alpha, records = composite_splats(
            splats, payload, 64, 64, RasterSettings(), record=True
        )
        rec_offsets, _, _, _, rec_t = records
        for pix in range(0, 64 * 64, 7):
            seg = rec_t[rec_offsets[pix] : rec_offsets[pix + 1]]
            assert np.all(np.diff(seg) <= 1e-15)
        assert alpha.min() >= 0.0 and alpha.max() <= 1.0 + 1e-12


class TestOracleEquivalence:
    def test_matches_untiled_oracle_default_settings(self, rng):
        settings = RasterSettings()
        _, splats, payload = random_scene(rng, n=256, settings=settings)
        color, alpha, _ = composite_splats(splats, payload, 64, 64, settings)
        oc, oa = oracle_composite(splats, payload, 64, 64, settings.eps_t)
        assert np.abs(color - oc).max() <= 1e-5
        assert np.abs(alpha - oa).max() <= 1e-5

    def test_matches_oracle_exactly_without_early_stop(self, rng):
        settings = RasterSettings(eps_t=0.0)
        _, splats, payload = random_scene(rng, n=256, settings=settings)
        color, alpha, _ = composite_splats(splats, payload, 64, 64, settings)
        oc, oa = oracle_composite(splats, payload, 64, 64, 0.0)
        assert np.abs(color - oc).max() <= 1e-7
        assert np.abs(alpha - oa).max() <= 1e-7

    def test_backends_agree(self, rng, monkeypatch):
        settings = RasterSettings()
        _, splats, payload = random_scene(rng, n=128, settings=settings)
        monkeypatch.setenv("GHAIR_BACKEND", "numba")
        c_nb, a_nb, r_nb = composite_splats(splats, payload, 64, 64, settings, record=True)
        monkeypatch.setenv("GHAIR_BACKEND", "numpy")
        c_np, a_np, r_np = composite_splats(splats, payload, 64, 64, settings, record=True)
        np.testing.assert_allclose(c_nb, c_np, atol=1e-12)
        np.testing.assert_allclose(a_nb, a_np, atol=1e-12)
        for x, y in zip(r_nb, r_np):
            np.testing.assert_allclose(x, y, atol=1e-12)

    def test_payload_linearity_exact_on_disjoint_splats(self, rng):
        # one contributor per pixel and power-of-two payload values: the
        # single product w*T*payload distributes exactly in binary floats
        settings = RasterSettings()
        cam = identity_cam(64, 64)
        centers = [[x, y] for x in (8.0, 24.0, 40.0, 56.0) for y in (8.0, 24.0, 40.0, 56.0)]
        k = len(centers)
        splats = manual_splats(
            cam, centers, np.tile([0.25, 0.0, 0.25], (k, 1)), np.full(k, 0.7)
        )
        c1 = rng.choice([0.25, 0.5, 1.0], size=(k, 3))
        c2 = rng.choice([0.25, 0.5, 1.0], size=(k, 3))
        a, b = 2.0, 0.5
        mixed, _, _ = composite_splats(splats, a * c1 + b * c2, 64, 64, settings)
        r1, _, _ = composite_splats(splats, c1, 64, 64, settings)
        r2, _, _ = composite_splats(splats, c2, 64, 64, settings)
        assert np.array_equal(mixed, a * r1 + b * r2)

    def test_payload_linearity_random(self, rng):
        settings = RasterSettings()
        _, splats, _ = random_scene(rng, n=64, settings=settings)
        k = splats.count
        c1 = rng.uniform(size=(k, 3))
        c2 = rng.uniform(size=(k, 3))
        mixed, _, _ = composite_splats(splats, 1.7 * c1 + 0.3 * c2, 64, 64, settings)
        r1, _, _ = composite_splats(splats, c1, 64, 64, settings)
        r2, _, _ = composite_splats(splats, c2, 64, 64, settings)
        np.testing.assert_allclose(mixed, 1.7 * r1 + 0.3 * r2, atol=1e-12)


class TestTileBin:
    def test_all_tiles_covered_by_big_splat(self):
        cam = identity_cam(32, 32)
        splats = manual_splats(cam, [[16.0, 16.0]], [[900.0, 0, 900.0]], [0.5])
        offsets, ids, ntx = tile_bin(splats, 32, 32, 16)
        assert ntx == 2
        assert offsets[-1] == 4  # one splat in all four tiles

    def test_small_splat_single_tile(self):
        cam = identity_cam(32, 32)
        splats = manual_splats(cam, [[4.0, 4.0]], [[0.25, 0, 0.25]], [0.5])
        offsets, ids, _ = tile_bin(splats, 32, 32, 16)
        assert offsets[-1] == 1
        assert offsets[1] - offsets[0] == 1  # tile (0, 0)

    def test_empty_scene(self):
        cam = identity_cam(16, 16)
        splats = manual_splats(cam, np.zeros((0, 2)), np.zeros((0, 3)), np.zeros(0))
        color, alpha, recs = composite_splats(
            splats, np.zeros((0, 3)), 16, 16, RasterSettings(), record=True
        )
        assert color.max() == 0 and alpha.max() == 0
        assert recs[0][-1] == 0
