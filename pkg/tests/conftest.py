import numpy as np
import pytest

from ghair import quaternion
from ghair.model import HairModel, HeadGaussians, sh_band_count


def random_model(
    rng: np.random.Generator,
    n_strands: int = 8,
    n_segments: int = 16,
    sh_degree: int = 1,
    spread: float = 0.3,
    seg_len: float = 0.02,
    head_count: int = 0,
) -> HairModel:
    """Hair model with gently curving strands inside the unit box near origin."""
    k = sh_band_count(sh_degree)
    roots = rng.uniform(-spread, spread, size=(n_strands, 3))
    base = rng.normal(size=(n_strands, 3))
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    dirs = base[:, None, :] + 0.25 * rng.normal(size=(n_strands, n_segments, 3))
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    quats = quaternion.from_z_to(dirs.reshape(-1, 3)).reshape(n_strands, n_segments, 4)
    # keep quaternions unnormalized-ish to exercise the normalization chain
    quats = quats * rng.uniform(0.8, 1.2, size=(n_strands, n_segments, 1))
    sh = 0.3 * rng.normal(size=(n_strands, n_segments, 3, k))
    sh[..., 0] = rng.uniform(-0.8, 0.8, size=(n_strands, n_segments, 3))
    head = None
    if head_count:
        hq = rng.normal(size=(head_count, 4))
        head = HeadGaussians(
            means=rng.uniform(-spread, spread, size=(head_count, 3)),
            rotations=hq / np.linalg.norm(hq, axis=1, keepdims=True),
            scales=rng.uniform(0.01, 0.05, size=(head_count, 3)),
            opacities=rng.uniform(-1.0, 1.0, size=head_count),
            sh=0.3 * rng.normal(size=(head_count, 3, k)),
            tau=np.ones(head_count),
        )
    return HairModel(
        roots=roots,
        rotations=quats,
        lengths=rng.uniform(0.5 * seg_len, 1.5 * seg_len, size=(n_strands, n_segments)),
        opacities=rng.uniform(-1.5, 1.5, size=(n_strands, n_segments)),
        sh=sh,
        tau=np.ones((n_strands, n_segments)),
        sh_degree=sh_degree,
        head=head,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
