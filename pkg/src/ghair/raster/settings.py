"""Rasterizer knobs, all config-exposed."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class RasterSettings:
    tile_size: int = 16
    # stop compositing a pixel once transmittance drops below this
    eps_t: float = 1e-6
    # isotropic dilation added to projected covariance diagonals, px^2
    eps_cov: float = 0.3
    z_near: float = 0.01
    # visibility culling extent, in projected standard deviations
    cull_sigma: float = 3.0
    # tile binning extent; wide enough that truncated tails are < 1e-12
    bin_sigma: float = 8.0
    # skip kernel evaluations with Mahalanobis^2 above this (w < 1.6e-28)
    q_cut: float = 128.0
    # ceiling on effective per-splat alpha; < 1 keeps backward well-posed
    alpha_max: float = 1.0
    # alpha below which orientation/validity outputs are flagged invalid
    eps_alpha: float = 0.5
    # resolution of the synthesized light view (odd keeps center rays exact)
    light_resolution: int = 511

    def validate(self) -> "RasterSettings":
        if self.tile_size < 1:
            raise ValueError("tile_size must be >= 1")
        if not 0.0 <= self.eps_t < 1.0:
            raise ValueError("eps_t must lie in [0, 1)")
        if self.eps_cov < 0:
            raise ValueError("eps_cov must be >= 0")
        if self.z_near <= 0:
            raise ValueError("z_near must be > 0")
        if not 0.0 < self.alpha_max <= 1.0:
            raise ValueError("alpha_max must lie in (0, 1]")
        if self.bin_sigma < self.cull_sigma:
            raise ValueError("bin_sigma must cover at least the culling extent")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "RasterSettings":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        return cls(**known).validate()

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}
