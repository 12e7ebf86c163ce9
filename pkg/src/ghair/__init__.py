"""Strand-based hair splatting: chained cylindrical Gaussians, differentiable
rasterization, fiber scattering, and an interactive editing service."""

from ghair.model import (
    CylindricalGaussian,
    HairStrand,
    HairModel,
    HeadGaussians,
    ScatterParams,
    chain_nodes,
    covariance,
    from_polyline,
)

__all__ = [
    "CylindricalGaussian",
    "HairStrand",
    "HairModel",
    "HeadGaussians",
    "ScatterParams",
    "chain_nodes",
    "covariance",
    "from_polyline",
]

__version__ = "0.1.0"
