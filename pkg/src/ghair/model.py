"""Domain types for cylindrical-Gaussian hair.

A strand is a fixed root plus a chain of segments; each segment carries a
rotation (unit quaternion whose +z column is the tangent), a length, a
pre-sigmoid opacity, SH color coefficients and a cached light transmittance.
Segment centers are never stored: they are derived from the chain, which
keeps strands connected by construction.

Batched quantities live as arrays on HairModel (strand-major layout); the
per-segment/per-strand dataclasses are materialized views used by I/O and
tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ghair import quaternion

DEFAULT_DIAMETER = 1.0e-4


class DegenerateSegmentError(ValueError):
    """Raised for polylines with repeated consecutive points."""


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    pos = x >= 0
    safe = np.where(pos, -x, x)  # always <= 0, exp never overflows
    e = np.exp(safe)
    return np.where(pos, 1.0 / (1.0 + e), e / (1.0 + e))


def inverse_sigmoid(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p / (1.0 - p))


def sh_band_count(degree: int) -> int:
    return (degree + 1) ** 2


@dataclass
class CylindricalGaussian:
    """One hair segment: an anisotropic Gaussian with axial scale length and
    two transverse scales equal to the (model-wide, fixed) diameter."""

    rotation: np.ndarray  # (4,) quaternion, wxyz
    length: float
    diameter: float = DEFAULT_DIAMETER
    opacity: float = 0.0  # pre-sigmoid
    sh: np.ndarray = field(default_factory=lambda: np.zeros((3, 1)))
    tau: float = 1.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.sh = np.asarray(self.sh, dtype=np.float64)
        self.validate()

    def validate(self):
        if self.length <= 0:
            raise ValueError(f"segment length must be > 0, got {self.length}")
        if self.length < self.diameter:
            raise ValueError(
                f"cylinder shape requires length >= diameter "
                f"({self.length} < {self.diameter})"
            )
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    @property
    def direction(self) -> np.ndarray:
        return quaternion.rotate_z_axis(quaternion.normalize(self.rotation))

    @property
    def opacity_value(self) -> float:
        """Post-sigmoid opacity."""
        return float(sigmoid(self.opacity))


def covariance(g: CylindricalGaussian) -> np.ndarray:
    """3x3 covariance R S S^T R^T with S = diag(d, d, s)."""
    r = quaternion.to_matrix(quaternion.normalize(g.rotation))
    m = np.diag([g.diameter**2, g.diameter**2, g.length**2])
    return r @ m @ r.T


def batch_covariance(quats: np.ndarray, lengths: np.ndarray, diameter: float) -> np.ndarray:
    """Covariances for (K, 4) quaternions and (K,) lengths: (K, 3, 3)."""
    r = quaternion.to_matrix(quaternion.normalize(quats))
    d2 = diameter * diameter
    m = np.zeros(lengths.shape + (3, 3), dtype=np.float64)
    m[..., 0, 0] = d2
    m[..., 1, 1] = d2
    m[..., 2, 2] = lengths * lengths
    return np.einsum("...ij,...jk,...lk->...il", r, m, r)


@dataclass
class HairStrand:
    """Root plus chained segments. Arrays are segment-major."""

    root: np.ndarray  # (3,)
    rotations: np.ndarray  # (M, 4)
    lengths: np.ndarray  # (M,)
    opacities: np.ndarray  # (M,) pre-sigmoid
    sh: np.ndarray  # (M, 3, K)
    tau: np.ndarray  # (M,)
    diameter: float = DEFAULT_DIAMETER

    def __post_init__(self):
        self.root = np.asarray(self.root, dtype=np.float64)
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.lengths = np.asarray(self.lengths, dtype=np.float64)
        self.opacities = np.asarray(self.opacities, dtype=np.float64)
        self.sh = np.asarray(self.sh, dtype=np.float64)
        self.tau = np.asarray(self.tau, dtype=np.float64)

    @property
    def num_segments(self) -> int:
        return self.rotations.shape[0]

    @property
    def segments(self) -> list[CylindricalGaussian]:
        return [
            CylindricalGaussian(
                rotation=self.rotations[i],
                length=float(self.lengths[i]),
                diameter=self.diameter,
                opacity=float(self.opacities[i]),
                sh=self.sh[i],
                tau=float(self.tau[i]),
            )
            for i in range(self.num_segments)
        ]

    @property
    def directions(self) -> np.ndarray:
        return quaternion.rotate_z_axis(quaternion.normalize(self.rotations))


def chain_nodes(strand: HairStrand) -> np.ndarray:
    """Node polyline (M+1, 3): node_0 = root, node_i = node_{i-1} + s_i d_i."""
    d = strand.directions
    steps = strand.lengths[:, None] * d
    nodes = np.empty((strand.num_segments + 1, 3), dtype=np.float64)
    nodes[0] = strand.root
    np.cumsum(steps, axis=0, out=nodes[1:])
    nodes[1:] += strand.root
    return nodes


def segment_centers(strand: HairStrand) -> np.ndarray:
    """Gaussian centers mu_i = node_{i-1} + s_i d_i / 2, shape (M, 3)."""
    nodes = chain_nodes(strand)
    return 0.5 * (nodes[:-1] + nodes[1:])


def from_polyline(
    points: np.ndarray,
    diameter: float = DEFAULT_DIAMETER,
    opacity: float = 0.0,
    sh_degree: int = 0,
) -> HairStrand:
    """Build a strand whose chain reproduces the given polyline.

    Rotation of each segment is the minimal (roll-free) rotation taking +z to
    the segment direction; opacity and SH start at defaults.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] < 2:
        raise ValueError("polyline must be (n>=2, 3)")
    deltas = np.diff(points, axis=0)
    lengths = np.linalg.norm(deltas, axis=1)
    if np.any(lengths < 1e-12):
        bad = int(np.argmax(lengths < 1e-12))
        raise DegenerateSegmentError(
            f"consecutive points {bad} and {bad + 1} coincide"
        )
    dirs = deltas / lengths[:, None]
    m = len(lengths)
    k = sh_band_count(sh_degree)
    return HairStrand(
        root=points[0],
        rotations=quaternion.from_z_to(dirs),
        lengths=lengths,
        opacities=np.full(m, opacity),
        sh=np.zeros((m, 3, k)),
        tau=np.ones(m),
        diameter=diameter,
    )


@dataclass
class ScatterParams:
    """Fiber scattering controls: lobe widths from roughness, the specular
    shift, the reflection index, and artist gains per lobe."""

    roughness: float = 0.3
    shift: float = 0.035  # radians
    eta: float = 1.55
    gain_r: float = 1.0
    gain_tt: float = 1.0
    gain_trt: float = 1.0

    def validate(self):
        vals = [self.roughness, self.shift, self.eta, self.gain_r, self.gain_tt, self.gain_trt]
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("scatter parameters must be finite")
        if not 0.0 < self.roughness <= 1.0:
            raise ValueError(f"roughness must lie in (0, 1], got {self.roughness}")
        if min(self.gain_r, self.gain_tt, self.gain_trt) < 0:
            raise ValueError("lobe gains must be >= 0")
        return self

    def to_dict(self) -> dict:
        return {
            "roughness": self.roughness,
            "shift": self.shift,
            "eta": self.eta,
            "gains": [self.gain_r, self.gain_tt, self.gain_trt],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScatterParams":
        gains = d.get("gains", [1.0, 1.0, 1.0])
        return cls(
            roughness=float(d.get("roughness", 0.3)),
            shift=float(d.get("shift", 0.035)),
            eta=float(d.get("eta", 1.55)),
            gain_r=float(gains[0]),
            gain_tt=float(gains[1]),
            gain_trt=float(gains[2]),
        ).validate()


@dataclass
class HeadGaussians:
    """Frozen generic 3D Gaussians for face/body background."""

    means: np.ndarray  # (H, 3)
    rotations: np.ndarray  # (H, 4)
    scales: np.ndarray  # (H, 3) standard deviations, > 0
    opacities: np.ndarray  # (H,) pre-sigmoid
    sh: np.ndarray  # (H, 3, K)
    tau: np.ndarray  # (H,)

    def __post_init__(self):
        for name in ("means", "rotations", "scales", "opacities", "sh", "tau"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    @property
    def count(self) -> int:
        return self.means.shape[0]

    @classmethod
    def empty(cls, sh_degree: int = 0) -> "HeadGaussians":
        k = sh_band_count(sh_degree)
        return cls(
            means=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            scales=np.zeros((0, 3)),
            opacities=np.zeros(0),
            sh=np.zeros((0, 3, k)),
            tau=np.zeros(0),
        )


@dataclass
class HairModel:
    """Strand set with uniform nodes-per-strand, plus a frozen head set.

    Strand arrays are (N, M, ...) with M = nodes_per_strand - 1 segments.
    """

    roots: np.ndarray  # (N, 3)
    rotations: np.ndarray  # (N, M, 4)
    lengths: np.ndarray  # (N, M)
    opacities: np.ndarray  # (N, M) pre-sigmoid
    sh: np.ndarray  # (N, M, 3, K)
    tau: np.ndarray  # (N, M)
    diameter: float = DEFAULT_DIAMETER
    sh_degree: int = 0
    head: HeadGaussians | None = None
    scalp: "object | None" = None  # ghair.mesh.TriangleMesh when present

    def __post_init__(self):
        for name in ("roots", "rotations", "lengths", "opacities", "sh", "tau"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.head is None:
            self.head = HeadGaussians.empty(self.sh_degree)
        k = sh_band_count(self.sh_degree)
        if self.sh.shape[-1] != k:
            raise ValueError(
                f"sh has {self.sh.shape[-1]} bands, expected {k} for degree {self.sh_degree}"
            )

    @property
    def num_strands(self) -> int:
        return self.roots.shape[0]

    @property
    def segments_per_strand(self) -> int:
        return self.rotations.shape[1]

    @property
    def nodes_per_strand(self) -> int:
        return self.segments_per_strand + 1

    @property
    def num_hair_gaussians(self) -> int:
        return self.num_strands * self.segments_per_strand

    def strand(self, i: int) -> HairStrand:
        return HairStrand(
            root=self.roots[i],
            rotations=self.rotations[i],
            lengths=self.lengths[i],
            opacities=self.opacities[i],
            sh=self.sh[i],
            tau=self.tau[i],
            diameter=self.diameter,
        )

    def strands(self) -> list[HairStrand]:
        return [self.strand(i) for i in range(self.num_strands)]

    def directions(self) -> np.ndarray:
        """Unit tangents, (N, M, 3)."""
        return quaternion.rotate_z_axis(quaternion.normalize(self.rotations))

    def nodes(self) -> np.ndarray:
        """All strand polylines, (N, M+1, 3)."""
        d = self.directions()
        steps = self.lengths[..., None] * d
        n, m = steps.shape[0], steps.shape[1]
        nodes = np.empty((n, m + 1, 3), dtype=np.float64)
        nodes[:, 0] = self.roots
        np.cumsum(steps, axis=1, out=nodes[:, 1:])
        nodes[:, 1:] += self.roots[:, None, :]
        return nodes

    def centers(self) -> np.ndarray:
        """Segment Gaussian centers, (N, M, 3)."""
        nodes = self.nodes()
        return 0.5 * (nodes[:, :-1] + nodes[:, 1:])

    def normalized_rotations(self) -> np.ndarray:
        return quaternion.normalize(self.rotations)

    def renormalize_rotations(self) -> None:
        self.rotations = quaternion.normalize(self.rotations)

    def copy(self) -> "HairModel":
        head = HeadGaussians(
            means=self.head.means.copy(),
            rotations=self.head.rotations.copy(),
            scales=self.head.scales.copy(),
            opacities=self.head.opacities.copy(),
            sh=self.head.sh.copy(),
            tau=self.head.tau.copy(),
        )
        return HairModel(
            roots=self.roots.copy(),
            rotations=self.rotations.copy(),
            lengths=self.lengths.copy(),
            opacities=self.opacities.copy(),
            sh=self.sh.copy(),
            tau=self.tau.copy(),
            diameter=self.diameter,
            sh_degree=self.sh_degree,
            head=head,
            scalp=self.scalp,
        )

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        """Center and radius covering all hair nodes and head means."""
        pts = [self.nodes().reshape(-1, 3)] if self.num_strands else []
        if self.head.count:
            pts.append(self.head.means)
        if not pts:
            return np.zeros(3), 1.0
        allp = np.concatenate(pts, axis=0)
        lo, hi = allp.min(axis=0), allp.max(axis=0)
        center = 0.5 * (lo + hi)
        radius = float(np.linalg.norm(allp - center, axis=1).max())
        return center, max(radius, 1e-9)

    @classmethod
    def from_strands(
        cls,
        strands: list[HairStrand],
        sh_degree: int = 0,
        head: HeadGaussians | None = None,
        scalp=None,
    ) -> "HairModel":
        if not strands:
            k = sh_band_count(sh_degree)
            return cls(
                roots=np.zeros((0, 3)),
                rotations=np.zeros((0, 0, 4)),
                lengths=np.zeros((0, 0)),
                opacities=np.zeros((0, 0)),
                sh=np.zeros((0, 0, 3, k)),
                tau=np.zeros((0, 0)),
                sh_degree=sh_degree,
                head=head,
                scalp=scalp,
            )
        m = strands[0].num_segments
        if any(s.num_segments != m for s in strands):
            raise ValueError("model strands must share a segment count")
        return cls(
            roots=np.stack([s.root for s in strands]),
            rotations=np.stack([s.rotations for s in strands]),
            lengths=np.stack([s.lengths for s in strands]),
            opacities=np.stack([s.opacities for s in strands]),
            sh=np.stack([s.sh for s in strands]),
            tau=np.stack([s.tau for s in strands]),
            diameter=strands[0].diameter,
            sh_degree=sh_degree,
            head=head,
            scalp=scalp,
        )
