"""Synthetic scan bench: part phantoms, pore defects, and noisy polychromatic
measurements with polynomial beam-hardening linearization.

The nominal model (``cad``) is the designed part; the ground truth adds
randomly placed spherical pores of zero attenuation strictly inside the
part material.  Measurements follow a discrete-spectrum Beer-Lambert model
on the post-log scale with additive Gaussian noise; ``calibrate_linearization``
fits the monotone polynomial that maps the polychromatic response back to
effective monochromatic line integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConeBeamGeometry
from .projector import Projection, Volume, forward_project

__all__ = [
    "Box", "Cylinder", "Sphere",
    "PhantomSpec", "SpectrumModel",
    "default_part_solids", "make_phantom",
    "simulate_measurement", "calibrate_linearization", "linearize",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; center/size in fractional volume coordinates [0, 1]."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    value: float


@dataclass(frozen=True)
class Cylinder:
    """Circular cylinder along a volume axis ('x', 'y' or 'z'); fractional coords."""

    center: tuple[float, float, float]
    radius: float
    height: float
    axis: str
    value: float


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    value: float


def default_part_solids(attenuation: float = 0.02) -> tuple:
    """A machined-looking block: long flat faces, two drilled holes, one boss.

    The asymmetric outline gives the part dominant edge directions, which
    is what adaptive view scoring keys on.  ``attenuation`` is in mm^-1.
    """
    return (
        Box(center=(0.50, 0.50, 0.50), size=(0.64, 0.42, 0.70), value=attenuation),
        Box(center=(0.70, 0.56, 0.52), size=(0.16, 0.30, 0.34), value=1.6 * attenuation),
        Cylinder(center=(0.42, 0.50, 0.50), radius=0.07, height=0.72, axis="z", value=0.0),
        Cylinder(center=(0.56, 0.46, 0.36), radius=0.045, height=0.66, axis="x", value=0.0),
    )


@dataclass(frozen=True)
class PhantomSpec:
    """Recipe for the nominal part and its pore-bearing ground truth."""

    vol_shape: tuple[int, int, int]
    voxel_pitch: float
    solids: tuple = field(default_factory=default_part_solids)
    pore_count: int = 20
    pore_radius: tuple[float, float] = (1.0, 3.0)  # voxels
    seed: int = 0

    def __post_init__(self):
        if len(self.vol_shape) != 3 or any(int(n) < 1 for n in self.vol_shape):
            raise ValueError("vol_shape must be three positive counts")
        if self.voxel_pitch <= 0:
            raise ValueError("voxel pitch must be positive")
        if self.pore_count < 0:
            raise ValueError("pore count must be non-negative")
        rmin, rmax = self.pore_radius
        if not (0.0 < rmin <= rmax):
            raise ValueError("pore radius range must satisfy 0 < min <= max")


def _fractional_grid(shape):
    nx, ny, nz = shape
    fx = (np.arange(nx) + 0.5) / nx
    fy = (np.arange(ny) + 0.5) / ny
    fz = (np.arange(nz) + 0.5) / nz
    return np.meshgrid(fx, fy, fz, indexing="ij")


def _rasterize(solid, grids, shape):
    gx, gy, gz = grids
    if isinstance(solid, Box):
        cx, cy, cz = solid.center
        sx, sy, sz = solid.size
        return ((np.abs(gx - cx) <= sx / 2) & (np.abs(gy - cy) <= sy / 2)
                & (np.abs(gz - cz) <= sz / 2))
    if isinstance(solid, Cylinder):
        cx, cy, cz = solid.center
        axes = {"x": (gy - cy, gz - cz, gx - cx, shape[1], shape[2]),
                "y": (gx - cx, gz - cz, gy - cy, shape[0], shape[2]),
                "z": (gx - cx, gy - cy, gz - cz, shape[0], shape[1])}
        if solid.axis not in axes:
            raise ValueError(f"cylinder axis must be x, y or z, got {solid.axis!r}")
        a, b, along, _, _ = axes[solid.axis]
        # radius is in fractional units of the cross-section axes (circular
        # on cubic grids, elliptical otherwise)
        return ((a ** 2 + b ** 2 <= solid.radius ** 2)
                & (np.abs(along) <= solid.height / 2))
    if isinstance(solid, Sphere):
        cx, cy, cz = solid.center
        return (gx - cx) ** 2 + (gy - cy) ** 2 + (gz - cz) ** 2 <= solid.radius ** 2
    raise TypeError(f"unknown solid type {type(solid).__name__}")


def make_phantom(spec: PhantomSpec) -> tuple[Volume, Volume]:
    """Build (nominal model, ground truth with pores).

    Solids are applied in order, later ones overwriting earlier ones
    (drilled features are zero-valued solids).  Pores are spheres of zero
    attenuation rejection-sampled so the whole pore lies inside part
    material; placement is deterministic for a fixed seed.
    """
    shape = tuple(int(n) for n in spec.vol_shape)
    grids = _fractional_grid(shape)
    cad = np.zeros(shape, dtype=np.float64)
    for solid in spec.solids:
        cad[_rasterize(solid, grids, shape)] = solid.value

    truth = cad.copy()
    if spec.pore_count > 0:
        rng = np.random.default_rng(spec.seed)
        ix, iy, iz = np.meshgrid(*(np.arange(n) for n in shape), indexing="ij")
        placed = 0
        attempts = 0
        max_attempts = 200 * spec.pore_count
        rmin, rmax = spec.pore_radius
        while placed < spec.pore_count:
            attempts += 1
            if attempts > max_attempts:
                raise ValueError(
                    f"placed only {placed}/{spec.pore_count} pores after "
                    f"{max_attempts} attempts; part too small for the pore spec")
            r = rng.uniform(rmin, rmax)
            c = rng.uniform(0.0, 1.0, size=3) * np.array(shape)
            ball = ((ix - c[0]) ** 2 + (iy - c[1]) ** 2 + (iz - c[2]) ** 2) <= r * r
            if not ball.any():
                continue
            if np.all(cad[ball] > 0.0):
                truth[ball] = 0.0
                placed += 1

    pitch = spec.voxel_pitch
    return Volume(cad, pitch), Volume(truth, pitch)


@dataclass(frozen=True)
class SpectrumModel:
    """Discrete X-ray spectrum plus post-log Gaussian noise level.

    ``bins`` is a sequence of (fluence weight, attenuation scale) pairs;
    weights must be positive and sum to 1 (validated), scales positive.
    ``noise_sigma`` is the standard deviation added to the post-log
    projection values.
    """

    bins: tuple[tuple[float, float], ...]
    noise_sigma: float = 0.0

    def __post_init__(self):
        if len(self.bins) == 0:
            raise ValueError("spectrum needs at least one energy bin")
        w = np.array([b[0] for b in self.bins], dtype=np.float64)
        s = np.array([b[1] for b in self.bins], dtype=np.float64)
        if np.any(w <= 0.0) or np.any(s <= 0.0):
            raise ValueError("bin weights and scales must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"bin weights must sum to 1, got {w.sum():.6g}")
        if self.noise_sigma < 0.0:
            raise ValueError("noise sigma must be non-negative")

    def response(self, line_integrals: np.ndarray) -> np.ndarray:
        """Post-log polychromatic response to monochromatic line integrals."""
        ell = np.asarray(line_integrals, dtype=np.float64)
        acc = np.zeros_like(ell)
        for w, s in self.bins:
            acc += w * np.exp(-s * ell)
        return -np.log(acc)


def _noise_rng(seed: int, angle: float) -> np.random.Generator:
    # independent, reproducible stream per (seed, angle)
    key = int(round(angle * 1e6)) % (1 << 62)
    return np.random.default_rng(np.random.SeedSequence((int(seed), key)))


def simulate_measurement(truth: Volume, geom: ConeBeamGeometry, angle: float,
                         spectrum: SpectrumModel, seed: int = 0) -> Projection:
    """Noisy polychromatic measurement of ``truth`` at one view angle."""
    ell = forward_project(truth, geom, angle)
    p = spectrum.response(ell.data)
    if spectrum.noise_sigma > 0.0:
        rng = _noise_rng(seed, angle)
        p = p + rng.normal(0.0, spectrum.noise_sigma, size=p.shape)
    return Projection(p, angle)


def calibrate_linearization(spectrum: SpectrumModel, max_path: float,
                            degree: int = 3, samples: int = 256) -> np.ndarray:
    """Fit coefficients ``c[0..degree-1]`` of ``p -> sum_k c_k p^k`` (k = 1..degree)
    mapping the polychromatic response back to the line integral, by least
    squares over line integrals in [0, max_path].

    The fitted map is required to be monotone increasing over the sampled
    response range; a decreasing fit means the spectrum/degree combination
    is degenerate.
    """
    if max_path <= 0.0:
        raise ValueError("max_path must be positive")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    ell = np.linspace(0.0, max_path, samples)
    p = spectrum.response(ell)
    design = np.stack([p ** k for k in range(1, degree + 1)], axis=1)
    coeffs, _, rank, _ = np.linalg.lstsq(design, ell, rcond=None)
    if rank < degree:
        raise ValueError("degenerate linearization fit (rank-deficient design)")
    _check_monotone(coeffs, float(p.min()), float(p.max()))
    return coeffs


def _check_monotone(coeffs: np.ndarray, lo: float, hi: float) -> None:
    if hi <= lo:
        return
    p = np.linspace(lo, hi, 512)
    deriv = np.zeros_like(p)
    for k, c in enumerate(coeffs, start=1):
        deriv += k * c * p ** (k - 1)
    if np.any(deriv <= 0.0):
        raise ValueError(
            f"linearization map is not monotone over the data range [{lo:.4g}, {hi:.4g}]")


def linearize(proj: Projection, calib: np.ndarray) -> Projection:
    """Apply the beam-hardening correction polynomial to one measurement."""
    coeffs = np.asarray(calib, dtype=np.float64)
    if coeffs.ndim != 1 or coeffs.size < 1:
        raise ValueError("calibration coefficients must be a non-empty 1-D array")
    _check_monotone(coeffs, float(proj.data.min()), float(proj.data.max()))
    out = np.zeros_like(proj.data)
    for k, c in enumerate(coeffs, start=1):
        out += c * proj.data ** k
    return Projection(out, proj.angle)
