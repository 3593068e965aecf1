"""Cone-beam acquisition geometry and candidate view grids.

Conventions (fixed throughout the package):

* The rotation axis is the volume z-axis and the world origin sits at the
  volume center.  Voxel ``(i, j, k)`` has its center at
  ``((i - (nx-1)/2) * pitch, (j - (ny-1)/2) * pitch, (k - (nz-1)/2) * pitch)``.
* View angles are in degrees and use the object-rotation convention: at
  angle ``theta`` the part has rotated by ``+theta`` about +z, which is
  equivalent to rotating the source/detector pair by ``-theta`` in the
  object frame.  At ``theta = 0`` the source sits at ``(-SOD, 0, 0)``, the
  flat detector is centered at ``(SDD - SOD, 0, 0)`` with its column axis
  along +y and its row axis along +z.
* Views span the full circle [0, 360): with a diverging beam, ``theta`` and
  ``theta + 180`` measure different ray sets and are kept distinct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ConeBeamGeometry", "AngleGrid", "make_geometry", "candidate_angles"]


@dataclass(frozen=True)
class ConeBeamGeometry:
    """Circular-trajectory cone-beam scan description.

    Distances are in mm.  ``source_object_dist`` (SOD) is the distance from
    the source to the rotation axis, ``source_detector_dist`` (SDD) from the
    source to the detector plane.  Use :func:`make_geometry` to construct a
    validated instance.
    """

    source_object_dist: float
    source_detector_dist: float
    det_rows: int
    det_cols: int
    det_pitch: float
    vol_shape: tuple[int, int, int]
    voxel_pitch: float

    @property
    def magnification(self) -> float:
        """Geometric scale factor SDD / SOD from the object plane to the detector."""
        return self.source_detector_dist / self.source_object_dist

    @property
    def det_width(self) -> float:
        """Detector extent along the column (transaxial) direction, mm."""
        return self.det_cols * self.det_pitch

    @property
    def det_height(self) -> float:
        """Detector extent along the row (axial) direction, mm."""
        return self.det_rows * self.det_pitch

    @property
    def vol_extent(self) -> tuple[float, float, float]:
        """Physical edge lengths of the reconstruction grid, mm."""
        nx, ny, nz = self.vol_shape
        return (nx * self.voxel_pitch, ny * self.voxel_pitch, nz * self.voxel_pitch)


def make_geometry(
    source_object_dist: float,
    source_detector_dist: float,
    det_rows: int,
    det_cols: int,
    det_pitch: float,
    vol_shape: tuple[int, int, int],
    voxel_pitch: float,
) -> ConeBeamGeometry:
    """Validate scan parameters and return an immutable geometry.

    Rejects non-positive lengths/counts, SDD <= SOD, volumes whose bounding
    sphere reaches the source circle, and volumes whose magnified footprint
    (extent times SDD/SOD, per axis) does not fit on the detector.  The
    footprint rule flags a mis-sized detector before any projection is
    attempted; content near the volume corners can still leave the detector
    at some angles, so keep phantoms away from the grid border.
    """
    if source_object_dist <= 0 or source_detector_dist <= 0:
        raise ValueError("source distances must be positive")
    if det_pitch <= 0 or voxel_pitch <= 0:
        raise ValueError("pixel and voxel pitches must be positive")
    if det_rows < 1 or det_cols < 1:
        raise ValueError("detector must have at least one row and one column")
    if len(vol_shape) != 3 or any(int(n) < 1 for n in vol_shape):
        raise ValueError(f"vol_shape must be three positive counts, got {vol_shape!r}")
    vol_shape = (int(vol_shape[0]), int(vol_shape[1]), int(vol_shape[2]))
    if source_detector_dist <= source_object_dist:
        raise ValueError(
            f"source-detector distance ({source_detector_dist} mm) must exceed "
            f"source-object distance ({source_object_dist} mm)"
        )

    nx, ny, nz = vol_shape
    half_diag = 0.5 * voxel_pitch * math.sqrt(nx * nx + ny * ny + nz * nz)
    if half_diag >= source_object_dist:
        raise ValueError(
            f"volume half-diagonal ({half_diag:.2f} mm) reaches the source orbit "
            f"(SOD {source_object_dist} mm); shrink the volume or move the source out"
        )

    mag = source_detector_dist / source_object_dist
    det_width = det_cols * det_pitch
    det_height = det_rows * det_pitch
    for extent, axis in ((nx * voxel_pitch, "x"), (ny * voxel_pitch, "y")):
        if extent * mag > det_width:
            raise ValueError(
                f"magnified volume footprint along {axis} ({extent * mag:.1f} mm) "
                f"exceeds the detector width ({det_width:.1f} mm): detector is mis-sized"
            )
    if nz * voxel_pitch * mag > det_height:
        raise ValueError(
            f"magnified volume footprint along z ({nz * voxel_pitch * mag:.1f} mm) "
            f"exceeds the detector height ({det_height:.1f} mm): detector is mis-sized"
        )

    return ConeBeamGeometry(
        source_object_dist=float(source_object_dist),
        source_detector_dist=float(source_detector_dist),
        det_rows=int(det_rows),
        det_cols=int(det_cols),
        det_pitch=float(det_pitch),
        vol_shape=vol_shape,
        voxel_pitch=float(voxel_pitch),
    )


@dataclass(frozen=True, eq=False)
class AngleGrid:
    """Ordered set of candidate view angles in degrees, each in [0, 360)."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=np.float64)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("angle grid must be a non-empty 1-D array")
        if np.any(a < 0.0) or np.any(a >= 360.0):
            raise ValueError("angles must lie in [0, 360)")
        if np.any(np.diff(a) <= 0.0):
            raise ValueError("angles must be strictly increasing (no duplicates)")
        a.flags.writeable = False
        object.__setattr__(self, "angles", a)

    def __len__(self) -> int:
        return int(self.angles.size)

    def index_of(self, angle: float, tol: float = 1e-9) -> int:
        """Grid index of ``angle``, or raise if it is not a grid member."""
        idx = int(np.argmin(np.abs(self.angles - angle)))
        if abs(self.angles[idx] - angle) > tol:
            raise ValueError(f"{angle} deg is not on the candidate grid")
        return idx


def candidate_angles(count: int) -> AngleGrid:
    """Uniform candidate grid: ``count`` angles evenly spaced over [0, 360)."""
    if count < 2:
        raise ValueError(f"need at least 2 candidate angles, got {count}")
    step = 360.0 / count
    return AngleGrid(np.arange(count, dtype=np.float64) * step)
