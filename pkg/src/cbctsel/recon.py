"""Iterative reconstruction from the currently measured projections.

Simultaneous iterative reconstruction (SIRT) with row/column-sum
normalization:

    x <- x + relax * C * A^T R (y - A x)

where R and C are reciprocal row/column sums of the system matrix (zero
where a ray misses the volume or a voxel is never hit).  The update reuses
the projector pair, so adjoint consistency is inherited; with ``nonneg``
the iterate is clamped to >= 0 after every sweep.
"""

from __future__ import annotations

import numpy as np

from .geometry import ConeBeamGeometry
from .projector import (Projection, Volume, back_project_stack,
                        forward_project_stack)

__all__ = ["reconstruct_sirt"]


def reconstruct_sirt(projs: list[Projection], geom: ConeBeamGeometry,
                     iterations: int = 50, relax: float = 1.0,
                     nonneg: bool = True, init: Volume | None = None) -> Volume:
    """Reconstruct a volume from measured projections.

    ``init`` warm-starts the iteration (e.g. the previous acquisition
    step's estimate); identical inputs always produce bit-identical
    outputs.
    """
    if len(projs) == 0:
        raise ValueError("at least one projection is required")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not (0.0 < relax <= 2.0):
        raise ValueError("relaxation factor must lie in (0, 2]")
    for p in projs:
        if p.data.shape != (geom.det_rows, geom.det_cols):
            raise ValueError(
                f"projection shape {p.data.shape} does not match detector "
                f"({geom.det_rows}, {geom.det_cols})")

    angles = np.array([p.angle for p in projs], dtype=np.float64)
    y = np.stack([p.data for p in projs])

    ones_vol = Volume(np.ones(geom.vol_shape), geom.voxel_pitch)
    row_sums = forward_project_stack(ones_vol, geom, angles)
    rw = np.zeros_like(row_sums)
    hit = row_sums > 0.0
    rw[hit] = 1.0 / row_sums[hit]

    col_sums = back_project_stack(np.ones_like(y), geom, angles)
    cw = np.zeros_like(col_sums)
    seen = col_sums > 0.0
    cw[seen] = 1.0 / col_sums[seen]

    if init is None:
        x = np.zeros(geom.vol_shape, dtype=np.float64)
    else:
        if init.shape != geom.vol_shape:
            raise ValueError("init volume shape does not match geometry")
        x = init.data.copy()

    for _ in range(iterations):
        resid = y - forward_project_stack(Volume(x, geom.voxel_pitch), geom, angles)
        x += relax * cw * back_project_stack(rw * resid, geom, angles)
        if nonneg:
            np.maximum(x, 0.0, out=x)

    return Volume(x, geom.voxel_pitch)
