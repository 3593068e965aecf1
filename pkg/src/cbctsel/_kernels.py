"""Numba kernels for the ray-driven cone-beam projector pair.

The forward kernel integrates trilinear samples at a fixed ~half-voxel step
along each source-to-pixel ray (midpoint rule over the clipped segment); the
backward kernels scatter the same interpolation weights, so the pair is the
exact matrix transpose of one another.

Determinism: forward accumulates per ray in sample order; backward
accumulates into a fixed number of chunk-private buffers that the caller
merges in chunk order, so results are bit-identical run to run regardless of
thread count.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

# Chunk-private scatter buffers per backprojection call; fixed per volume
# size (not per thread count) to keep summation order reproducible.
def scatter_chunks(vol_size: int) -> int:
    return 16 if vol_size <= 4_194_304 else 4


@njit(inline="always")
def _ray_segment(sx, sy, sz, px, py, pz,
                 xmin, xmax, ymin, ymax, zmin, zmax, step):
    """Clip the source->pixel segment to the voxel-center hull.

    Returns (dirx, diry, dirz, t_entry, h, m): unit direction, entry
    parameter, per-sample step length, and sample count (0 on a miss).
    """
    dx = px - sx
    dy = py - sy
    dz = pz - sz
    norm = math.sqrt(dx * dx + dy * dy + dz * dz)
    dx /= norm
    dy /= norm
    dz /= norm

    tmin = 0.0
    tmax = norm

    if dx != 0.0:
        ta = (xmin - sx) / dx
        tb = (xmax - sx) / dx
        if ta > tb:
            ta, tb = tb, ta
        if ta > tmin:
            tmin = ta
        if tb < tmax:
            tmax = tb
    elif sx < xmin or sx > xmax:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0

    if dy != 0.0:
        ta = (ymin - sy) / dy
        tb = (ymax - sy) / dy
        if ta > tb:
            ta, tb = tb, ta
        if ta > tmin:
            tmin = ta
        if tb < tmax:
            tmax = tb
    elif sy < ymin or sy > ymax:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0

    if dz != 0.0:
        ta = (zmin - sz) / dz
        tb = (zmax - sz) / dz
        if ta > tb:
            ta, tb = tb, ta
        if ta > tmin:
            tmin = ta
        if tb < tmax:
            tmax = tb
    elif sz < zmin or sz > zmax:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0

    if tmax <= tmin:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0

    length = tmax - tmin
    m = int(length / step + 0.5)
    if m < 1:
        m = 1
    h = length / m
    return dx, dy, dz, tmin, h, m


@njit(parallel=True, cache=True)
def forward_kernel(vol, xmin, xmax, ymin, ymax, zmin, zmax, inv_pitch,
                   srcs, detcs, uhats, det_pitch, step, out):
    nviews, nrows, ncols = out.shape
    nx, ny, nz = vol.shape
    rays_per_view = nrows * ncols
    total = nviews * rays_per_view
    for ray in prange(total):
        iview = ray // rays_per_view
        rem = ray % rays_per_view
        r = rem // ncols
        c = rem % ncols

        sx = srcs[iview, 0]
        sy = srcs[iview, 1]
        sz = srcs[iview, 2]
        u = (c - (ncols - 1) * 0.5) * det_pitch
        v = (r - (nrows - 1) * 0.5) * det_pitch
        px = detcs[iview, 0] + u * uhats[iview, 0]
        py = detcs[iview, 1] + u * uhats[iview, 1]
        pz = detcs[iview, 2] + v

        dx, dy, dz, t0, h, m = _ray_segment(
            sx, sy, sz, px, py, pz, xmin, xmax, ymin, ymax, zmin, zmax, step)
        acc = 0.0
        for k in range(m):
            t = t0 + (k + 0.5) * h
            gx = (sx + t * dx - xmin) * inv_pitch
            gy = (sy + t * dy - ymin) * inv_pitch
            gz = (sz + t * dz - zmin) * inv_pitch
            ix = int(math.floor(gx))
            iy = int(math.floor(gy))
            iz = int(math.floor(gz))
            if 0 <= ix < nx - 1 and 0 <= iy < ny - 1 and 0 <= iz < nz - 1:
                fx = gx - ix
                fy = gy - iy
                fz = gz - iz
                c00 = vol[ix, iy, iz] * (1.0 - fx) + vol[ix + 1, iy, iz] * fx
                c10 = vol[ix, iy + 1, iz] * (1.0 - fx) + vol[ix + 1, iy + 1, iz] * fx
                c01 = vol[ix, iy, iz + 1] * (1.0 - fx) + vol[ix + 1, iy, iz + 1] * fx
                c11 = vol[ix, iy + 1, iz + 1] * (1.0 - fx) + vol[ix + 1, iy + 1, iz + 1] * fx
                c0 = c00 * (1.0 - fy) + c10 * fy
                c1 = c01 * (1.0 - fy) + c11 * fy
                acc += c0 * (1.0 - fz) + c1 * fz
        out[iview, r, c] = acc * h


@njit(parallel=True, cache=True)
def backward_chunked_kernel(projs, xmin, xmax, ymin, ymax, zmin, zmax, inv_pitch,
                            srcs, detcs, uhats, det_pitch, step, bufs):
    """Scatter all views into ``bufs`` (nchunks private volumes); caller sums."""
    nviews, nrows, ncols = projs.shape
    nchunks = bufs.shape[0]
    nx = bufs.shape[1]
    ny = bufs.shape[2]
    nz = bufs.shape[3]
    rays_per_view = nrows * ncols
    total = nviews * rays_per_view
    chunk = (total + nchunks - 1) // nchunks
    for ci in prange(nchunks):
        lo = ci * chunk
        hi = lo + chunk
        if hi > total:
            hi = total
        buf = bufs[ci]
        for ray in range(lo, hi):
            iview = ray // rays_per_view
            rem = ray % rays_per_view
            r = rem // ncols
            c = rem % ncols
            y = projs[iview, r, c]

            sx = srcs[iview, 0]
            sy = srcs[iview, 1]
            sz = srcs[iview, 2]
            u = (c - (ncols - 1) * 0.5) * det_pitch
            v = (r - (nrows - 1) * 0.5) * det_pitch
            px = detcs[iview, 0] + u * uhats[iview, 0]
            py = detcs[iview, 1] + u * uhats[iview, 1]
            pz = detcs[iview, 2] + v

            dx, dy, dz, t0, h, m = _ray_segment(
                sx, sy, sz, px, py, pz, xmin, xmax, ymin, ymax, zmin, zmax, step)
            if m == 0 or y == 0.0:
                continue
            w = y * h
            for k in range(m):
                t = t0 + (k + 0.5) * h
                gx = (sx + t * dx - xmin) * inv_pitch
                gy = (sy + t * dy - ymin) * inv_pitch
                gz = (sz + t * dz - zmin) * inv_pitch
                ix = int(math.floor(gx))
                iy = int(math.floor(gy))
                iz = int(math.floor(gz))
                if 0 <= ix < nx - 1 and 0 <= iy < ny - 1 and 0 <= iz < nz - 1:
                    fx = gx - ix
                    fy = gy - iy
                    fz = gz - iz
                    wx0 = 1.0 - fx
                    wy0 = 1.0 - fy
                    wz0 = 1.0 - fz
                    buf[ix, iy, iz] += w * wx0 * wy0 * wz0
                    buf[ix + 1, iy, iz] += w * fx * wy0 * wz0
                    buf[ix, iy + 1, iz] += w * wx0 * fy * wz0
                    buf[ix + 1, iy + 1, iz] += w * fx * fy * wz0
                    buf[ix, iy, iz + 1] += w * wx0 * wy0 * fz
                    buf[ix + 1, iy, iz + 1] += w * fx * wy0 * fz
                    buf[ix, iy + 1, iz + 1] += w * wx0 * fy * fz
                    buf[ix + 1, iy + 1, iz + 1] += w * fx * fy * fz


@njit(parallel=True, cache=True)
def backward_each_kernel(projs, xmin, xmax, ymin, ymax, zmin, zmax, inv_pitch,
                         srcs, detcs, uhats, det_pitch, step, out_stack):
    """One backprojected volume per view; views run in parallel, rays in order."""
    nviews, nrows, ncols = projs.shape
    nx = out_stack.shape[1]
    ny = out_stack.shape[2]
    nz = out_stack.shape[3]
    for iview in prange(nviews):
        buf = out_stack[iview]
        sx = srcs[iview, 0]
        sy = srcs[iview, 1]
        sz = srcs[iview, 2]
        for r in range(nrows):
            for c in range(ncols):
                y = projs[iview, r, c]
                u = (c - (ncols - 1) * 0.5) * det_pitch
                v = (r - (nrows - 1) * 0.5) * det_pitch
                px = detcs[iview, 0] + u * uhats[iview, 0]
                py = detcs[iview, 1] + u * uhats[iview, 1]
                pz = detcs[iview, 2] + v

                dx, dy, dz, t0, h, m = _ray_segment(
                    sx, sy, sz, px, py, pz, xmin, xmax, ymin, ymax, zmin, zmax, step)
                if m == 0 or y == 0.0:
                    continue
                w = y * h
                for k in range(m):
                    t = t0 + (k + 0.5) * h
                    gx = (sx + t * dx - xmin) * inv_pitch
                    gy = (sy + t * dy - ymin) * inv_pitch
                    gz = (sz + t * dz - zmin) * inv_pitch
                    ix = int(math.floor(gx))
                    iy = int(math.floor(gy))
                    iz = int(math.floor(gz))
                    if 0 <= ix < nx - 1 and 0 <= iy < ny - 1 and 0 <= iz < nz - 1:
                        fx = gx - ix
                        fy = gy - iy
                        fz = gz - iz
                        wx0 = 1.0 - fx
                        wy0 = 1.0 - fy
                        wz0 = 1.0 - fz
                        buf[ix, iy, iz] += w * wx0 * wy0 * wz0
                        buf[ix + 1, iy, iz] += w * fx * wy0 * wz0
                        buf[ix, iy + 1, iz] += w * wx0 * fy * wz0
                        buf[ix + 1, iy + 1, iz] += w * fx * fy * wz0
                        buf[ix, iy, iz + 1] += w * wx0 * wy0 * fz
                        buf[ix + 1, iy, iz + 1] += w * fx * wy0 * fz
                        buf[ix, iy + 1, iz + 1] += w * wx0 * fy * fz
                        buf[ix + 1, iy + 1, iz + 1] += w * fx * fy * fz


@njit(parallel=True, cache=True)
def pairwise_l1_kernel(stack, out):
    """Mean absolute difference between every pair of flattened volumes."""
    n = stack.shape[0]
    size = stack.shape[1]
    npairs = n * (n - 1) // 2
    for p in prange(npairs):
        # unrank p -> (i, j), i < j, row-major over the strict upper triangle
        i = 0
        rem = p
        row = n - 1
        while rem >= row:
            rem -= row
            i += 1
            row -= 1
        j = i + 1 + rem
        acc = 0.0
        a = stack[i]
        b = stack[j]
        for k in range(size):
            d = a[k] - b[k]
            if d < 0.0:
                d = -d
            acc += d
        val = acc / size
        out[i, j] = val
        out[j, i] = val
