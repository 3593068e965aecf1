"""Reconstruction quality metrics: NRMSE and per-slice SSIM."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .projector import Volume

__all__ = ["nrmse", "ssim"]


def _check_pair(est: Volume, ref: Volume) -> None:
    if est.shape != ref.shape:
        raise ValueError(f"volume shapes differ: {est.shape} vs {ref.shape}")


def nrmse(est: Volume, ref: Volume) -> float:
    """L2 error of ``est`` normalized by the L2 norm of ``ref``."""
    _check_pair(est, ref)
    ref_norm = float(np.linalg.norm(ref.data.ravel()))
    if ref_norm == 0.0:
        raise ValueError("reference volume is identically zero")
    err = float(np.linalg.norm((est.data - ref.data).ravel()))
    return err / ref_norm


def _ssim_slice(a: np.ndarray, b: np.ndarray, window: int, c1: float, c2: float) -> float:
    filt = lambda img: ndimage.uniform_filter(img, size=window, mode="reflect")
    np_win = window * window
    cov_norm = np_win / (np_win - 1)  # sample (unbiased) covariance

    ua = filt(a)
    ub = filt(b)
    uaa = filt(a * a)
    ubb = filt(b * b)
    uab = filt(a * b)
    va = cov_norm * (uaa - ua * ua)
    vb = cov_norm * (ubb - ub * ub)
    vab = cov_norm * (uab - ua * ub)

    s = ((2 * ua * ub + c1) * (2 * vab + c2)) / ((ua * ua + ub * ub + c1) * (va + vb + c2))
    pad = (window - 1) // 2
    return float(s[pad:s.shape[0] - pad, pad:s.shape[1] - pad].mean())


def ssim(est: Volume, ref: Volume, window: int = 7,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over axial slices.

    Uses uniform local windows and the dynamic range of the reference
    volume (max - min, shared by all slices).  Filter responses within
    half a window of the slice border are excluded from the average.
    """
    _check_pair(est, ref)
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    nx, ny, _ = ref.shape
    if min(nx, ny) < window:
        raise ValueError("slices are smaller than the SSIM window")

    drange = float(ref.data.max() - ref.data.min())
    if drange == 0.0:
        raise ValueError("reference volume is constant (zero dynamic range)")
    c1 = (k1 * drange) ** 2
    c2 = (k2 * drange) ** 2

    nz = ref.shape[2]
    vals = [_ssim_slice(est.data[:, :, k], ref.data[:, :, k], window, c1, c2)
            for k in range(nz)]
    return float(np.mean(vals))
