"""Fidelity and artifact metrics on luma planes."""

import math

import numpy as np

from .errors import DimensionError
from .image import PlanarImage


def _luma(x):
    return x.y if isinstance(x, PlanarImage) else np.asarray(x)


def _pair(a, b):
    a, b = _luma(a), _luma(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a.astype(np.float64), b.astype(np.float64)


def mae(a, b):
    """Mean absolute difference of two equally sized planes."""
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def mse(a, b):
    a, b = _pair(a, b)
    return float(np.mean(np.square(a - b)))


def psnr(a, b, peak=255.0):
    """Luma PSNR in dB; ``math.inf`` for identical inputs."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def _second_diffs(plane, axis):
    # centre index c of each second difference p[c-1] - 2 p[c] + p[c+1]
    d = np.abs(np.diff(plane, n=2, axis=axis))
    centres = np.arange(1, plane.shape[axis] - 1)
    on_boundary = (centres % 8 == 7) | (centres % 8 == 0)
    return d, on_boundary


def blockiness(img):
    """Excess second-difference energy at 8x8 block boundaries.

    For every row and column, second differences centred on the two samples
    that straddle an 8-aligned boundary are averaged and compared with the
    average at all other offsets. The difference is clamped at zero.
    """
    y = _luma(img).astype(np.float64)
    if y.shape[0] < 16 or y.shape[1] < 16:
        raise DimensionError("blockiness needs at least 16x16 samples")
    dh, bh = _second_diffs(y, axis=1)
    dv, bv = _second_diffs(y, axis=0)
    on = np.concatenate([dh[:, bh].ravel(), dv[bv, :].ravel()])
    off = np.concatenate([dh[:, ~bh].ravel(), dv[~bv, :].ravel()])
    return max(float(on.mean() - off.mean()), 0.0)


def seam_score(img, stride=64):
    """Like :func:`blockiness` but probing boundaries every ``stride`` pixels."""
    y = _luma(img).astype(np.float64)
    on, off = [], []
    for axis in (0, 1):
        d = np.abs(np.diff(y, n=2, axis=axis))
        centres = np.arange(1, y.shape[axis] - 1)
        mask = (centres % stride == stride - 1) | (centres % stride == 0)
        take = (lambda m: d[m, :]) if axis == 0 else (lambda m: d[:, m])
        on.append(take(mask).ravel())
        off.append(take(~mask).ravel())
    on, off = np.concatenate(on), np.concatenate(off)
    if on.size == 0:
        return 0.0
    return max(float(on.mean() - off.mean()), 0.0)
