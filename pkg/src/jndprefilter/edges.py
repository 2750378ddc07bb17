"""Canny edges at two strengths and minor-edge restoration.

Edge masks are ``uint8`` arrays of 0/1 with the luma plane's shape.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import DimensionError

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], np.float64)
_SOBEL_Y = _SOBEL_X.T


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 1.4
    low: float = 60.0
    high: float = 120.0
    label: str = "main"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.low < self.high:
            raise ValueError(f"need 0 < low < high, got {self.low}, {self.high}")


MAIN = CannyParams(1.4, 60.0, 120.0, "main")
DETAIL = CannyParams(1.4, 20.0, 60.0, "detail")


def gaussian_kernel5(sigma):
    r = np.arange(-2, 3, dtype=np.float64)
    g = np.exp(-(r**2) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def gradients(plane, sigma):
    """Sobel gradients of the 5x5-Gaussian-smoothed plane (replicated borders)."""
    x = np.asarray(plane, dtype=np.float64)
    blurred = ndimage.correlate(x, gaussian_kernel5(sigma), mode="nearest")
    gx = ndimage.correlate(blurred, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(blurred, _SOBEL_Y, mode="nearest")
    return gx, gy


def canny(plane, params=MAIN):
    """Binary Canny edge mask.

    Non-maximum suppression uses four direction bins; hysteresis keeps weak
    pixels (>= low) 8-connected to a strong pixel (>= high).
    """
    plane = np.asarray(plane)
    if plane.shape[0] < 8 or plane.shape[1] < 8:
        raise DimensionError("canny needs at least 8x8 samples")
    gx, gy = gradients(plane, params.sigma)
    mag = np.hypot(gx, gy)
    thin = kernels.nms(gx, gy, mag)
    return kernels.hysteresis(thin, float(params.low), float(params.high))


def dilate(mask, radius):
    if radius <= 0:
        return mask.astype(np.uint8)
    size = 2 * radius + 1
    return ndimage.binary_dilation(mask.astype(bool), np.ones((size, size), bool)).astype(np.uint8)


def minor_edge_mask(main, detail, radius=1):
    """``detail AND NOT main``, dilated by a ``(2r+1)``-square element."""
    main, detail = np.asarray(main), np.asarray(detail)
    if main.shape != detail.shape:
        raise DimensionError(f"mask shapes differ: {main.shape} vs {detail.shape}")
    minor = detail.astype(bool) & ~main.astype(bool)
    return dilate(minor, radius)


def preserve_edges(original, filtered, minor):
    """Take ``original`` where ``minor`` is set, ``filtered`` elsewhere."""
    original, filtered, minor = np.asarray(original), np.asarray(filtered), np.asarray(minor)
    if not (original.shape == filtered.shape == minor.shape):
        raise DimensionError("original, filtered and mask must share a shape")
    return np.where(minor.astype(bool), original, filtered)
