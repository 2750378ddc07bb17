"""Deterministic synthetic test images.

Each image mixes 1/f texture, smooth gradients, flat regions with hard-edged
shapes and a patch of fine high-frequency detail, which is enough to exercise
masking, edge preservation and the codec without shipping real photographs.
"""

import numpy as np
from scipy import ndimage

from .image import PlanarImage, chroma_shape


def _pink_noise(rng, h, w, beta):
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    f = np.sqrt(fx * fx + fy * fy)
    f[0, 0] = 1.0
    spectrum = (rng.standard_normal((h, w // 2 + 1)) + 1j * rng.standard_normal((h, w // 2 + 1))) / f**beta
    spectrum[0, 0] = 0
    x = np.fft.irfft2(spectrum, s=(h, w))
    return x / (x.std() + 1e-12)


def synthetic_luma(rng, height, width):
    yy, xx = np.mgrid[0:height, 0:width] / max(height, width)
    base = 110 + 50 * rng.uniform(-1, 1) * xx + 40 * rng.uniform(-1, 1) * yy
    base = base + 18 * _pink_noise(rng, height, width, rng.uniform(1.0, 1.6))
    # flat-ish shapes with hard edges
    for _ in range(rng.integers(2, 5)):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        ry, rx = rng.uniform(0.08, 0.3) * height, rng.uniform(0.08, 0.3) * width
        inside = ((np.arange(height)[:, None] - cy) / ry) ** 2 + ((np.arange(width)[None, :] - cx) / rx) ** 2 <= 1
        if rng.random() < 0.5:
            inside = (np.abs(np.arange(height)[:, None] - cy) < ry) & (np.abs(np.arange(width)[None, :] - cx) < rx)
        level = rng.uniform(30, 220)
        shade = level + 6 * _pink_noise(rng, height, width, 2.0)
        base = np.where(inside, shade, base)
    # fine texture region ("foliage")
    th, tw = int(rng.uniform(0.3, 0.6) * height), int(rng.uniform(0.3, 0.6) * width)
    ty, tx = rng.integers(0, height - th + 1), rng.integers(0, width - tw + 1)
    tex = ndimage.gaussian_filter(rng.standard_normal((th, tw)), 0.7)
    base[ty : ty + th, tx : tx + tw] += rng.uniform(15, 35) * tex / (tex.std() + 1e-12)
    return np.clip(np.round(base), 16, 235).astype(np.uint8)


def synthetic_image(rng, height=128, width=128, chroma=True):
    y = synthetic_luma(rng, height, width)
    if not chroma:
        return PlanarImage(y)
    ch, cw = chroma_shape(height, width)
    planes = []
    for _ in range(2):
        c = 128 + 20 * _pink_noise(rng, ch, cw, 2.0)
        planes.append(np.clip(np.round(c), 16, 240).astype(np.uint8))
    return PlanarImage(y, planes[0], planes[1])


def synthetic_corpus(count=20, height=128, width=128, seed=0, chroma=True):
    rng = np.random.default_rng(seed)
    return [synthetic_image(rng, height, width, chroma) for _ in range(count)]
