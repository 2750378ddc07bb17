"""Planar 8-bit Y/Cb/Cr images and 64x64 patch tiling."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, TilingError

Y_ONLY = "Y-only"
YUV420 = "4:2:0"


def chroma_shape(height, width):
    return (height + 1) // 2, (width + 1) // 2


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_uint8(x):
    """Round half away from zero and clamp to [0, 255]."""
    return np.clip(round_half_away(x), 0, 255).astype(np.uint8)


def pad_to_multiple(plane, multiple):
    """Edge-replicate ``plane`` on the bottom/right up to a multiple of ``multiple``."""
    h, w = plane.shape
    ph = -h % multiple
    pw = -w % multiple
    if ph == 0 and pw == 0:
        return plane
    return np.pad(plane, ((0, ph), (0, pw)), mode="edge")


@dataclass(frozen=True, eq=False)
class PlanarImage:
    """An 8-bit image stored as separate planes.

    ``y`` has shape ``(height, width)``. For 4:2:0 images ``cb``/``cr`` have
    shape ``(ceil(height/2), ceil(width/2))``; for Y-only images they are None.
    Planes are made read-only on construction so images can be shared freely.
    """

    y: np.ndarray
    cb: Optional[np.ndarray] = None
    cr: Optional[np.ndarray] = None
    subsampling: str = field(default="")

    def __post_init__(self):
        y = _as_plane(self.y, "y")
        object.__setattr__(self, "y", y)
        has_cb, has_cr = self.cb is not None, self.cr is not None
        if has_cb != has_cr:
            raise DimensionError("cb and cr must both be present or both absent")
        sub = self.subsampling or (YUV420 if has_cb else Y_ONLY)
        if sub not in (Y_ONLY, YUV420):
            raise ValueError(f"unsupported subsampling {sub!r}")
        if sub == Y_ONLY and has_cb:
            raise DimensionError("Y-only image cannot carry chroma planes")
        if sub == YUV420:
            if not has_cb:
                raise DimensionError("4:2:0 image requires chroma planes")
            expected = chroma_shape(*y.shape)
            for name in ("cb", "cr"):
                plane = _as_plane(getattr(self, name), name)
                if plane.shape != expected:
                    raise DimensionError(
                        f"{name} plane is {plane.shape}, expected {expected} for luma {y.shape}"
                    )
                object.__setattr__(self, name, plane)
        object.__setattr__(self, "subsampling", sub)

    @property
    def width(self):
        return self.y.shape[1]

    @property
    def height(self):
        return self.y.shape[0]

    @property
    def has_chroma(self):
        return self.subsampling == YUV420

    def with_luma(self, y):
        """Same chroma, new luma plane of identical dimensions."""
        y = np.asarray(y)
        if y.shape != self.y.shape:
            raise DimensionError(f"luma shape {y.shape} != {self.y.shape}")
        return PlanarImage(y, self.cb, self.cr, self.subsampling)

    def padded(self, multiple):
        """Edge-replicated copy whose luma dims are multiples of ``multiple``."""
        y = pad_to_multiple(self.y, multiple)
        if not self.has_chroma:
            return PlanarImage(y)
        ch, cw = chroma_shape(*y.shape)
        pad = lambda p: np.pad(p, ((0, ch - p.shape[0]), (0, cw - p.shape[1])), mode="edge")
        return PlanarImage(y, pad(self.cb), pad(self.cr), self.subsampling)

    def cropped(self, height, width):
        """Top-left ``height`` x ``width`` region (inverse of :meth:`padded`)."""
        if not self.has_chroma:
            return PlanarImage(self.y[:height, :width])
        ch, cw = chroma_shape(height, width)
        return PlanarImage(
            self.y[:height, :width], self.cb[:ch, :cw], self.cr[:ch, :cw], self.subsampling
        )

    def planes(self):
        if self.has_chroma:
            return [self.y, self.cb, self.cr]
        return [self.y]

    def equals(self, other):
        if self.subsampling != other.subsampling:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.planes(), other.planes()))


def _as_plane(plane, name):
    arr = np.asarray(plane)
    if arr.ndim != 2:
        raise DimensionError(f"{name} plane must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError(f"{name} samples outside [0, 255]")
        if np.issubdtype(arr.dtype, np.floating) and not np.array_equal(arr, np.round(arr)):
            raise ValueError(f"{name} samples must be integers")
        arr = arr.astype(np.uint8)
    else:
        arr = arr.copy()
    arr.setflags(write=False)
    return arr


def constant_image(height, width, value=128, chroma=True):
    y = np.full((height, width), value, np.uint8)
    if not chroma:
        return PlanarImage(y)
    c = np.full(chroma_shape(height, width), 128, np.uint8)
    return PlanarImage(y, c, c.copy())


# -- patches ---------------------------------------------------------------


def crop_patches(img, patch_size=64):
    """Split the luma plane into ``patch_size`` squares.

    Accepts a :class:`PlanarImage` or a 2-D luma array. The plane is padded by
    edge replication to a multiple of ``patch_size`` first. Returns a list of
    ``((x, y), patch)`` in raster order.
    """
    luma = img.y if isinstance(img, PlanarImage) else np.asarray(img)
    luma = pad_to_multiple(luma, patch_size)
    out = []
    for y0 in range(0, luma.shape[0], patch_size):
        for x0 in range(0, luma.shape[1], patch_size):
            out.append(((x0, y0), luma[y0 : y0 + patch_size, x0 : x0 + patch_size]))
    return out


def patch_origins(height, width, patch_size=64):
    """Origins ``(x, y)`` of the patch grid covering the padded plane."""
    hp = -(-height // patch_size) * patch_size
    wp = -(-width // patch_size) * patch_size
    return [(x, y) for y in range(0, hp, patch_size) for x in range(0, wp, patch_size)]


def assemble_patches(patches, shape):
    """Inverse of :func:`crop_patches`.

    ``shape`` is ``(height, width)`` of the plane to fill; ``patches`` must
    cover it exactly once, in any order. Raises :class:`TilingError` otherwise.
    """
    height, width = shape
    out = None
    covered = np.zeros((height, width), np.int32)
    for (x0, y0), patch in patches:
        patch = np.asarray(patch)
        ph, pw = patch.shape
        if x0 < 0 or y0 < 0 or x0 + pw > width or y0 + ph > height:
            raise TilingError(f"patch at ({x0}, {y0}) of size {pw}x{ph} exceeds {width}x{height}")
        if out is None:
            out = np.zeros((height, width), patch.dtype)
        out[y0 : y0 + ph, x0 : x0 + pw] = patch
        covered[y0 : y0 + ph, x0 : x0 + pw] += 1
    if out is None or covered.min() == 0:
        raise TilingError("patches leave gaps")
    if covered.max() > 1:
        raise TilingError("patches overlap")
    return out
