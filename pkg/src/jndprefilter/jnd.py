"""DCT-domain JND prefilter: per-block threshold, frequency weighting,
soft shrinkage, 4-pixel-shifted overlap and minor-edge restoration."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Tuple

import numpy as np

from . import kernels
from .edges import DETAIL, MAIN, CannyParams, canny, minor_edge_mask, preserve_edges
from .errors import ConfigError, DimensionError
from .image import PlanarImage, pad_to_multiple

DEFAULT_ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 11))


def frequency_band(u, v):
    return u + v


def default_weights():
    """0 at DC, 0.5 for bands 1-2, 1.0 for bands 3-7, 1.5 for bands 8-14."""
    w = np.empty((8, 8))
    for u in range(8):
        for v in range(8):
            b = u + v
            w[u, v] = 0.0 if b == 0 else 0.5 if b <= 2 else 1.0 if b <= 7 else 1.5
    return w


def validate_weights(w):
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (8, 8):
        raise ConfigError(f"weight matrix must be 8x8, got {w.shape}")
    if not np.all(np.isfinite(w)) or w.min() < 0:
        raise ConfigError("weights must be finite and non-negative")
    if w[0, 0] != 0:
        raise ConfigError("DC weight must be 0")
    # nondecreasing along u and along v covers every path of increasing band
    if np.any(np.diff(w, axis=0) < 0) or np.any(np.diff(w, axis=1) < 0):
        raise ConfigError("weights must not decrease towards higher frequencies")
    return w


@dataclass(frozen=True)
class BaseJndModel:
    c0: float = 4.0
    gamma: float = 1.0
    kappa: float = 2.0

    def __post_init__(self):
        if self.c0 <= 0 or self.gamma < 0 or self.kappa < 0:
            raise ConfigError("need c0 > 0, gamma >= 0, kappa >= 0")


@dataclass(frozen=True, eq=False)
class JndConfig:
    alpha: float = 1.0
    weights: np.ndarray = field(default_factory=default_weights)
    base: BaseJndModel = field(default_factory=BaseJndModel)
    overlap: bool = True
    edge_preserve: bool = True
    canny_main: CannyParams = MAIN
    canny_detail: CannyParams = DETAIL
    dilate: int = 1
    alpha_set: Tuple[float, ...] = DEFAULT_ALPHAS

    def __post_init__(self):
        object.__setattr__(self, "weights", validate_weights(self.weights))
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.dilate < 0:
            raise ConfigError("dilate must be >= 0")
        alphas = tuple(float(a) for a in self.alpha_set)
        if not alphas or any(a <= 0 for a in alphas) or list(alphas) != sorted(set(alphas)):
            raise ConfigError("alpha_set must be distinct positive values in ascending order")
        object.__setattr__(self, "alpha_set", alphas)

    def with_alpha(self, alpha):
        return replace(self, alpha=float(alpha))

    def to_dict(self):
        d = {
            "alpha": self.alpha,
            "weights": self.weights.tolist(),
            "base": asdict(self.base),
            "overlap": self.overlap,
            "edge_preserve": self.edge_preserve,
            "canny_main": asdict(self.canny_main),
            "canny_detail": asdict(self.canny_detail),
            "dilate": self.dilate,
            "alpha_set": list(self.alpha_set),
        }
        return d

    @classmethod
    def from_dict(cls, d):
        known = {"alpha", "weights", "base", "overlap", "edge_preserve", "canny_main",
                 "canny_detail", "dilate", "alpha_set"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        try:
            if "base" in kw:
                kw["base"] = BaseJndModel(**kw["base"])
            for key in ("canny_main", "canny_detail"):
                if key in kw:
                    kw[key] = CannyParams(**kw[key])
            if "weights" in kw:
                kw["weights"] = np.asarray(kw["weights"], dtype=np.float64)
            if "alpha_set" in kw:
                kw["alpha_set"] = tuple(kw["alpha_set"])
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path):
    with open(path) as f:
        return JndConfig.from_dict(json.load(f))


# -- per-block pieces --------------------------------------------------------


def base_jnd(block, model=BaseJndModel()):
    """Per-block base threshold from luminance and contrast masking.

    ``E = c0 * (1 + gamma*|mean-128|/128) * (1 + kappa*std/128)`` with the
    population standard deviation of the 64 samples.
    """
    b = np.asarray(block, dtype=np.float64)
    mu, sigma = b.mean(), b.std()
    return model.c0 * (1 + model.gamma * abs(mu - 128) / 128) * (1 + model.kappa * sigma / 128)


def jnd_thresholds(energy, weights, alpha):
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    t = energy * alpha * np.asarray(weights, dtype=np.float64)
    t[0, 0] = 0.0
    return t


def shrink_block(coeffs, thresholds):
    """Soft-threshold each coefficient towards zero by its threshold."""
    c = np.asarray(coeffs, dtype=np.float64)
    t = np.asarray(thresholds, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("thresholds must be non-negative")
    return np.sign(c) * np.maximum(np.abs(c) - t, 0.0)


# -- whole-plane filters -----------------------------------------------------


def inject_plane(luma, cfg):
    """JND injection on a bare luma array; dims need not be multiples of 8."""
    luma = np.asarray(luma)
    if cfg.alpha == 0:
        return luma.copy()
    h, w = luma.shape
    padded = np.ascontiguousarray(pad_to_multiple(luma, 8))
    b = cfg.base
    out = kernels.jnd_inject(padded, cfg.weights, float(cfg.alpha), b.c0, b.gamma, b.kappa, kernels.DCT8)
    return out[:h, :w]


def inject_jnd(img, cfg):
    """8x8 JND injection on luma only; no overlap, no edge restoration."""
    return img.with_luma(inject_plane(img.y, cfg))


def overlap_plane(luma, cfg):
    luma = np.asarray(luma)
    h, w = luma.shape
    if h < 16 or w < 16:
        raise DimensionError("overlap filtering needs at least 16x16 samples")
    a = inject_plane(luma, cfg)
    if cfg.alpha == 0:
        return a
    b = inject_plane(luma[4 : h - 4, 4 : w - 4], cfg)
    out = a.copy()
    inner = a[4 : h - 4, 4 : w - 4].astype(np.int32) + b
    # (a + b) / 2 rounded half away from zero on non-negative integers
    out[4 : h - 4, 4 : w - 4] = ((inner + 1) // 2).astype(np.uint8)
    return out


def inject_with_overlap(img, cfg):
    """Average of the aligned result and one computed on a grid shifted by (4, 4)."""
    return img.with_luma(overlap_plane(img.y, cfg))


def edge_masks(luma, cfg):
    """Main, detail and minor masks used by :func:`prefilter`."""
    main = canny(luma, cfg.canny_main)
    detail = canny(luma, cfg.canny_detail)
    return main, detail, minor_edge_mask(main, detail, cfg.dilate)


def prefilter(img, cfg, minor=None):
    """Full training-data prefilter on luma; chroma passes through.

    ``minor`` may carry a precomputed minor-edge mask (it depends only on the
    original luma and the Canny settings, not on alpha).
    """
    filtered = overlap_plane(img.y, cfg) if cfg.overlap else inject_plane(img.y, cfg)
    if cfg.edge_preserve:
        if minor is None:
            minor = edge_masks(img.y, cfg)[2]
        filtered = preserve_edges(img.y, filtered, minor)
    return img.with_luma(filtered)
