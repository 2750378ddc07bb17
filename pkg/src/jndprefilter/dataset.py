"""Codec-in-the-loop, IQA-guided training data generation.

For one image: prefilter at every candidate alpha, encode/decode the original
and each candidate, score 64x64 patches of the reconstructions, pick one alpha
per patch and compose the training image from the prefiltered (not decoded)
candidates.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .errors import ParseError, SelectionError
from .iqa import ORIG_TAG, candidate_tag, format_alpha
from .image import PlanarImage, assemble_patches, patch_origins
from .io import guess_format, load_image, save_image
from .jnd import JndConfig, edge_masks, prefilter
from .metrics import mae
from .transform import CodecConfig, encode

log = logging.getLogger(__name__)

MAE_GATE = 1.2


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    jnd: JndConfig = field(default_factory=JndConfig)
    codec: CodecConfig = field(default_factory=CodecConfig)
    epsilon: float = 0.1
    smooth_threshold: float = 1.5
    patch_size: int = 64

    def to_dict(self):
        return {
            "jnd": self.jnd.to_dict(),
            "codec": self.codec.codec_id,
            "epsilon": self.epsilon,
            "smooth_threshold": self.smooth_threshold,
            "patch_size": self.patch_size,
        }

    def digest(self, qp, iqa_name):
        d = self.to_dict()
        d["qp"] = qp
        d["iqa"] = iqa_name
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass
class PatchRecord:
    image_id: str
    origin: Tuple[int, int]
    smooth: bool
    mae_by_alpha: Dict[float, float]
    score_by_alpha: Dict[float, float]
    orig_score: float
    chosen_alpha: float

    def to_json(self):
        return {
            "origin": list(self.origin),
            "smooth": self.smooth,
            "mae": {format_alpha(a): v for a, v in sorted(self.mae_by_alpha.items())},
            "score": {format_alpha(a): v for a, v in sorted(self.score_by_alpha.items())},
            "orig_score": self.orig_score,
            "chosen_alpha": self.chosen_alpha,
        }

    @classmethod
    def from_json(cls, image_id, d):
        return cls(
            image_id=image_id,
            origin=(int(d["origin"][0]), int(d["origin"][1])),
            smooth=bool(d["smooth"]),
            mae_by_alpha={float(k): float(v) for k, v in d["mae"].items()},
            score_by_alpha={float(k): float(v) for k, v in d["score"].items()},
            orig_score=float(d["orig_score"]),
            chosen_alpha=float(d["chosen_alpha"]),
        )


# -- selection ---------------------------------------------------------------


def is_smooth(mae_at_min_alpha, threshold=1.5):
    return mae_at_min_alpha <= threshold


def select_scale(orig_score, candidates, smooth, epsilon=0.1):
    """Pick one alpha for a patch.

    ``candidates`` is a list of ``(alpha, score, mae)`` sorted by ascending
    alpha. For smooth patches, candidates whose MAE exceeds 1.2x the MAE of
    the smallest alpha are dropped first. Then: the closest score at or above
    ``orig_score`` (largest alpha among ties); else the largest alpha scoring
    within ``epsilon`` below it; else the smallest remaining alpha.
    """
    if not candidates:
        raise SelectionError("no candidates to select from")
    pool = list(candidates)
    if smooth:
        limit = MAE_GATE * pool[0][2]
        pool = [c for c in pool if c[2] <= limit]
    above = [c for c in pool if c[1] >= orig_score]
    if above:
        best = min(c[1] - orig_score for c in above)
        return max(c[0] for c in above if c[1] - orig_score == best)
    near = [c for c in pool if c[1] >= orig_score - epsilon]
    if near:
        return max(c[0] for c in near)
    return min(c[0] for c in pool)


# -- generation --------------------------------------------------------------


def generate_training_image(img, qp=27, cfg=None, iqa=None, image_id="image"):
    """Run the five-step generation flow on one image.

    Returns ``(training_image, records)``. The image is edge-padded to a
    multiple of the patch size for processing and cropped back at the end;
    chroma is carried over from ``img`` unchanged.
    """
    if cfg is None:
        cfg = PipelineConfig()
    if iqa is None:
        from .iqa import ProxyIqa

        iqa = ProxyIqa()
    ps = cfg.patch_size
    codec = replace(cfg.codec, qp=qp)
    alphas = cfg.jnd.alpha_set
    work = img.padded(ps)
    h, w = work.height, work.width

    minor = edge_masks(work.y, cfg.jnd)[2] if cfg.jnd.edge_preserve else None
    filtered = {a: prefilter(work, cfg.jnd.with_alpha(a), minor) for a in alphas}
    orig_rec = encode(work, codec).reconstructed.y
    cand_rec = {a: encode(filtered[a], codec).reconstructed.y for a in alphas}

    records = []
    chosen_patches = []
    for x0, y0 in patch_origins(h, w, ps):
        window = np.s_[y0 : y0 + ps, x0 : x0 + ps]
        ref = orig_rec[window]
        orig_score = float(iqa.score(image_id, (x0, y0), ORIG_TAG, ref))
        maes, scores = {}, {}
        for a in alphas:
            patch = cand_rec[a][window]
            maes[a] = mae(patch, ref)
            scores[a] = float(iqa.score(image_id, (x0, y0), candidate_tag(a), patch))
        smooth = is_smooth(maes[alphas[0]], cfg.smooth_threshold)
        chosen = select_scale(orig_score, [(a, scores[a], maes[a]) for a in alphas], smooth, cfg.epsilon)
        records.append(PatchRecord(image_id, (x0, y0), smooth, maes, scores, orig_score, chosen))
        chosen_patches.append(((x0, y0), filtered[chosen].y[window]))

    luma = assemble_patches(chosen_patches, (h, w))[: img.height, : img.width]
    return img.with_luma(luma), records


# -- manifest ----------------------------------------------------------------


@dataclass
class ImageEntry:
    image_id: str
    width: int
    height: int
    source: str
    train_file: str
    records: List[PatchRecord]


@dataclass
class DatasetManifest:
    qp: int
    codec: str
    alpha_set: Tuple[float, ...]
    config_hash: str
    patch_size: int = 64
    images: List[ImageEntry] = field(default_factory=list)
    tool_version: str = __version__

    def records(self):
        for entry in self.images:
            yield from entry.records

    def to_json(self):
        return {
            "tool_version": self.tool_version,
            "qp": self.qp,
            "codec": self.codec,
            "alpha_set": [float(a) for a in self.alpha_set],
            "config_hash": self.config_hash,
            "patch_size": self.patch_size,
            "images": [
                {
                    "image_id": e.image_id,
                    "width": e.width,
                    "height": e.height,
                    "source": e.source,
                    "train_file": e.train_file,
                    "patches": [r.to_json() for r in e.records],
                }
                for e in self.images
            ],
        }


def write_manifest(manifest, path):
    text = json.dumps(manifest.to_json(), sort_keys=True, indent=1)
    with open(path, "w") as f:
        f.write(text + "\n")


def read_manifest(path):
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not JSON: {exc}") from exc
    try:
        alpha_set = tuple(float(a) for a in d["alpha_set"])
        ps = int(d["patch_size"])
        m = DatasetManifest(
            qp=int(d["qp"]),
            codec=str(d["codec"]),
            alpha_set=alpha_set,
            config_hash=str(d["config_hash"]),
            patch_size=ps,
            tool_version=str(d["tool_version"]),
        )
        for e in d["images"]:
            records = [PatchRecord.from_json(e["image_id"], p) for p in e["patches"]]
            entry = ImageEntry(
                str(e["image_id"]), int(e["width"]), int(e["height"]),
                str(e["source"]), str(e["train_file"]), records,
            )
            _check_entry(entry, alpha_set, ps)
            m.images.append(entry)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"manifest schema violation: {exc!r}") from exc
    return m


def _check_entry(entry, alpha_set, ps):
    expected = patch_origins(entry.height, entry.width, ps)
    got = [r.origin for r in entry.records]
    if sorted(got) != sorted(expected) or len(set(got)) != len(got):
        raise ParseError(f"image {entry.image_id!r}: patches do not cover the grid exactly once")
    for r in entry.records:
        if r.chosen_alpha not in alpha_set:
            raise ParseError(f"image {entry.image_id!r}: chosen alpha {r.chosen_alpha} not in alpha set")


# -- directory driver --------------------------------------------------------

INPUT_EXTENSIONS = (".pgm", ".y4m")


def list_images(directory):
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(INPUT_EXTENSIONS)
                   and ".train." not in n)
    return [os.path.join(directory, n) for n in names]


def gen_dataset(in_dir, out_dir, qp=27, cfg=None, iqa=None, iqa_name="proxy"):
    """Generate training images for every PGM/Y4M in ``in_dir``."""
    cfg = cfg or PipelineConfig()
    if iqa is None:
        from .iqa import ProxyIqa

        iqa = ProxyIqa()
    os.makedirs(out_dir, exist_ok=True)
    manifest = DatasetManifest(
        qp=qp,
        codec=cfg.codec.codec_id,
        alpha_set=cfg.jnd.alpha_set,
        config_hash=cfg.digest(qp, iqa_name),
        patch_size=cfg.patch_size,
    )
    for path in list_images(in_dir):
        image_id = os.path.splitext(os.path.basename(path))[0]
        fmt = guess_format(path)
        img = load_image(path, fmt)
        train, records = generate_training_image(img, qp, cfg, iqa, image_id)
        out_name = f"{image_id}.train.{fmt}"
        save_image(train, os.path.join(out_dir, out_name), fmt)
        manifest.images.append(
            ImageEntry(image_id, img.width, img.height, os.path.abspath(path), out_name, records)
        )
        log.info("%s: %d patches, mean alpha %.2f", image_id, len(records),
                 np.mean([r.chosen_alpha for r in records]))
    write_manifest(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest
