"""No-reference quality scores for 64x64 luma patches.

Two providers share one interface, ``provider.score(image_id, origin, tag, patch)``:
:class:`ProxyIqa` computes a cheap deterministic score from the pixels, and
:class:`FileIqa` looks up externally computed scores (e.g. NIMA means) from a
CSV. The proxy is a sharpness statistic, not a perceptual model.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import MissingScoreError, ParseError

ORIG_TAG = "orig-rec"
CSV_HEADER = ["image_id", "patch_x", "patch_y", "candidate", "score"]

# ringing penalty: weight and free allowance (gray levels of |second difference|)
RINGING_WEIGHT = 0.25
RINGING_ALLOWANCE = 8.0

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], np.float64)
_LAP_X = np.array([[1.0, -2.0, 1.0]])


def format_alpha(alpha):
    s = f"{float(alpha):.10g}"
    return s if ("." in s or "e" in s) else s + ".0"


def candidate_tag(alpha):
    return "alpha-" + format_alpha(alpha)


@dataclass(frozen=True)
class IqaScore:
    value: float
    provider: str


def proxy_statistics(patch):
    """Mean Sobel magnitude and mean absolute second difference.

    Borders use half-sample symmetric extension, so a 3x3 box blur with the
    same extension can never increase either statistic.
    """
    x = np.asarray(patch, dtype=np.float64)
    gx = ndimage.correlate(x, _SOBEL_X, mode="reflect")
    gy = ndimage.correlate(x, _SOBEL_X.T, mode="reflect")
    grad = float(np.mean(np.hypot(gx, gy)))
    lx = ndimage.correlate(x, _LAP_X, mode="reflect")
    ly = ndimage.correlate(x, _LAP_X.T, mode="reflect")
    ringing = float(0.5 * (np.mean(np.abs(lx)) + np.mean(np.abs(ly))))
    return grad, ringing


def proxy_score(patch):
    """Score in [0, 10): ``10 s / (s + 1)`` with
    ``s = max(grad - 0.25 * max(ringing - 8, 0), 0) / 32``."""
    grad, ringing = proxy_statistics(patch)
    s = max(grad - RINGING_WEIGHT * max(ringing - RINGING_ALLOWANCE, 0.0), 0.0) / 32.0
    return IqaScore(10.0 * s / (s + 1.0), "proxy")


class ProxyIqa:
    name = "proxy"

    def score(self, image_id, origin, tag, patch):
        return proxy_score(patch).value


class ScoreTable:
    """Immutable mapping ``(image_id, (x, y), tag) -> score``."""

    def __init__(self, entries=None, duplicates=0):
        self._entries = dict(entries or {})
        self.duplicates = duplicates

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        return key in self._entries

    def __getitem__(self, key):
        return self._entries[key]

    def get(self, image_id, origin, tag):
        key = (str(image_id), (int(origin[0]), int(origin[1])), tag)
        try:
            return self._entries[key]
        except KeyError:
            raise MissingScoreError(
                f"no score for image {image_id!r} patch {tuple(origin)} candidate {tag!r}"
            ) from None

    def items(self):
        return self._entries.items()


def file_scores(path):
    """Parse a score CSV; duplicate keys keep the last row and are counted."""
    entries, dups = {}, 0
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise ParseError(f"expected header {','.join(CSV_HEADER)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", line=lineno)
            image_id, px, py, tag, value = (c.strip() for c in row)
            try:
                key = (image_id, (int(px), int(py)), tag)
                score = float(value)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not math.isfinite(score):
                raise ParseError("score must be finite", line=lineno)
            if key in entries:
                dups += 1
            entries[key] = score
    return ScoreTable(entries, dups)


def write_scores(path, rows):
    """Write ``(image_id, (x, y), tag, score)`` rows in the CSV layout."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for image_id, (x, y), tag, score in rows:
            w.writerow([image_id, x, y, tag, repr(float(score))])


class FileIqa:
    name = "file"

    def __init__(self, table):
        self.table = table if isinstance(table, ScoreTable) else file_scores(table)

    def score(self, image_id, origin, tag, patch):
        return self.table.get(image_id, origin, tag)


def make_provider(name):
    """``proxy`` or ``file:PATH``."""
    if name == "proxy":
        return ProxyIqa()
    if name.startswith("file:"):
        return FileIqa(name[len("file:"):])
    raise ValueError(f"bad IQA provider {name!r}")
