"""Rate/quality comparison of a prefilter against the unfiltered anchor."""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

from .metrics import blockiness, psnr
from .transform import encode

DEFAULT_QPS = (22, 27, 32, 37)
CSV_COLUMNS = [
    "id", "qp", "bits_anchor", "bits_filtered", "bitrate_saving_pct",
    "psnr_anchor", "psnr_filtered", "psnr_drop", "blockiness_delta", "error",
]


@dataclass
class ReportRow:
    id: str
    qp: int
    bits_anchor: int = 0
    bits_filtered: int = 0
    bitrate_saving_pct: float = math.nan
    psnr_anchor: float = math.nan
    psnr_filtered: float = math.nan
    psnr_drop: float = math.nan
    blockiness_delta: float = math.nan
    error: str = ""

    @property
    def ok(self):
        return not self.error


def _stats(values):
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return {"min": math.nan, "mean": math.nan, "max": math.nan, "count": 0}
    return {"min": min(values), "mean": sum(values) / len(values), "max": max(values),
            "count": len(values)}


@dataclass
class RunReport:
    rows: List[ReportRow] = field(default_factory=list)
    config_hash: str = ""

    def aggregate(self, qp=None):
        rows = [r for r in self.rows if r.ok and (qp is None or r.qp == qp)]
        return {
            "bitrate_saving_pct": _stats([r.bitrate_saving_pct for r in rows]),
            "psnr_drop": _stats([r.psnr_drop for r in rows]),
            "blockiness_delta": _stats([r.blockiness_delta for r in rows]),
        }

    def qps(self):
        return sorted({r.qp for r in self.rows})

    def to_json(self):
        return {
            "config_hash": self.config_hash,
            "overall": self.aggregate(),
            "per_qp": {str(qp): self.aggregate(qp) for qp in self.qps()},
            "rows": len(self.rows),
            "failed": sum(not r.ok for r in self.rows),
        }


def compare(image_id, original, filtered, qp, codec):
    """One report row: encode anchor and filtered image at ``qp``."""
    cfg = replace(codec, qp=qp)
    anchor = encode(original, cfg)
    filt = encode(filtered, cfg)
    row = ReportRow(image_id, qp, anchor.bits, filt.bits)
    row.bitrate_saving_pct = 100.0 * (anchor.bits - filt.bits) / anchor.bits if anchor.bits else 0.0
    row.psnr_anchor = psnr(original, anchor.reconstructed)
    row.psnr_filtered = psnr(original, filt.reconstructed)
    if math.isinf(row.psnr_anchor) and math.isinf(row.psnr_filtered):
        row.psnr_drop = 0.0
    else:
        row.psnr_drop = row.psnr_anchor - row.psnr_filtered
    if original.width >= 16 and original.height >= 16:
        row.blockiness_delta = blockiness(filt.reconstructed) - blockiness(anchor.reconstructed)
    return row


def _evaluate_one(args):
    image_id, original, filter_fn, qps, codec = args
    try:
        filtered = filter_fn(original)
    except Exception as exc:  # recorded per row, not fatal for the run
        return [ReportRow(image_id, qp, error=f"{type(exc).__name__}: {exc}") for qp in qps]
    rows = []
    for qp in qps:
        try:
            rows.append(compare(image_id, original, filtered, qp, codec))
        except Exception as exc:
            rows.append(ReportRow(image_id, qp, error=f"{type(exc).__name__}: {exc}"))
    return rows


def evaluate(images, filter_fn, qps=DEFAULT_QPS, codec=None, jobs=1, config_hash=""):
    """Compare ``filter_fn(image)`` against the anchor for every image and QP.

    ``images`` is a sequence of ``(id, PlanarImage)``. The filter is applied
    once per image and the result reused at every QP. Row order follows the
    input order, then ``qps``.
    """
    from .transform import CodecConfig

    codec = codec or CodecConfig()
    work = [(i, img, filter_fn, tuple(qps), codec) for i, img in images]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_evaluate_one, work))
    else:
        chunks = [_evaluate_one(w) for w in work]
    return RunReport([row for chunk in chunks for row in chunk], config_hash)


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.6f}"
    return str(v)


def write_report(report, csv_path, json_path):
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])

    def clean(o):
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, float) and not math.isfinite(o):
            return None
        return o

    with open(json_path, "w") as f:
        json.dump(clean(report.to_json()), f, indent=1, sort_keys=True)
        f.write("\n")
