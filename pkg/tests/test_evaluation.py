import csv
import functools
import json
import math

import pytest

from jndprefilter.evaluation import CSV_COLUMNS, compare, evaluate, write_report
from jndprefilter.image import constant_image
from jndprefilter.jnd import JndConfig, prefilter
from jndprefilter.transform import CodecConfig, surrogate_encode


def _boom(img):
    raise RuntimeError("filter failed")


def test_compare_fields(corpus):
    img = corpus[0]
    filt = prefilter(img, JndConfig())
    row = compare("x", img, filt, 27, CodecConfig())
    a = surrogate_encode(img, CodecConfig(27)).bits
    f = surrogate_encode(filt, CodecConfig(27)).bits
    assert (row.bits_anchor, row.bits_filtered) == (a, f)
    assert row.bitrate_saving_pct == pytest.approx(100 * (a - f) / a)
    assert row.psnr_drop == pytest.approx(row.psnr_anchor - row.psnr_filtered)


def test_identity_filter_on_constant_image():
    img = constant_image(32, 32, 90)
    row = compare("c", img, img, 22, CodecConfig())
    assert row.bitrate_saving_pct == 0 and row.psnr_drop == 0


def test_evaluate_order_and_aggregate(corpus):
    images = [(f"i{k}", corpus[k]) for k in range(3)]
    f = functools.partial(prefilter, cfg=JndConfig())
    rep = evaluate(images, f, qps=(27, 37))
    assert [(r.id, r.qp) for r in rep.rows] == [(i, q) for i, _ in images for q in (27, 37)]
    agg = rep.aggregate(27)["bitrate_saving_pct"]
    vals = [r.bitrate_saving_pct for r in rep.rows if r.qp == 27]
    assert agg["count"] == 3 and agg["mean"] == pytest.approx(sum(vals) / 3)
    assert agg["min"] == min(vals) and agg["max"] == max(vals)


def test_errors_are_rows(corpus):
    rep = evaluate([("a", corpus[0])], _boom, qps=(22, 27))
    assert all("filter failed" in r.error for r in rep.rows)
    assert rep.aggregate()["psnr_drop"]["count"] == 0


def test_parallel_matches_serial(corpus):
    images = [(f"i{k}", corpus[k]) for k in range(3)]
    f = functools.partial(prefilter, cfg=JndConfig())
    a = evaluate(images, f, qps=(32,), jobs=1)
    b = evaluate(images, f, qps=(32,), jobs=2)
    assert [vars(r) for r in a.rows] == [vars(r) for r in b.rows]


def test_write_report(tmp_path):
    img = constant_image(32, 32)
    rep = evaluate([("c", img), ("e", img)], lambda x: x, qps=(27,))
    rep.rows[1].error = "x"
    write_report(rep, tmp_path / "r.csv", tmp_path / "r.json")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == CSV_COLUMNS and len(rows) == 3
    # identical reconstructions give infinite PSNR, which JSON stores as null
    assert rows[1][CSV_COLUMNS.index("psnr_anchor")] == "inf"
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["failed"] == 1 and d["rows"] == 2
