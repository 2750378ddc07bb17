"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import functools
import math
import time

import numpy as np
import pytest
from scipy import ndimage

from jndprefilter.corpus import synthetic_corpus
from jndprefilter.dataset import PipelineConfig, gen_dataset, generate_training_image, read_manifest, select_scale
from jndprefilter.evaluation import evaluate
from jndprefilter.io import save_image
from jndprefilter.iqnet import (
    IqnetModel,
    TrainConfig,
    apply_model,
    loss_and_gradients,
    macs_per_pixel,
    parameter_count,
    train,
)
from jndprefilter.jnd import JndConfig, edge_masks, inject_jnd, inject_with_overlap, prefilter
from jndprefilter.metrics import blockiness, mae
from jndprefilter.transform import CodecConfig, forward_dct8, inverse_dct8, surrogate_encode

ALPHAS = [round(0.1 * k, 1) for k in range(11)]
QPS = (22, 27, 32, 37)


def textbook_dct(blocks):
    """Direct double sum over (i, j) for every (u, v), vectorized over blocks."""
    n = np.arange(8)
    scale = np.where(n == 0, math.sqrt(1 / 8), math.sqrt(2 / 8))
    cos = np.cos((2 * n[None, :] + 1) * n[:, None] * math.pi / 16)  # [u, i]
    basis = np.einsum("u,v,ui,vj->uvij", scale, scale, cos, cos)
    return np.einsum("uvij,bij->buv", basis, blocks - 128.0)


def literal_rules(orig, cands, smooth, eps):
    remaining = [c for c in cands if not smooth or c[2] <= 1.2 * cands[0][2]]
    above = [c for c in remaining if c[1] >= orig]
    if above:
        gap = min(c[1] - orig for c in above)
        return max(c[0] for c in above if c[1] - orig == gap)
    near = [c for c in remaining if c[1] >= orig - eps]
    if near:
        return max(c[0] for c in near)
    return min(c[0] for c in remaining)


def test_criterion_01_dct(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    blocks = rng.integers(0, 256, (1000, 8, 8)).astype(np.float64)
    oracle = textbook_dct(blocks)
    oracle_err = trip_err = 0.0
    for b, ref in zip(blocks, oracle):
        c = forward_dct8(b)
        oracle_err = max(oracle_err, np.max(np.abs(c - ref)))
        trip_err = max(trip_err, np.max(np.abs(inverse_dct8(c) - b)))
    elapsed = time.perf_counter() - t0
    ok = oracle_err <= 1e-9 and trip_err <= 1e-9 and elapsed < 5
    acceptance(1, "DCT round trip and oracle", ok,
               f"oracle {oracle_err:.2e}, round trip {trip_err:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_identity_and_monotonicity(acceptance, corpus):
    t0 = time.perf_counter()
    identity = all(prefilter(img, JndConfig(alpha=0.0)).equals(img)
                   and inject_with_overlap(img, JndConfig(alpha=0.0)).equals(img)
                   and inject_jnd(img, JndConfig(alpha=0.0)).equals(img) for img in corpus)
    worst = 0.0
    for img in corpus:
        errs = [mae(prefilter(img, JndConfig(alpha=a, edge_preserve=False)), img) for a in ALPHAS]
        worst = max(worst, max(a - b for a, b in zip(errs, errs[1:])))
    elapsed = time.perf_counter() - t0
    ok = identity and worst <= 0.01 and elapsed < 30
    acceptance(2, "alpha=0 identity, MAE nondecreasing in alpha", ok,
               f"identity {identity}, worst MAE decrease {worst:.4f}, {elapsed:.1f}s")
    assert ok


def test_criterion_03_edge_preservation(acceptance, corpus):
    t0 = time.perf_counter()
    bad = 0
    for img in corpus:
        cfg = JndConfig()
        minor = edge_masks(img.y, cfg)[2] > 0
        out = prefilter(img, cfg).y
        plain = prefilter(img, JndConfig(edge_preserve=False)).y
        bad += int(np.count_nonzero(out[minor] != img.y[minor]))
        bad += int(np.count_nonzero(out[~minor] != plain[~minor]))
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 30
    acceptance(3, "minor-edge pixels restored exactly", ok, f"{bad} mismatched pixels, {elapsed:.1f}s")
    assert ok


def test_criterion_04_overlap_deblocking(acceptance, corpus):
    t0 = time.perf_counter()
    cfg = JndConfig(alpha=1.0)
    wins = sum(blockiness(inject_with_overlap(img, cfg)) <= blockiness(inject_jnd(img, cfg)) for img in corpus)
    elapsed = time.perf_counter() - t0
    frac = wins / len(corpus)
    ok = frac >= 0.9 and elapsed < 60
    acceptance(4, "overlap does not increase blockiness", ok, f"{wins}/{len(corpus)} images, {elapsed:.1f}s")
    assert ok


def test_criterion_05_selection(acceptance, corpus, tmp_path):
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    mismatches = smooth_cases = 0
    for _ in range(10000):
        n = int(rng.integers(1, 11))
        alphas = np.sort(rng.choice(np.arange(1, 11) / 10, n, replace=False))
        scores = np.round(rng.uniform(3, 7, n), 1)
        maes = rng.uniform(0.5, 3.0, n)
        cands = [(float(a), float(s), float(m)) for a, s, m in zip(alphas, scores, maes)]
        orig = float(np.round(rng.uniform(3, 7), 1))
        smooth = bool(rng.random() < 0.5)
        eps = float(rng.choice([0.0, 0.1, 0.2]))
        smooth_cases += smooth
        if select_scale(orig, cands, smooth, eps) != literal_rules(orig, cands, smooth, eps):
            mismatches += 1
    src = tmp_path / "in"
    src.mkdir()
    for k in range(3):
        save_image(corpus[k], src / f"img{k}.y4m")
    gen_dataset(str(src), str(tmp_path / "out"), 27)
    manifest = read_manifest(tmp_path / "out" / "manifest.json")
    smooth_records = [r for r in manifest.records() if r.smooth]
    gate_ok = all(r.mae_by_alpha[r.chosen_alpha] <= 1.2 * r.mae_by_alpha[0.1] for r in smooth_records)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and gate_ok and elapsed < 10
    acceptance(5, "selection matches rule oracle, smooth gate holds", ok,
               f"{mismatches} mismatches in 10000 ({smooth_cases} smooth), "
               f"{len(smooth_records)} smooth fixture patches, {elapsed:.1f}s")
    assert ok


def test_criterion_06_surrogate_codec(acceptance, corpus):
    t0 = time.perf_counter()
    antitone = True
    savings = []
    for img in corpus:
        bits = [surrogate_encode(img, CodecConfig(qp)).bits for qp in QPS]
        antitone &= all(a >= b for a, b in zip(bits, bits[1:]))
        filtered = prefilter(img, JndConfig(alpha=1.0))
        fb = surrogate_encode(filtered, CodecConfig(27)).bits
        savings.append(100.0 * (bits[1] - fb) / bits[1])
    elapsed = time.perf_counter() - t0
    frac = np.mean(np.array(savings) > 0)
    ok = antitone and frac >= 0.95 and elapsed < 120
    acceptance(6, "bits antitone in QP, prefiltered images cheaper", ok,
               f"antitone {antitone}, cheaper on {frac:.0%}, mean saving {np.mean(savings):.2f}%, {elapsed:.1f}s")
    assert ok


def test_criterion_07_architecture(acceptance):
    t0 = time.perf_counter()
    params, macs = parameter_count(16), macs_per_pixel(16)
    model_params = IqnetModel.initialize(16).num_parameters
    elapsed = time.perf_counter() - t0
    ok = params == model_params == 3153 and macs == 3104 and elapsed < 1
    acceptance(7, "IQNet size at C=16", ok, f"{params} parameters, {macs} MACs/pixel")
    assert ok


def _kink_pattern(model, x):
    """Which ReLU and clamp pieces every activation sits on."""
    from jndprefilter.iqnet import _forward

    _, tape = _forward(model, x[..., None])
    _, z1, _, _, _, z2, _, z = tape
    return z1 > 0, z2 > 0, z < 0, z > 1


def test_criterion_08_gradient_check(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    model = IqnetModel.initialize(16, seed=8)
    x = rng.uniform(0.2, 0.8, (2, 64, 64))
    t = np.clip(x + rng.normal(0, 0.03, x.shape), 0, 1)
    _, grads = loss_and_gradients(model, x, t)
    names = sorted(model.params)
    sizes = np.array([model.params[n].size for n in names])
    h = 1e-5
    good = sampled = crossed = 0
    while sampled < 100:
        name = names[rng.choice(len(names), p=sizes / sizes.sum())]
        idx = np.unravel_index(rng.integers(model.params[name].size), model.params[name].shape)
        old = model.params[name][idx]
        model.params[name][idx] = old + h
        up, _ = loss_and_gradients(model, x, t)
        kinks_up = _kink_pattern(model, x)
        model.params[name][idx] = old - h
        down, _ = loss_and_gradients(model, x, t)
        kinks_down = _kink_pattern(model, x)
        model.params[name][idx] = old
        # a central difference across a ReLU or clamp kink is not a valid oracle
        if any(np.any(a != b) for a, b in zip(kinks_up, kinks_down)):
            crossed += 1
            continue
        sampled += 1
        fd, an = (up - down) / (2 * h), grads[name][idx]
        scale = max(abs(fd), abs(an))
        good += scale < 1e-12 or abs(fd - an) <= 1e-4 * scale
    elapsed = time.perf_counter() - t0
    ok = good >= 99 and elapsed < 30
    acceptance(8, "analytic gradients match finite differences", ok,
               f"{good}/100 within 1e-4, {crossed} kink-crossing draws skipped, {elapsed:.1f}s")
    assert ok


def test_criterion_09_training_sanity(acceptance):
    t0 = time.perf_counter()
    # toy set: eight 32x32 patches whose targets are their 3x3 box blur
    patches = [img.y for img in synthetic_corpus(8, 32, 32, seed=3, chroma=False)]
    pairs = [(p, np.clip(np.round(ndimage.uniform_filter(p.astype(float), 3, mode="nearest")), 0, 255).astype(np.uint8))
             for p in patches]
    cfg = TrainConfig(batch_size=8, patch=32, epochs=2000, lr_halve_every=10**6, log_every=0, seed=0)
    first = train(pairs, cfg)
    second = train(pairs, cfg)
    ratio = first.losses[-1] / first.losses[0]
    same = all(np.array_equal(first.model.params[k], second.model.params[k]) for k in first.model.params)
    elapsed = time.perf_counter() - t0
    ok = ratio <= 0.1 and same and elapsed < 300
    acceptance(9, "overfit toy set, deterministic weights", ok,
               f"final/initial loss {ratio:.4f}, identical weights {same}, {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_10_end_to_end(acceptance, corpus):
    t0 = time.perf_counter()
    train_imgs, held_out = corpus[:16], corpus[16:]
    pairs = [(img, generate_training_image(img, 27, image_id=f"train{k}")[0]) for k, img in enumerate(train_imgs)]
    # 5,000 steps laid out as 2,500 epochs of 2 steps on the default halving schedule
    cfg = TrainConfig(batch_size=8, epochs=2500, steps_per_epoch=2, lr_halve_every=250, log_every=0, seed=0)
    model = train(pairs, cfg).model
    named = [(f"held{k}", img) for k, img in enumerate(held_out)]
    learned = evaluate(named, functools.partial(apply_model, model), QPS)
    pipeline = evaluate(named, lambda img: generate_training_image(img, 27)[0], QPS)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 1800
    parts = []
    for qp in QPS:
        a, b = learned.aggregate(qp), pipeline.aggregate(qp)
        saving, drop = a["bitrate_saving_pct"]["mean"], a["psnr_drop"]["mean"]
        ref = b["psnr_drop"]["mean"]
        ok &= saving > 0 and drop <= ref + 1.0
        parts.append(f"qp{qp} saving {saving:.2f}% drop {drop:.3f}dB (pipeline {ref:.3f}dB)")
    acceptance(10, "end-to-end desk run", ok, "; ".join(parts) + f"; {elapsed:.0f}s")
    assert ok
