"""Command line entry point: ``jndprefilter <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import functools
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace

from . import __version__
from .dataset import PipelineConfig, gen_dataset, list_images, read_manifest
from .edges import CannyParams
from .errors import ConfigError, JndError
from .evaluation import DEFAULT_QPS, evaluate, write_report
from .iqa import make_provider
from .io import guess_format, load_image, save_image
from .iqnet import TrainConfig, apply_model, load_model, save_model, train
from .jnd import JndConfig, edge_masks, load_config, prefilter
from .transform import CodecConfig

log = logging.getLogger("jndprefilter")


class UsageError(Exception):
    pass


def _pair(text, flag):
    try:
        low, high = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{flag} expects LOW,HIGH") from None
    return low, high


def parse_alphas(text):
    """``0.1..1.0:0.1`` (inclusive range) or a comma list ``0.1,0.2``."""
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            start, stop = (float(v) for v in span.split(".."))
            step = float(step or 0.1)
            n = int(round((stop - start) / step))
            values = [round(start + i * step, 10) for i in range(n + 1)]
        else:
            values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad alpha list {text!r}") from None
    if not values:
        raise UsageError("empty alpha list")
    return tuple(values)


def _add_image_args(p):
    p.add_argument("--format", choices=["pgm", "i420", "y4m"], help="override extension-based format")
    p.add_argument("--width", type=int, help="width of raw I420 input")
    p.add_argument("--height", type=int, help="height of raw I420 input")


def _add_jnd_args(p):
    p.add_argument("--config", help="JSON filter config; flags override its values")
    p.add_argument("--canny-main", metavar="LOW,HIGH")
    p.add_argument("--canny-detail", metavar="LOW,HIGH")
    p.add_argument("--canny-sigma", type=float)
    p.add_argument("--edge-dilate", type=int, metavar="N")
    p.add_argument("--no-overlap", action="store_true")
    p.add_argument("--no-edge-preserve", action="store_true")


def jnd_config_from_args(args):
    cfg = load_config(args.config) if args.config else JndConfig()
    kw = {}
    sigma = args.canny_sigma
    main, detail = cfg.canny_main, cfg.canny_detail
    try:
        if args.canny_main:
            lo, hi = _pair(args.canny_main, "--canny-main")
            main = CannyParams(main.sigma, lo, hi, "main")
        if args.canny_detail:
            lo, hi = _pair(args.canny_detail, "--canny-detail")
            detail = CannyParams(detail.sigma, lo, hi, "detail")
        if sigma is not None:
            main = replace(main, sigma=sigma)
            detail = replace(detail, sigma=sigma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    kw["canny_main"], kw["canny_detail"] = main, detail
    if args.edge_dilate is not None:
        kw["dilate"] = args.edge_dilate
    if args.no_overlap:
        kw["overlap"] = False
    if args.no_edge_preserve:
        kw["edge_preserve"] = False
    if getattr(args, "alpha", None) is not None:
        kw["alpha"] = args.alpha
    if getattr(args, "alphas", None):
        kw["alpha_set"] = parse_alphas(args.alphas)
    try:
        return replace(cfg, **kw)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _load(args, path):
    return load_image(path, args.format, args.width, args.height)


def _emit_hash(payload):
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()
    print(f"config-hash: {digest}", file=sys.stderr)
    return digest


# -- subcommands -------------------------------------------------------------


def cmd_prefilter(args):
    cfg = jnd_config_from_args(args)
    _emit_hash({"cmd": "prefilter", "jnd": cfg.to_dict()})
    img = _load(args, args.input)
    out = prefilter(img, cfg)
    save_image(out, args.output, args.format or guess_format(args.output))
    if args.mask_out:
        from .image import PlanarImage

        minor = edge_masks(img.y, cfg)[2]
        save_image(PlanarImage(minor * 255), args.mask_out, "pgm")
    return 0


def cmd_gen_dataset(args):
    jcfg = jnd_config_from_args(args)
    try:
        codec = CodecConfig.parse(args.codec, qp=args.qp)
        iqa = make_provider(args.iqa)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    cfg = PipelineConfig(jnd=jcfg, codec=codec, epsilon=args.epsilon,
                         smooth_threshold=args.smooth_threshold)
    iqa_name = args.iqa
    print(f"config-hash: {cfg.digest(args.qp, iqa_name)}", file=sys.stderr)
    if not list_images(args.input):
        raise UsageError(f"no .pgm/.y4m images in {args.input}")
    manifest = gen_dataset(args.input, args.output, args.qp, cfg, iqa, iqa_name)
    n = sum(len(e.records) for e in manifest.images)
    print(f"wrote {len(manifest.images)} training images, {n} patches to {args.output}")
    return 0


def cmd_train(args):
    manifest = read_manifest(args.manifest)
    tcfg = TrainConfig(
        batch_size=args.batch_size, epochs=args.epochs, steps_per_epoch=args.steps_per_epoch,
        lr0=args.lr, lr_halve_every=args.lr_halve_every, seed=args.seed, loss=args.loss,
        channels=args.channels,
    )
    _emit_hash({"cmd": "train", "train": tcfg.digest(), "manifest": manifest.config_hash})
    pairs = []
    for entry in manifest.images:
        fmt = guess_format(entry.train_file)
        target = load_image(os.path.join(args.dataset, entry.train_file), fmt)
        source = load_image(entry.source, guess_format(entry.source))
        pairs.append((source, target))
    result = train(pairs, tcfg)
    save_model(result.model, args.output)
    if args.loss_log:
        with open(args.loss_log, "w") as f:
            for step, value in enumerate(result.losses):
                f.write(f"{step},{value!r}\n")
    print(f"final loss {result.losses[-1]:.6g}; model written to {args.output}")
    return 0


def cmd_infer(args):
    model = load_model(args.model)
    img = _load(args, args.input)
    out = apply_model(model, img)
    save_image(out, args.output, args.format or guess_format(args.output))
    return 0


def cmd_eval(args):
    model = load_model(args.model)
    try:
        codec = CodecConfig.parse(args.codec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    qps = [int(q) for q in args.qps.split(",")]
    paths = list_images(args.corpus)
    if not paths:
        raise UsageError(f"no .pgm/.y4m images in {args.corpus}")
    images = [(os.path.splitext(os.path.basename(p))[0], load_image(p)) for p in paths]
    digest = _emit_hash({"cmd": "eval", "model": model.config_hash, "qps": qps, "codec": codec.codec_id})
    report = evaluate(images, functools.partial(apply_model, model), qps, codec, args.jobs, digest)
    write_report(report, args.output + ".csv", args.output + ".json")
    for qp in report.qps():
        agg = report.aggregate(qp)
        s, d = agg["bitrate_saving_pct"], agg["psnr_drop"]
        print(f"qp {qp}: saving min/mean/max {s['min']:.2f}/{s['mean']:.2f}/{s['max']:.2f}%  "
              f"psnr drop mean {d['mean']:.3f} dB")
    return 1 if all(not r.ok for r in report.rows) else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="jndprefilter", description="JND prefiltering toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prefilter", help="JND-prefilter one image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--mask-out", help="write the minor-edge mask as PGM")
    _add_image_args(p)
    _add_jnd_args(p)
    p.set_defaults(func=cmd_prefilter)

    p = sub.add_parser("gen-dataset", help="generate IQA-guided training images")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--qp", type=int, default=27)
    p.add_argument("--alphas", default="0.1..1.0:0.1")
    p.add_argument("--iqa", default="proxy", help="proxy | file:PATH")
    p.add_argument("--codec", default="surrogate", help="surrogate | external:CMD")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--smooth-threshold", type=float, default=1.5)
    _add_jnd_args(p)
    p.set_defaults(func=cmd_gen_dataset, format=None)

    p = sub.add_parser("train", help="train IQNet on a generated dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss", choices=["mse", "l1"], default="mse")
    p.add_argument("--epochs", type=int, default=2500)
    p.add_argument("--steps-per-epoch", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-halve-every", type=int, default=250)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--loss-log", help="write step,loss lines here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="apply a trained model to one image")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    _add_image_args(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="bitrate/PSNR report against the unfiltered anchor")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--qps", default=",".join(str(q) for q in DEFAULT_QPS))
    p.add_argument("--codec", default="surrogate")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", dest="output", default="report", help="writes OUT.csv and OUT.json")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (JndError, OSError) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
