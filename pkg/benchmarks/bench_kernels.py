"""Time the compiled loop kernels against their numpy counterparts.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--size S]

The first call of every loop kernel triggers (or loads cached) compilation;
it is excluded from the timings. Results are checked for agreement before
anything is timed.
"""

import argparse
import time

import numpy as np

from jndprefilter import kernels
from jndprefilter._accel import NUMBA_AVAILABLE
from jndprefilter.corpus import synthetic_corpus
from jndprefilter.edges import gradients
from jndprefilter.jnd import default_weights
from jndprefilter.transform import qstep


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(size):
    luma = synthetic_corpus(1, size, size, seed=0, chroma=False)[0].y
    w = default_weights()
    gx, gy = gradients(luma, 1.4)
    mag = np.hypot(gx, gy)
    thin = kernels.nms_numpy(gx, gy, mag)
    rng = np.random.default_rng(0)
    x = rng.random((8, 64, 64, 16))
    wt = rng.normal(size=(3, 3, 16, 16)) * 0.1
    b = np.zeros(16)
    dout = rng.normal(size=(8, 64, 64, 16))
    return [
        ("jnd_inject", (luma, w, 1.0, 4.0, 1.0, 2.0, kernels.DCT8)),
        ("quantize_plane", (luma, qstep(27), kernels.DCT8)),
        ("nms", (gx, gy, mag)),
        ("hysteresis", (thin, 20.0, 60.0)),
        ("conv_forward", (x, wt, b)),
        ("conv_backward", (x, wt, dout, True)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=512, help="side of the test image")
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        print("numba is not installed; loop kernels run as plain Python")
    print(f"{'kernel':<16}{'loop (s)':>12}{'numpy (s)':>12}{'speedup':>10}")
    for name, inputs in cases(args.size):
        loop = getattr(kernels, name + "_loop")
        vec = getattr(kernels, name + "_numpy")
        a, b = loop(*inputs), vec(*inputs)
        for u, v in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            if not np.allclose(u, v, atol=1e-8):
                raise SystemExit(f"{name}: loop and numpy results disagree")
        tl = best_of(lambda: loop(*inputs), args.repeat)
        tv = best_of(lambda: vec(*inputs), args.repeat)
        print(f"{name:<16}{tl:>12.4f}{tv:>12.4f}{tv / tl:>9.1f}x")


if __name__ == "__main__":
    main()
