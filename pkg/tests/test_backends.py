"""The compiled loop kernels and their numpy counterparts must agree."""

import numpy as np
import pytest

from jndprefilter import kernels
from jndprefilter.edges import gradients
from jndprefilter.jnd import default_weights
from jndprefilter.transform import qstep


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
def test_jnd_inject(corpus, alpha):
    for img in corpus[:4]:
        args = (img.y, default_weights(), alpha, 4.0, 1.0, 2.0, kernels.DCT8)
        a = kernels.jnd_inject_loop(*args)
        b = kernels.jnd_inject_numpy(*args)
        assert np.array_equal(a, b)


@pytest.mark.parametrize("qp", [0, 22, 37, 51])
def test_quantize_plane(corpus, qp):
    for img in corpus[:4]:
        ra, ba = kernels.quantize_plane_loop(img.y, qstep(qp), kernels.DCT8)
        rb, bb = kernels.quantize_plane_numpy(img.y, qstep(qp), kernels.DCT8)
        assert np.array_equal(ra, rb)
        assert ba == bb


def test_nms_and_hysteresis(corpus):
    for img in corpus[:6]:
        gx, gy = gradients(img.y, 1.4)
        mag = np.hypot(gx, gy)
        na = kernels.nms_loop(gx, gy, mag)
        nb = kernels.nms_numpy(gx, gy, mag)
        assert np.array_equal(na, nb)
        for low, high in ((20.0, 60.0), (60.0, 120.0)):
            assert np.array_equal(kernels.hysteresis_loop(na, low, high), kernels.hysteresis_numpy(na, low, high))


@pytest.mark.parametrize("k,cin,cout", [(5, 1, 4), (1, 3, 3), (3, 4, 2)])
def test_conv(rng, k, cin, cout):
    x = rng.normal(size=(2, 10, 7, cin))
    wt = rng.normal(size=(k, k, cin, cout))
    b = rng.normal(size=cout)
    assert np.allclose(kernels.conv_forward_loop(x, wt, b), kernels.conv_forward_numpy(x, wt, b), atol=1e-10)
    dout = rng.normal(size=(2, 10, 7, cout))
    for need_dx in (True, False):
        la = kernels.conv_backward_loop(x, wt, dout, need_dx)
        lb = kernels.conv_backward_numpy(x, wt, dout, need_dx)
        for u, v in zip(la[1:], lb[1:]):
            assert np.allclose(u, v, atol=1e-9)
        if need_dx:
            assert np.allclose(la[0], lb[0], atol=1e-9)


def test_backend_name():
    from jndprefilter._accel import backend_name

    assert backend_name() in ("numba", "numpy")
