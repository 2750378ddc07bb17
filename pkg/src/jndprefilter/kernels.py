"""Per-block and per-pixel hot loops.

Each kernel exists as ``<name>_loop`` (numba ``@njit``; plain Python when numba
is missing) and ``<name>_numpy`` (vectorized). The public name is bound to one
of them according to :data:`jndprefilter._accel.USE_NUMBA`. Both versions
implement the same arithmetic. Half-away rounding treats anything within
``TIE_EPS`` of a half as an exact tie, so integer inputs whose exact transform
lands on a half round the same way whatever the summation order.
"""

import math

import numpy as np
from scipy import ndimage

from ._accel import USE_NUMBA, njit


def dct_matrix(n=8):
    """Orthonormal DCT-II basis, ``C[k, i]``; forward is ``C @ X @ C.T``."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    c[0, :] = math.sqrt(1.0 / n)
    return c


TIE_EPS = 1e-9

DCT8 = dct_matrix(8)
DCT8.setflags(write=False)


def _to_blocks(plane):
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def _from_blocks(blocks):
    bh, bw = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)


def _round_clamp_numpy(x):
    r = np.sign(x) * np.floor(np.abs(x) + (0.5 + TIE_EPS))
    return np.clip(r, 0, 255).astype(np.uint8)


# -- JND injection -----------------------------------------------------------


@njit
def jnd_inject_loop(plane, weights, alpha, c0, gamma, kappa, dct):
    h, w = plane.shape
    out = np.empty((h, w), np.uint8)
    blk = np.empty((8, 8))
    tmp = np.empty((8, 8))
    coef = np.empty((8, 8))
    for by in range(0, h, 8):
        for bx in range(0, w, 8):
            s = 0.0
            for i in range(8):
                for j in range(8):
                    blk[i, j] = plane[by + i, bx + j]
                    s += blk[i, j]
            mu = s / 64.0
            v = 0.0
            for i in range(8):
                for j in range(8):
                    v += (blk[i, j] - mu) ** 2
            sigma = math.sqrt(v / 64.0)
            e = c0 * (1.0 + gamma * abs(mu - 128.0) / 128.0) * (1.0 + kappa * sigma / 128.0)
            for i in range(8):
                for j in range(8):
                    blk[i, j] -= 128.0
            # coef = D @ blk @ D.T
            for i in range(8):
                for j in range(8):
                    acc = 0.0
                    for k in range(8):
                        acc += dct[i, k] * blk[k, j]
                    tmp[i, j] = acc
            for i in range(8):
                for j in range(8):
                    acc = 0.0
                    for k in range(8):
                        acc += tmp[i, k] * dct[j, k]
                    coef[i, j] = acc
            for u in range(8):
                for v_ in range(8):
                    if u == 0 and v_ == 0:
                        continue
                    t = e * alpha * weights[u, v_]
                    c = coef[u, v_]
                    m = abs(c) - t
                    if m <= 0.0:
                        coef[u, v_] = 0.0
                    elif c < 0.0:
                        coef[u, v_] = -m
                    else:
                        coef[u, v_] = m
            # blk = D.T @ coef @ D
            for i in range(8):
                for j in range(8):
                    acc = 0.0
                    for k in range(8):
                        acc += dct[k, i] * coef[k, j]
                    tmp[i, j] = acc
            for i in range(8):
                for j in range(8):
                    acc = 0.0
                    for k in range(8):
                        acc += tmp[i, k] * dct[k, j]
                    x = acc + 128.0
                    r = math.floor(abs(x) + (0.5 + TIE_EPS))
                    if x < 0.0:
                        r = -r
                    if r < 0.0:
                        r = 0.0
                    elif r > 255.0:
                        r = 255.0
                    out[by + i, bx + j] = np.uint8(r)
    return out


def jnd_block_energy_numpy(blocks, c0, gamma, kappa):
    mu = blocks.mean(axis=(-2, -1))
    sigma = blocks.std(axis=(-2, -1))
    return c0 * (1.0 + gamma * np.abs(mu - 128.0) / 128.0) * (1.0 + kappa * sigma / 128.0)


def jnd_inject_numpy(plane, weights, alpha, c0, gamma, kappa, dct):
    blocks = _to_blocks(plane.astype(np.float64))
    e = jnd_block_energy_numpy(blocks, c0, gamma, kappa)
    coef = dct @ (blocks - 128.0) @ dct.T
    t = e[..., None, None] * alpha * weights
    t[..., 0, 0] = 0.0
    coef = np.sign(coef) * np.maximum(np.abs(coef) - t, 0.0)
    rec = dct.T @ coef @ dct + 128.0
    return _round_clamp_numpy(_from_blocks(rec))


# -- surrogate intra codec ---------------------------------------------------


@njit
def quantize_plane_loop(plane, qstep, dct):
    h, w = plane.shape
    out = np.empty((h, w), np.uint8)
    blk = np.empty((8, 8))
    tmp = np.empty((8, 8))
    coef = np.empty((8, 8))
    bits = 0
    for by in range(0, h, 8):
        for bx in range(0, w, 8):
            for i in range(8):
                for j in range(8):
                    blk[i, j] = plane[by + i, bx + j] - 128.0
            for i in range(8):
                for j in range(8):
                    acc = 0.0
                    for k in range(8):
                        acc += dct[i, k] * blk[k, j]
                    tmp[i, j] = acc
            bits += 4
            for i in range(8):
                for j in range(8):
                    acc = 0.0
                    for k in range(8):
                        acc += tmp[i, k] * dct[j, k]
                    x = acc / qstep
                    q = math.floor(abs(x) + (0.5 + TIE_EPS))
                    if q > 0.0:
                        n = np.int64(q)
                        lg = 0
                        while n > 1:
                            n >>= 1
                            lg += 1
                        bits += 2 * lg + 3
                    if x < 0.0:
                        q = -q
                    coef[i, j] = q * qstep
            for i in range(8):
                for j in range(8):
                    acc = 0.0
                    for k in range(8):
                        acc += dct[k, i] * coef[k, j]
                    tmp[i, j] = acc
            for i in range(8):
                for j in range(8):
                    acc = 0.0
                    for k in range(8):
                        acc += tmp[i, k] * dct[k, j]
                    x = acc + 128.0
                    r = math.floor(abs(x) + (0.5 + TIE_EPS))
                    if x < 0.0:
                        r = -r
                    if r < 0.0:
                        r = 0.0
                    elif r > 255.0:
                        r = 255.0
                    out[by + i, bx + j] = np.uint8(r)
    return out, bits


def quantize_coefficients(coef, qstep):
    """Quantized levels (half away from zero) and their code-length in bits.

    ``coef`` has shape ``(..., 8, 8)``; returns ``(levels, bits)`` where bits is
    the total over all blocks including 4 end-of-block bits per block.
    """
    x = coef / qstep
    q = np.sign(x) * np.floor(np.abs(x) + (0.5 + TIE_EPS))
    mag = np.abs(q)
    nz = mag > 0
    _, exp = np.frexp(mag[nz])
    nblocks = int(np.prod(coef.shape[:-2], dtype=np.int64))
    bits = int(np.sum(2 * (exp.astype(np.int64) - 1) + 3)) + 4 * nblocks
    return q, bits


def quantize_plane_numpy(plane, qstep, dct):
    blocks = _to_blocks(plane.astype(np.float64)) - 128.0
    coef = dct @ blocks @ dct.T
    q, bits = quantize_coefficients(coef, qstep)
    rec = dct.T @ (q * qstep) @ dct + 128.0
    return _round_clamp_numpy(_from_blocks(rec)), bits


# -- Canny -------------------------------------------------------------------

_TAN22 = math.tan(math.pi / 8)
_TAN67 = math.tan(3 * math.pi / 8)


@njit
def nms_loop(gx, gy, mag):
    h, w = mag.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            m = mag[y, x]
            if m == 0.0:
                continue
            ax = abs(gx[y, x])
            ay = abs(gy[y, x])
            if ay <= _TAN22 * ax:
                dy1, dx1 = 0, -1
            elif ay >= _TAN67 * ax:
                dy1, dx1 = -1, 0
            elif (gx[y, x] > 0) == (gy[y, x] > 0):
                dy1, dx1 = -1, -1
            else:
                dy1, dx1 = -1, 1
            y1, x1, y2, x2 = y + dy1, x + dx1, y - dy1, x - dx1
            n1 = mag[y1, x1] if 0 <= y1 < h and 0 <= x1 < w else 0.0
            n2 = mag[y2, x2] if 0 <= y2 < h and 0 <= x2 < w else 0.0
            if m > n1 and m >= n2:
                out[y, x] = m
    return out


def nms_numpy(gx, gy, mag):
    h, w = mag.shape
    pad = np.pad(mag, 1)
    ax, ay = np.abs(gx), np.abs(gy)
    horiz = ay <= _TAN22 * ax
    vert = ~horiz & (ay >= _TAN67 * ax)
    diag = ~horiz & ~vert
    same = (gx > 0) == (gy > 0)
    dy1 = np.where(horiz, 0, -1)
    dx1 = np.where(horiz, -1, np.where(vert, 0, np.where(diag & same, -1, 1)))
    yy, xx = np.mgrid[0:h, 0:w]
    n1 = pad[yy + dy1 + 1, xx + dx1 + 1]
    n2 = pad[yy - dy1 + 1, xx - dx1 + 1]
    keep = (mag > 0) & (mag > n1) & (mag >= n2)
    return np.where(keep, mag, 0.0)


@njit
def hysteresis_loop(nms, low, high):
    h, w = nms.shape
    out = np.zeros((h, w), np.uint8)
    stack = np.empty((h * w, 2), np.int64)
    top = 0
    for y in range(h):
        for x in range(w):
            if nms[y, x] >= high and out[y, x] == 0:
                out[y, x] = 1
                stack[top, 0] = y
                stack[top, 1] = x
                top += 1
                while top > 0:
                    top -= 1
                    cy = stack[top, 0]
                    cx = stack[top, 1]
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            ny = cy + dy
                            nx = cx + dx
                            if 0 <= ny < h and 0 <= nx < w:
                                if out[ny, nx] == 0 and nms[ny, nx] >= low:
                                    out[ny, nx] = 1
                                    stack[top, 0] = ny
                                    stack[top, 1] = nx
                                    top += 1
    return out


def hysteresis_numpy(nms, low, high):
    candidates = nms >= low
    labels, n = ndimage.label(candidates, structure=np.ones((3, 3), bool))
    if n == 0:
        return np.zeros(nms.shape, np.uint8)
    strong = np.unique(labels[(nms >= high) & candidates])
    strong = strong[strong > 0]
    return np.isin(labels, strong).astype(np.uint8)


if USE_NUMBA:
    jnd_inject = jnd_inject_loop
    quantize_plane = quantize_plane_loop
    nms = nms_loop
    hysteresis = hysteresis_loop
else:
    jnd_inject = jnd_inject_numpy
    quantize_plane = quantize_plane_numpy
    nms = nms_numpy
    hysteresis = hysteresis_numpy


# -- convolutions with edge-replicated "same" padding ------------------------
# Activations are channels-last (N, H, W, C); weights are (k, k, Cin, Cout).


@njit(fastmath=True)
def conv_forward_loop(x, wt, b):
    n_, h, wd, cin = x.shape
    k, _, _, cout = wt.shape
    p = k // 2
    out = np.empty((n_, h, wd, cout))
    for n in range(n_):
        for y in range(h):
            for xx in range(wd):
                o = out[n, y, xx]
                for co in range(cout):
                    o[co] = b[co]
                for ky in range(k):
                    yy = min(max(y + ky - p, 0), h - 1)
                    for kx in range(k):
                        xv = x[n, yy, min(max(xx + kx - p, 0), wd - 1)]
                        for ci in range(cin):
                            v = xv[ci]
                            wr = wt[ky, kx, ci]
                            for co in range(cout):
                                o[co] += v * wr[co]
    return out


@njit(fastmath=True)
def conv_backward_loop(x, wt, dout, need_dx):
    n_, h, wd, cin = x.shape
    k, _, _, cout = wt.shape
    p = k // 2
    dw = np.zeros(wt.shape)
    db = np.zeros(cout)
    dx = np.zeros(x.shape)
    for n in range(n_):
        for y in range(h):
            for xx in range(wd):
                g = dout[n, y, xx]
                for co in range(cout):
                    db[co] += g[co]
                for ky in range(k):
                    yy = min(max(y + ky - p, 0), h - 1)
                    for kx in range(k):
                        xs = min(max(xx + kx - p, 0), wd - 1)
                        xv = x[n, yy, xs]
                        dxv = dx[n, yy, xs]
                        for ci in range(cin):
                            v = xv[ci]
                            wr = wt[ky, kx, ci]
                            dwr = dw[ky, kx, ci]
                            acc = 0.0
                            for co in range(cout):
                                dwr[co] += v * g[co]
                                acc += wr[co] * g[co]
                            if need_dx:
                                dxv[ci] += acc
    return dx, dw, db


def _pad_edge(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)), mode="edge")


def _im2col(x, k):
    n_, h, wd, cin = x.shape
    xp = _pad_edge(x, k // 2)
    cols = np.empty((n_, h, wd, k, k, cin))
    for ky in range(k):
        for kx in range(k):
            cols[:, :, :, ky, kx, :] = xp[:, ky : ky + h, kx : kx + wd, :]
    return cols.reshape(n_ * h * wd, k * k * cin)


def conv_forward_numpy(x, wt, b):
    n_, h, wd, cin = x.shape
    k, _, _, cout = wt.shape
    out = _im2col(x, k) @ wt.reshape(k * k * cin, cout) + b
    return out.reshape(n_, h, wd, cout)


def _fold_edge(dxp, p, h, wd):
    if p == 0:
        return dxp
    d = dxp[:, p : p + h].copy()
    d[:, 0] += dxp[:, :p].sum(axis=1)
    d[:, -1] += dxp[:, p + h :].sum(axis=1)
    out = d[:, :, p : p + wd].copy()
    out[:, :, 0] += d[:, :, :p].sum(axis=2)
    out[:, :, -1] += d[:, :, p + wd :].sum(axis=2)
    return out


def conv_backward_numpy(x, wt, dout, need_dx):
    n_, h, wd, cin = x.shape
    k, _, _, cout = wt.shape
    p = k // 2
    g = dout.reshape(-1, cout)
    cols = _im2col(x, k)
    dw = (cols.T @ g).reshape(wt.shape)
    db = g.sum(axis=0)
    if not need_dx:
        return np.zeros(x.shape), dw, db
    dcols = (g @ wt.reshape(k * k * cin, cout).T).reshape(n_, h, wd, k, k, cin)
    dxp = np.zeros((n_, h + 2 * p, wd + 2 * p, cin))
    for ky in range(k):
        for kx in range(k):
            dxp[:, ky : ky + h, kx : kx + wd, :] += dcols[:, :, :, ky, kx, :]
    return _fold_edge(dxp, p, h, wd), dw, db


if USE_NUMBA:
    conv_forward = conv_forward_loop
    conv_backward = conv_backward_loop
else:
    conv_forward = conv_forward_numpy
    conv_backward = conv_backward_numpy
