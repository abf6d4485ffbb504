"""Numpy lane for the conv2d kernels.

Flattened matrix-multiply formulation: windows are gathered with
as_strided and contracted with tensordot.  Fast fallback when the
compiled lane is unavailable; results agree with the loop lane to
within accumulation-order rounding (tested at 1e-12).
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _pad(x, padding):
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(xp, kh, kw, stride, ho, wo):
    b, m, hp, wp = xp.shape
    sb, sm, sh, sw = xp.strides
    shape = (b, ho, wo, m, kh, kw)
    strides = (sb, sh * stride, sw * stride, sm, sh, sw)
    return as_strided(xp, shape=shape, strides=strides)


def conv2d_forward(x, k, stride, padding):
    n, m, kh, kw = k.shape
    b, _, h, w = x.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    win = _windows(_pad(x, padding), kh, kw, stride, ho, wo)
    out = np.tensordot(win, k, axes=([3, 4, 5], [1, 2, 3]))  # (b, ho, wo, n)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_grad_input(gy, k, x_shape, stride, padding):
    b, m, h, w = x_shape
    n, _, kh, kw = k.shape
    _, _, ho, wo = gy.shape
    gxp = np.zeros((b, m, h + 2 * padding, w + 2 * padding), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            # contribution of kernel tap (u, v) lands on a strided grid
            contrib = np.tensordot(gy, k[:, :, u, v], axes=([1], [0]))
            contrib = contrib.transpose(0, 3, 1, 2)  # (b, m, ho, wo)
            gxp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += contrib
    if padding:
        return np.ascontiguousarray(gxp[:, :, padding:-padding, padding:-padding])
    return gxp


def conv2d_grad_kernels(gy, x, k_shape, stride, padding):
    n, m, kh, kw = k_shape
    _, _, ho, wo = gy.shape
    win = _windows(_pad(x, padding), kh, kw, stride, ho, wo)
    gk = np.tensordot(gy, win, axes=([0, 2, 3], [0, 1, 2]))  # (n, m, kh, kw)
    return np.ascontiguousarray(gk)
