"""Pure-Python reference lane for the conv2d kernels.

Direct cross-correlation loops, no vectorization.  This is the ground
truth the fast lanes are tested against: slow but obviously correct.
Only use on tiny shapes.
"""

import numpy as np


def conv2d_forward(x, k, stride, padding):
    b, m, h, w = x.shape
    n, mk, kh, kw = k.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((b, n, ho, wo), dtype=np.float64)
    for bi in range(b):
        for ni in range(n):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for mi in range(m):
                        for u in range(kh):
                            y = i * stride - padding + u
                            if y < 0 or y >= h:
                                continue
                            for v in range(kw):
                                z = j * stride - padding + v
                                if z < 0 or z >= w:
                                    continue
                                acc += x[bi, mi, y, z] * k[ni, mi, u, v]
                    out[bi, ni, i, j] = acc
    return out


def conv2d_grad_input(gy, k, x_shape, stride, padding):
    b, m, h, w = x_shape
    n, mk, kh, kw = k.shape
    _, _, ho, wo = gy.shape
    gx = np.zeros(x_shape, dtype=np.float64)
    for bi in range(b):
        for ni in range(n):
            for i in range(ho):
                for j in range(wo):
                    g = gy[bi, ni, i, j]
                    for mi in range(m):
                        for u in range(kh):
                            y = i * stride - padding + u
                            if y < 0 or y >= h:
                                continue
                            for v in range(kw):
                                z = j * stride - padding + v
                                if z < 0 or z >= w:
                                    continue
                                gx[bi, mi, y, z] += g * k[ni, mi, u, v]
    return gx


def conv2d_grad_kernels(gy, x, k_shape, stride, padding):
    n, m, kh, kw = k_shape
    b, mx, h, w = x.shape
    _, _, ho, wo = gy.shape
    gk = np.zeros(k_shape, dtype=np.float64)
    for bi in range(b):
        for ni in range(n):
            for i in range(ho):
                for j in range(wo):
                    g = gy[bi, ni, i, j]
                    for mi in range(m):
                        for u in range(kh):
                            y = i * stride - padding + u
                            if y < 0 or y >= h:
                                continue
                            for v in range(kw):
                                z = j * stride - padding + v
                                if z < 0 or z >= w:
                                    continue
                                gk[ni, mi, u, v] += g * x[bi, mi, y, z]
    return gk
