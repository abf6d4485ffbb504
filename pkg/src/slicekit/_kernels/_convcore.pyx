# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled lane for the conv2d kernels: direct cross-correlation loops."""

import numpy as np


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] k,
                   Py_ssize_t stride, Py_ssize_t padding):
    cdef Py_ssize_t b = x.shape[0], m = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t n = k.shape[0], kh = k.shape[2], kw = k.shape[3]
    cdef Py_ssize_t ho = (h + 2 * padding - kh) // stride + 1
    cdef Py_ssize_t wo = (w + 2 * padding - kw) // stride + 1
    out_arr = np.zeros((b, n, ho, wo), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t bi, ni, i, j, mi, u, v, y, z
    cdef double acc
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
    return out_arr


def conv2d_grad_input(double[:, :, :, ::1] gy, double[:, :, :, ::1] k,
                      x_shape, Py_ssize_t stride, Py_ssize_t padding):
    cdef Py_ssize_t b = x_shape[0], m = x_shape[1], h = x_shape[2], w = x_shape[3]
    cdef Py_ssize_t n = k.shape[0], kh = k.shape[2], kw = k.shape[3]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]
    gx_arr = np.zeros((b, m, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t bi, ni, i, j, mi, u, v, y, z
    cdef double g
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
    return gx_arr


def conv2d_grad_kernels(double[:, :, :, ::1] gy, double[:, :, :, ::1] x,
                        k_shape, Py_ssize_t stride, Py_ssize_t padding):
    cdef Py_ssize_t n = k_shape[0], m = k_shape[1], kh = k_shape[2], kw = k_shape[3]
    cdef Py_ssize_t b = x.shape[0], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]
    gk_arr = np.zeros((n, m, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] gk = gk_arr
    cdef Py_ssize_t bi, ni, i, j, mi, u, v, y, z
    cdef double g
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
    return gk_arr
