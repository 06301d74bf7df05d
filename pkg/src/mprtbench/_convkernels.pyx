# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled float32 kernels for convolution and 2x2 max-pooling.

Mirrors the surface of `_convkernels_py` (NCHW, stride 1). Selected at
import time by `mprtbench.backend` when available.
"""

import numpy as np

BACKEND_NAME = "compiled"


def conv2d_forward(const float[:, :, :, ::1] x, const float[:, :, :, ::1] w,
                   const float[::1] b, int pad):
    cdef Py_ssize_t nb = x.shape[0], nc = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t nf = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = h + 2 * pad - kh + 1, ow = wd + 2 * pad - kw + 1
    out = np.empty((nb, nf, oh, ow), dtype=np.float32)
    cdef float[:, :, :, ::1] y = out
    cdef Py_ssize_t ib, f, c, r, s, i, j, ih, iw
    cdef float acc
    with nogil:
        for ib in range(nb):
            for f in range(nf):
                for r in range(oh):
                    for s in range(ow):
                        acc = b[f]
                        for c in range(nc):
                            for i in range(kh):
                                ih = r + i - pad
                                if ih < 0 or ih >= h:
                                    continue
                                for j in range(kw):
                                    iw = s + j - pad
                                    if iw < 0 or iw >= wd:
                                        continue
                                    acc = acc + x[ib, c, ih, iw] * w[f, c, i, j]
                        y[ib, f, r, s] = acc
    return out


def conv2d_backward_input(const float[:, :, :, ::1] dy, const float[:, :, :, ::1] w, int pad):
    cdef Py_ssize_t nb = dy.shape[0], nf = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    cdef Py_ssize_t nc = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t h = oh - 2 * pad + kh - 1, wd = ow - 2 * pad + kw - 1
    out = np.zeros((nb, nc, h, wd), dtype=np.float32)
    cdef float[:, :, :, ::1] dx = out
    cdef Py_ssize_t ib, f, c, r, s, i, j, ih, iw
    cdef float g
    with nogil:
        for ib in range(nb):
            for f in range(nf):
                for r in range(oh):
                    for s in range(ow):
                        g = dy[ib, f, r, s]
                        if g == 0.0:
                            continue
                        for c in range(nc):
                            for i in range(kh):
                                ih = r + i - pad
                                if ih < 0 or ih >= h:
                                    continue
                                for j in range(kw):
                                    iw = s + j - pad
                                    if iw < 0 or iw >= wd:
                                        continue
                                    dx[ib, c, ih, iw] += g * w[f, c, i, j]
    return out


def conv2d_backward_params(const float[:, :, :, ::1] dy, const float[:, :, :, ::1] x,
                           int pad, int kh, int kw):
    cdef Py_ssize_t nb = dy.shape[0], nf = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    cdef Py_ssize_t nc = x.shape[1], h = x.shape[2], wd = x.shape[3]
    dw_out = np.zeros((nf, nc, kh, kw), dtype=np.float32)
    db_out = np.zeros(nf, dtype=np.float32)
    cdef float[:, :, :, ::1] dw = dw_out
    cdef float[::1] db = db_out
    cdef Py_ssize_t ib, f, c, r, s, i, j, ih, iw
    cdef float g
    with nogil:
        for ib in range(nb):
            for f in range(nf):
                for r in range(oh):
                    for s in range(ow):
                        g = dy[ib, f, r, s]
                        db[f] += g
                        if g == 0.0:
                            continue
                        for c in range(nc):
                            for i in range(kh):
                                ih = r + i - pad
                                if ih < 0 or ih >= h:
                                    continue
                                for j in range(kw):
                                    iw = s + j - pad
                                    if iw < 0 or iw >= wd:
                                        continue
                                    dw[f, c, i, j] += g * x[ib, c, ih, iw]
    return dw_out, db_out


def maxpool2x2_forward(const float[:, :, :, ::1] x):
    cdef Py_ssize_t nb = x.shape[0], nc = x.shape[1], h = x.shape[2], wd = x.shape[3]
    if h % 2 or wd % 2:
        raise ValueError(f"maxpool2x2 needs even spatial dims, got {h}x{wd}")
    cdef Py_ssize_t oh = h // 2, ow = wd // 2
    y_out = np.empty((nb, nc, oh, ow), dtype=np.float32)
    idx_out = np.empty((nb, nc, oh, ow), dtype=np.uint8)
    cdef float[:, :, :, ::1] y = y_out
    cdef unsigned char[:, :, :, ::1] idx = idx_out
    cdef Py_ssize_t ib, c, r, s, i, j
    cdef float best, v
    cdef unsigned char arg
    with nogil:
        for ib in range(nb):
            for c in range(nc):
                for r in range(oh):
                    for s in range(ow):
                        best = x[ib, c, 2 * r, 2 * s]
                        arg = 0
                        for i in range(2):
                            for j in range(2):
                                v = x[ib, c, 2 * r + i, 2 * s + j]
                                if v > best:
                                    best = v
                                    arg = <unsigned char> (2 * i + j)
                        y[ib, c, r, s] = best
                        idx[ib, c, r, s] = arg
    return y_out, idx_out


def maxpool2x2_backward(const float[:, :, :, ::1] dy, const unsigned char[:, :, :, ::1] idx):
    cdef Py_ssize_t nb = dy.shape[0], nc = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    out = np.zeros((nb, nc, oh * 2, ow * 2), dtype=np.float32)
    cdef float[:, :, :, ::1] dx = out
    cdef Py_ssize_t ib, c, r, s
    cdef unsigned char arg
    with nogil:
        for ib in range(nb):
            for c in range(nc):
                for r in range(oh):
                    for s in range(ow):
                        arg = idx[ib, c, r, s]
                        dx[ib, c, 2 * r + arg // 2, 2 * s + arg % 2] = dy[ib, c, r, s]
    return out
