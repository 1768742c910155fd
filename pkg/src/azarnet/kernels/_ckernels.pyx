# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel implementations.

Direct loop nests over NHWC tensors with the output-channel loop innermost so
the C compiler can vectorise it (kernels and activations are C-contiguous in
that axis).  Signatures, preallocation contract and tie rules match
``_pykernels`` exactly; the dispatch wrapper treats the two modules as
interchangeable.
"""

import numpy as np

ctypedef fused real:
    float
    double


def conv_fwd(real[:, :, :, ::1] xp, real[:, :, :, ::1] w, real[:, :, :, ::1] out):
    cdef Py_ssize_t nb = out.shape[0], nh = out.shape[1], nw = out.shape[2], co_n = out.shape[3]
    cdef Py_ssize_t kh_n = w.shape[0], kw_n = w.shape[1], ci_n = w.shape[2]
    cdef Py_ssize_t b, i, j, kh, kw, ci, co
    cdef real xv
    with nogil:
        for b in range(nb):
            for i in range(nh):
                for j in range(nw):
                    for kh in range(kh_n):
                        for kw in range(kw_n):
                            for ci in range(ci_n):
                                xv = xp[b, i + kh, j + kw, ci]
                                for co in range(co_n):
                                    out[b, i, j, co] += xv * w[kh, kw, ci, co]


def conv_bwd_params(real[:, :, :, ::1] xp, real[:, :, :, ::1] gy, real[:, :, :, ::1] gw,
                    real[::1] gb):
    cdef Py_ssize_t nb = gy.shape[0], nh = gy.shape[1], nw = gy.shape[2], co_n = gy.shape[3]
    cdef Py_ssize_t kh_n = gw.shape[0], kw_n = gw.shape[1], ci_n = gw.shape[2]
    cdef Py_ssize_t b, i, j, kh, kw, ci, co
    cdef real xv
    with nogil:
        for b in range(nb):
            for i in range(nh):
                for j in range(nw):
                    for co in range(co_n):
                        gb[co] += gy[b, i, j, co]
                    for kh in range(kh_n):
                        for kw in range(kw_n):
                            for ci in range(ci_n):
                                xv = xp[b, i + kh, j + kw, ci]
                                for co in range(co_n):
                                    gw[kh, kw, ci, co] += xv * gy[b, i, j, co]


def pool_fwd(real[:, :, :, ::1] x, real[:, :, :, ::1] out, unsigned char[:, :, :, ::1] arg):
    cdef Py_ssize_t nb = out.shape[0], nh = out.shape[1], nw = out.shape[2], nc = out.shape[3]
    cdef Py_ssize_t b, i, j, c, k
    cdef real best, v
    cdef unsigned char bk
    with nogil:
        for b in range(nb):
            for i in range(nh):
                for j in range(nw):
                    for c in range(nc):
                        best = x[b, 2 * i, 2 * j, c]
                        bk = 0
                        for k in range(1, 4):
                            v = x[b, 2 * i + (k >> 1), 2 * j + (k & 1), c]
                            if v > best:
                                best = v
                                bk = <unsigned char> k
                        out[b, i, j, c] = best
                        arg[b, i, j, c] = bk


def pool_bwd(real[:, :, :, ::1] gy, unsigned char[:, :, :, ::1] arg, real[:, :, :, ::1] gx):
    cdef Py_ssize_t nb = gy.shape[0], nh = gy.shape[1], nw = gy.shape[2], nc = gy.shape[3]
    cdef Py_ssize_t b, i, j, c
    cdef unsigned char k
    with nogil:
        for b in range(nb):
            for i in range(nh):
                for j in range(nw):
                    for c in range(nc):
                        k = arg[b, i, j, c]
                        gx[b, 2 * i + (k >> 1), 2 * j + (k & 1), c] += gy[b, i, j, c]
