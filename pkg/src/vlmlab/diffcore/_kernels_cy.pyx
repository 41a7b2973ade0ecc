# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel core.

Fused single-pass loops over C-contiguous float64 buffers. Mirrors the
signatures of ``_kernels_np``; at desk scale these wins come from avoiding
numpy temporaries and per-call dispatch overhead, not from beating BLAS.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erf, exp, log, sqrt, floor

cnp.import_array()

cdef double _INV_SQRT2 = 0.7071067811865476
cdef double _INV_SQRT_2PI = 0.3989422804014327


def masked_softmax(double[:, ::1] x, mask):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef unsigned char[:, ::1] mk
    cdef Py_ssize_t i, j
    cdef bint first
    cdef double m, s, v
    if mask is None:
        for i in range(n):
            m = x[i, 0]
            for j in range(1, d):
                if x[i, j] > m:
                    m = x[i, j]
            s = 0.0
            for j in range(d):
                v = exp(x[i, j] - m)
                out[i, j] = v
                s += v
            for j in range(d):
                out[i, j] /= s
    else:
        mk = mask
        for i in range(n):
            m = 0.0
            s = 0.0
            v = 0.0
            # max over unmasked entries; caller guarantees at least one
            first = 1
            for j in range(d):
                if mk[i, j]:
                    if first or x[i, j] > m:
                        m = x[i, j]
                        first = 0
            for j in range(d):
                if mk[i, j]:
                    v = exp(x[i, j] - m)
                    out[i, j] = v
                    s += v
                else:
                    out[i, j] = 0.0
            for j in range(d):
                out[i, j] /= s
    return out_arr


def softmax_backward(double[:, ::1] y, double[:, ::1] dy):
    cdef Py_ssize_t n = y.shape[0], d = y.shape[1]
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] dx = out_arr
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(d):
            dot += dy[i, j] * y[i, j]
        for j in range(d):
            dx[i, j] = y[i, j] * (dy[i, j] - dot)
    return out_arr


def layer_norm_forward(double[:, ::1] x, double[::1] gain, double[::1] bias, double eps):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    y_arr = np.empty((n, d), dtype=np.float64)
    mean_arr = np.empty(n, dtype=np.float64)
    rstd_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef double[::1] mean = mean_arr, rstd = rstd_arr
    cdef Py_ssize_t i, j
    cdef double m, v, r, c
    for i in range(n):
        m = 0.0
        for j in range(d):
            m += x[i, j]
        m /= d
        v = 0.0
        for j in range(d):
            c = x[i, j] - m
            v += c * c
        v /= d
        r = 1.0 / sqrt(v + eps)
        mean[i] = m
        rstd[i] = r
        for j in range(d):
            y[i, j] = (x[i, j] - m) * r * gain[j] + bias[j]
    return y_arr, mean_arr, rstd_arr


def layer_norm_backward(double[:, ::1] x, double[::1] gain, double[::1] mean,
                        double[::1] rstd, double[:, ::1] dy):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    dx_arr = np.empty((n, d), dtype=np.float64)
    dgain_arr = np.zeros(d, dtype=np.float64)
    dbias_arr = np.zeros(d, dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef double[::1] dgain = dgain_arr, dbias = dbias_arr
    cdef Py_ssize_t i, j
    cdef double m, r, xh, dxh, s1, s2
    for i in range(n):
        m = mean[i]
        r = rstd[i]
        s1 = 0.0
        s2 = 0.0
        for j in range(d):
            xh = (x[i, j] - m) * r
            dxh = dy[i, j] * gain[j]
            dgain[j] += dy[i, j] * xh
            dbias[j] += dy[i, j]
            s1 += dxh
            s2 += dxh * xh
        s1 /= d
        s2 /= d
        for j in range(d):
            xh = (x[i, j] - m) * r
            dx[i, j] = r * (dy[i, j] * gain[j] - s1 - xh * s2)
    return dx_arr, dgain_arr, dbias_arr


def gelu_forward(double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = 0.5 * x[i] * (1.0 + erf(x[i] * _INV_SQRT2))
    return out_arr


def gelu_backward(double[::1] x, double[::1] dy):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double cdf, phi
    for i in range(n):
        cdf = 0.5 * (1.0 + erf(x[i] * _INV_SQRT2))
        phi = exp(-0.5 * x[i] * x[i]) * _INV_SQRT_2PI
        out[i] = dy[i] * (cdf + x[i] * phi)
    return out_arr


def logsumexp_rows(double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, s
    for i in range(n):
        m = x[i, 0]
        for j in range(1, d):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(d):
            s += exp(x[i, j] - m)
        out[i] = m + log(s)
    return out_arr


def cross_entropy_backward(double[:, ::1] logits, double[::1] lse,
                           cnp.int64_t[::1] targets, double[::1] row_scale):
    cdef Py_ssize_t n = logits.shape[0], d = logits.shape[1]
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] dl = out_arr
    cdef Py_ssize_t i, j
    cdef double sc
    for i in range(n):
        sc = row_scale[i]
        if sc == 0.0:
            for j in range(d):
                dl[i, j] = 0.0
        else:
            for j in range(d):
                dl[i, j] = exp(logits[i, j] - lse[i]) * sc
            dl[i, targets[i]] -= sc
    return out_arr


def bilinear_resize(double[:, :, ::1] img, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t in_h = img.shape[0], in_w = img.shape[1], c = img.shape[2]
    out_arr = np.empty((out_h, out_w, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t oy, ox, ch, y0, x0, y1, x1
    cdef double sy, sx, fy, fx, w00, w01, w10, w11
    cdef double scale_y = in_h / <double>out_h
    cdef double scale_x = in_w / <double>out_w
    for oy in range(out_h):
        sy = (oy + 0.5) * scale_y - 0.5
        if sy < 0.0:
            sy = 0.0
        if sy > in_h - 1.0:
            sy = in_h - 1.0
        y0 = <Py_ssize_t>floor(sy)
        y1 = y0 + 1
        if y1 > in_h - 1:
            y1 = in_h - 1
        fy = sy - y0
        for ox in range(out_w):
            sx = (ox + 0.5) * scale_x - 0.5
            if sx < 0.0:
                sx = 0.0
            if sx > in_w - 1.0:
                sx = in_w - 1.0
            x0 = <Py_ssize_t>floor(sx)
            x1 = x0 + 1
            if x1 > in_w - 1:
                x1 = in_w - 1
            fx = sx - x0
            w00 = (1.0 - fy) * (1.0 - fx)
            w01 = (1.0 - fy) * fx
            w10 = fy * (1.0 - fx)
            w11 = fy * fx
            for ch in range(c):
                out[oy, ox, ch] = (w00 * img[y0, x0, ch] + w01 * img[y0, x1, ch]
                                   + w10 * img[y1, x0, ch] + w11 * img[y1, x1, ch])
    return out_arr
