# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled compute kernels.

Same call signatures and accumulation order as kernels_py (see the contract
documented there); forward passes and input gradients are bit-identical
across the two backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv2d_forward(const double[:, :, ::1] xp,
                   const double[:, :, :, ::1] w,
                   const double[::1] b,
                   Py_ssize_t stride, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1], k = w.shape[2]
    y_arr = np.empty((c_out, out_h, out_w))
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t co, ci, ky, kx, oy, ox
    cdef double acc
    for co in range(c_out):
        for oy in range(out_h):
            for ox in range(out_w):
                acc = b[co]
                for ci in range(c_in):
                    for ky in range(k):
                        for kx in range(k):
                            acc = acc + w[co, ci, ky, kx] * xp[ci, oy * stride + ky, ox * stride + kx]
                y[co, oy, ox] = acc
    return y_arr


def conv2d_backward_input(const double[:, :, ::1] gy,
                          const double[:, :, :, ::1] w,
                          Py_ssize_t stride, Py_ssize_t padded_h, Py_ssize_t padded_w):
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t out_h = gy.shape[1], out_w = gy.shape[2]
    gxp_arr = np.zeros((c_in, padded_h, padded_w))
    cdef double[:, :, ::1] gxp = gxp_arr
    cdef Py_ssize_t co, ci, ky, kx, oy, ox
    cdef double wv
    for ci in range(c_in):
        for ky in range(k):
            for kx in range(k):
                for co in range(c_out):
                    wv = w[co, ci, ky, kx]
                    for oy in range(out_h):
                        for ox in range(out_w):
                            gxp[ci, oy * stride + ky, ox * stride + kx] = (
                                gxp[ci, oy * stride + ky, ox * stride + kx] + wv * gy[co, oy, ox])
    return gxp_arr


def conv2d_backward_params(const double[:, :, ::1] gy,
                           const double[:, :, ::1] xp,
                           Py_ssize_t c_in, Py_ssize_t k, Py_ssize_t stride):
    cdef Py_ssize_t c_out = gy.shape[0], out_h = gy.shape[1], out_w = gy.shape[2]
    gw_arr = np.empty((c_out, c_in, k, k))
    gb_arr = np.empty(c_out)
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t co, ci, ky, kx, oy, ox
    cdef double acc
    for co in range(c_out):
        acc = 0.0
        for oy in range(out_h):
            for ox in range(out_w):
                acc = acc + gy[co, oy, ox]
        gb[co] = acc
        for ci in range(c_in):
            for ky in range(k):
                for kx in range(k):
                    acc = 0.0
                    for oy in range(out_h):
                        for ox in range(out_w):
                            acc = acc + gy[co, oy, ox] * xp[ci, oy * stride + ky, ox * stride + kx]
                    gw[co, ci, ky, kx] = acc
    return gw_arr, gb_arr


def maxpool_forward(const double[:, :, ::1] x, Py_ssize_t k):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t oh = h // k, ow = w // k
    y_arr = np.empty((c, oh, ow))
    idx_arr = np.empty((c, oh, ow), dtype=np.int64)
    cdef double[:, :, ::1] y = y_arr
    cdef cnp.int64_t[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t ch, oy, ox, wy, wx, iy, ix, best_i
    cdef double v, best
    for ch in range(c):
        for oy in range(oh):
            for ox in range(ow):
                best = x[ch, oy * k, ox * k]
                best_i = (oy * k) * w + ox * k
                for wy in range(k):
                    for wx in range(k):
                        iy = oy * k + wy
                        ix = ox * k + wx
                        v = x[ch, iy, ix]
                        if v > best:
                            best = v
                            best_i = iy * w + ix
                y[ch, oy, ox] = best
                idx[ch, oy, ox] = best_i
    return y_arr, idx_arr


def maxpool_backward(const double[:, :, ::1] gy,
                     const cnp.int64_t[:, :, ::1] argmax,
                     Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t c = gy.shape[0], oh = gy.shape[1], ow = gy.shape[2]
    gx_arr = np.zeros((c, h, w))
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t ch, oy, ox
    cdef cnp.int64_t f
    for ch in range(c):
        for oy in range(oh):
            for ox in range(ow):
                f = argmax[ch, oy, ox]
                gx[ch, f // w, f % w] = gy[ch, oy, ox]
    return gx_arr


def fc_forward(const double[::1] x, const double[:, ::1] w, const double[::1] b):
    cdef Py_ssize_t o_dim = w.shape[0], i_dim = w.shape[1]
    y_arr = np.empty(o_dim)
    cdef double[::1] y = y_arr
    cdef Py_ssize_t o, i
    cdef double acc
    for o in range(o_dim):
        acc = b[o]
        for i in range(i_dim):
            acc = acc + w[o, i] * x[i]
        y[o] = acc
    return y_arr


def fc_backward_input(const double[::1] gy, const double[:, ::1] w):
    cdef Py_ssize_t o_dim = w.shape[0], i_dim = w.shape[1]
    gx_arr = np.zeros(i_dim)
    cdef double[::1] gx = gx_arr
    cdef Py_ssize_t o, i
    for o in range(o_dim):
        for i in range(i_dim):
            gx[i] = gx[i] + w[o, i] * gy[o]
    return gx_arr


def fc_backward_params(const double[::1] gy, const double[::1] x):
    cdef Py_ssize_t o_dim = gy.shape[0], i_dim = x.shape[0]
    gw_arr = np.empty((o_dim, i_dim))
    gb_arr = np.empty(o_dim)
    cdef double[:, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t o, i
    for o in range(o_dim):
        gb[o] = gy[o]
        for i in range(i_dim):
            gw[o, i] = gy[o] * x[i]
    return gw_arr, gb_arr
