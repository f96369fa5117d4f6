"""Pure-NumPy compute kernels, used when the compiled extension is absent.

Accumulation-order contract: forward kernels and input-gradient kernels sum
their terms in exactly the same order as the Cython extension (bias first,
then contributions in (c_in, ky, kx) order; input gradients in
(c_in, ky, kx, c_out) order), so the two backends produce bit-identical
activations and input gradients. Convolution parameter gradients use NumPy
reductions and may differ from the extension in the last few ulps; they are
still deterministic within a backend.

Convolution kernels take the input already zero-padded; padding is applied
once by the caller so both backends see identical arrays.
"""

import numpy as np


def conv2d_forward(xp, w, b, stride, out_h, out_w):
    """Convolve padded input xp (c_in, hp, wp) with w (c_out, c_in, k, k)."""
    c_out, c_in, k, _ = w.shape
    hi = (out_h - 1) * stride + 1
    wi = (out_w - 1) * stride + 1
    y = np.empty((c_out, out_h, out_w))
    y[:] = b[:, None, None]
    for ci in range(c_in):
        for ky in range(k):
            for kx in range(k):
                patch = xp[ci, ky:ky + hi:stride, kx:kx + wi:stride]
                y += w[:, ci, ky, kx][:, None, None] * patch
    return y


def conv2d_backward_input(gy, w, stride, padded_h, padded_w):
    """Gradient w.r.t. the padded input; caller strips the padding."""
    c_out, c_in, k, _ = w.shape
    out_h, out_w = gy.shape[1], gy.shape[2]
    hi = (out_h - 1) * stride + 1
    wi = (out_w - 1) * stride + 1
    gxp = np.zeros((c_in, padded_h, padded_w))
    for ci in range(c_in):
        for ky in range(k):
            for kx in range(k):
                sub = gxp[ci, ky:ky + hi:stride, kx:kx + wi:stride]
                for co in range(c_out):
                    sub += w[co, ci, ky, kx] * gy[co]
    return gxp


def conv2d_backward_params(gy, xp, c_in, k, stride):
    """Gradients w.r.t. conv weight and bias."""
    c_out, out_h, out_w = gy.shape
    hi = (out_h - 1) * stride + 1
    wi = (out_w - 1) * stride + 1
    gw = np.empty((c_out, c_in, k, k))
    for ci in range(c_in):
        for ky in range(k):
            for kx in range(k):
                patch = xp[ci, ky:ky + hi:stride, kx:kx + wi:stride]
                gw[:, ci, ky, kx] = (gy * patch).sum(axis=(1, 2))
    gb = gy.sum(axis=(1, 2))
    return gw, gb


def maxpool_forward(x, k):
    """Non-overlapping max pool (stride == kernel).

    Returns (pooled, argmax) where argmax holds, per output cell, the flat
    index into the input (h * W + w) of the first maximal element in
    row-major window order.
    """
    c, h, w = x.shape
    oh, ow = h // k, w // k
    win = x.reshape(c, oh, k, ow, k).transpose(0, 1, 3, 2, 4).reshape(c, oh, ow, k * k)
    idx = win.argmax(axis=3)
    y = np.take_along_axis(win, idx[..., None], axis=3)[..., 0]
    oy = np.arange(oh)[None, :, None]
    ox = np.arange(ow)[None, None, :]
    flat = (oy * k + idx // k) * w + (ox * k + idx % k)
    return np.ascontiguousarray(y), np.ascontiguousarray(flat.astype(np.int64))


def maxpool_backward(gy, argmax, h, w):
    """Route pooled gradients back to the argmax positions."""
    c = gy.shape[0]
    gx = np.zeros((c, h * w))
    np.put_along_axis(gx, argmax.reshape(c, -1), gy.reshape(c, -1), axis=1)
    return gx.reshape(c, h, w)


def fc_forward(x, w, b):
    """Dense layer y = W x + b, accumulated column-by-column."""
    y = b.copy()
    for i in range(x.shape[0]):
        y += w[:, i] * x[i]
    return y


def fc_backward_input(gy, w):
    gx = np.zeros(w.shape[1])
    for o in range(w.shape[0]):
        gx += w[o] * gy[o]
    return gx


def fc_backward_params(gy, x):
    return np.multiply.outer(gy, x), gy.copy()
