"""Numpy reference implementations of the hot kernels.

This is the pure-Python fallback backend. Signatures are shared with the
compiled backend in ``_kernels_cy``; both operate on C-contiguous float64
arrays and return freshly allocated arrays.
"""

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


def masked_softmax(x, mask):
    """Row softmax over the last axis of a 2-D array.

    mask is a uint8 array of the same shape (1 = attend) or None. Masked
    entries come out exactly 0; rows are max-subtracted for stability.
    Rows with no unmasked entry are the caller's responsibility to reject.
    """
    if mask is None:
        m = x.max(axis=1, keepdims=True)
        e = np.exp(x - m)
    else:
        valid = mask.astype(bool)
        m = np.where(valid, x, -np.inf).max(axis=1, keepdims=True)
        e = np.where(valid, np.exp(np.where(valid, x - m, 0.0)), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(y, dy):
    """dx for y = softmax(x): y * (dy - sum(dy * y))."""
    dot = (dy * y).sum(axis=1, keepdims=True)
    return y * (dy - dot)


def layer_norm_forward(x, gain, bias, eps):
    """Row-wise layer norm. Returns (y, mean, rstd) with mean/rstd per row."""
    mean = x.mean(axis=1)
    var = ((x - mean[:, None]) ** 2).mean(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * gain + bias, mean, rstd


def layer_norm_backward(x, gain, mean, rstd, dy):
    """Gradients of layer_norm_forward. Returns (dx, dgain, dbias)."""
    xhat = (x - mean[:, None]) * rstd[:, None]
    dbias = dy.sum(axis=0)
    dgain = (dy * xhat).sum(axis=0)
    dxhat = dy * gain
    n = x.shape[1]
    dx = rstd[:, None] * (
        dxhat
        - dxhat.mean(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=1, keepdims=True) / n
    )
    return dx, dgain, dbias


def gelu_forward(x):
    """Exact (erf-based) GELU."""
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_backward(x, dy):
    """dx for exact GELU: Phi(x) + x * phi(x)."""
    phi = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    return dy * (cdf + x * phi)


def logsumexp_rows(x):
    """Stable log-sum-exp over the last axis of a 2-D array."""
    m = x.max(axis=1)
    return m + np.log(np.exp(x - m[:, None]).sum(axis=1))


def cross_entropy_backward(logits, lse, targets, row_scale):
    """dlogits for mean masked NLL.

    row_scale holds upstream_grad / n_unmasked for rows in the loss and 0
    elsewhere, so masked rows get an exactly zero gradient.
    """
    d = np.exp(logits - lse[:, None])
    d[np.arange(logits.shape[0]), targets] -= 1.0
    d *= row_scale[:, None]
    return d


def bilinear_resize(img, out_h, out_w):
    """Bilinear image resample with half-pixel center alignment.

    img is [H, W, C] float64; returns [out_h, out_w, C]. Identity sizes are
    returned as a copy by the dispatching caller, not here.
    """
    in_h, in_w = img.shape[0], img.shape[1]
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = img[y0][:, x0] * (1.0 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1.0 - fx) + img[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy
