"""Pure-numpy gather/scatter kernels: the fallback when the extension is not built."""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def im2col(x, k, s, p):
    """Unfold an NCHW batch into (n, c*k*k, oh*ow) patch columns with zero padding."""
    n, c, h, w = x.shape
    oh = (h + 2 * p - k) // s + 1
    ow = (w + 2 * p - k) // s + 1
    if oh < 1 or ow < 1:
        raise ValueError(f"im2col: non-positive output size for input {h}x{w}, k={k}, s={s}, p={p}")
    if p > 0:
        xp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=x.dtype)
        xp[:, :, p:p + h, p:p + w] = x
    else:
        xp = np.ascontiguousarray(x)
    sn, sc, sh, sw = xp.strides
    view = as_strided(xp, shape=(n, c, k, k, oh, ow), strides=(sn, sc, sh, sw, sh * s, sw * s))
    return view.reshape(n, c * k * k, oh * ow)


def col2im(cols, h, w, k, s, p):
    """Adjoint of im2col: scatter-add patch columns back onto an NCHW grid."""
    n, ck2, ncols = cols.shape
    c = ck2 // (k * k)
    if c * k * k != ck2:
        raise ValueError(f"col2im: column rows {ck2} not divisible by k*k={k * k}")
    oh = (h + 2 * p - k) // s + 1
    ow = (w + 2 * p - k) // s + 1
    if oh * ow != ncols:
        raise ValueError(f"col2im: got {ncols} columns, expected {oh}*{ow} for target {h}x{w}")
    cols6 = cols.reshape(n, c, k, k, oh, ow)
    out = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=cols.dtype)
    for ki in range(k):
        for kj in range(k):
            out[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s] += cols6[:, :, ki, kj]
    if p > 0:
        out = np.ascontiguousarray(out[:, :, p:p + h, p:p + w])
    return out
