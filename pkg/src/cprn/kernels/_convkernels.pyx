# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled gather/scatter kernels behind the convolution ops.

Semantics (column layout, zero padding, accumulation order) match
``cprn.kernels.numpy_backend`` bit for bit.
"""
import numpy as np

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] x, int k, int s, int p):
    """Unfold an NCHW batch into (n, c*k*k, oh*ow) patch columns."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2]
    cdef Py_ssize_t w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * p - k) // s + 1
    cdef Py_ssize_t ow = (w + 2 * p - k) // s + 1
    if oh < 1 or ow < 1:
        raise ValueError(f"im2col: non-positive output size for input {h}x{w}, k={k}, s={s}, p={p}")
    if real is float:
        dtype = np.float32
    else:
        dtype = np.float64
    cols_arr = np.zeros((n, c * k * k, oh * ow), dtype=dtype)
    cdef real[:, :, ::1] cols = cols_arr
    cdef Py_ssize_t b, ci, ki, kj, oy, ox, iy, ix, row, base
    with nogil:
        for b in range(n):
            for ci in range(c):
                for ki in range(k):
                    for kj in range(k):
                        row = (ci * k + ki) * k + kj
                        for oy in range(oh):
                            iy = oy * s + ki - p
                            if iy < 0 or iy >= h:
                                continue
                            base = oy * ow
                            for ox in range(ow):
                                ix = ox * s + kj - p
                                if 0 <= ix < w:
                                    cols[b, row, base + ox] = x[b, ci, iy, ix]
    return cols_arr


def col2im(real[:, :, ::1] cols, int h, int w, int k, int s, int p):
    """Adjoint of im2col: scatter-add patch columns back onto an NCHW grid."""
    cdef Py_ssize_t n = cols.shape[0]
    cdef Py_ssize_t ck2 = cols.shape[1]
    cdef Py_ssize_t c = ck2 // (k * k)
    cdef Py_ssize_t oh = (h + 2 * p - k) // s + 1
    cdef Py_ssize_t ow = (w + 2 * p - k) // s + 1
    if c * k * k != ck2:
        raise ValueError(f"col2im: column rows {ck2} not divisible by k*k={k * k}")
    if oh * ow != cols.shape[2]:
        raise ValueError(f"col2im: got {cols.shape[2]} columns, expected {oh}*{ow} for target {h}x{w}")
    if real is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.zeros((n, c, h, w), dtype=dtype)
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, ci, ki, kj, oy, ox, iy, ix, row, base
    with nogil:
        for b in range(n):
            for ci in range(c):
                # (ki, kj) stays outermost so per-cell accumulation order matches
                # the numpy backend's slice loop exactly.
                for ki in range(k):
                    for kj in range(k):
                        row = (ci * k + ki) * k + kj
                        for oy in range(oh):
                            iy = oy * s + ki - p
                            if iy < 0 or iy >= h:
                                continue
                            base = oy * ow
                            for ox in range(ow):
                                ix = ox * s + kj - p
                                if 0 <= ix < w:
                                    out[b, ci, iy, ix] += cols[b, row, base + ox]
    return out_arr
