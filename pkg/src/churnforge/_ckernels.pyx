# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: conv2d patch gather/scatter and CART split scans.

Mirrors churnforge.kernels.pure exactly, including accumulation order, so
both backends produce bit-identical results.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def im2col(cnp.float64_t[:, :, :, :] x, int kh, int kw, int sh, int sw):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t ho = (H - kh) // sh + 1
    cdef Py_ssize_t wo = (W - kw) // sw + 1
    out_arr = np.empty((B, C * kh * kw, ho * wo), dtype=np.float64)
    cdef cnp.float64_t[:, :, :] out = out_arr
    cdef Py_ssize_t b, c, i, j, oh, ow, row
    for b in range(B):
        for c in range(C):
            for i in range(kh):
                for j in range(kw):
                    row = c * kh * kw + i * kw + j
                    for oh in range(ho):
                        for ow in range(wo):
                            out[b, row, oh * wo + ow] = x[b, c, i + oh * sh, j + ow * sw]
    return out_arr


def col2im(cnp.float64_t[:, :, :] cols, int B, int C, int H, int W,
           int kh, int kw, int sh, int sw):
    cdef Py_ssize_t ho = (H - kh) // sh + 1
    cdef Py_ssize_t wo = (W - kw) // sw + 1
    out_arr = np.zeros((B, C, H, W), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, :] out = out_arr
    cdef Py_ssize_t b, c, i, j, oh, ow, row
    for b in range(B):
        for c in range(C):
            for i in range(kh):
                for j in range(kw):
                    row = c * kh * kw + i * kw + j
                    for oh in range(ho):
                        for ow in range(wo):
                            out[b, c, i + oh * sh, j + ow * sw] += cols[b, row, oh * wo + ow]
    return out_arr


def split_gains(cnp.float64_t[:] y_sorted, cnp.int64_t[:] cand_pos, str criterion):
    cdef Py_ssize_t n = y_sorted.shape[0]
    cdef Py_ssize_t m = cand_pos.shape[0]
    prefix_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[:] prefix = prefix_arr
    cdef double s = 0.0
    cdef Py_ssize_t k
    for k in range(n):
        s += y_sorted[k]
        prefix[k] = s
    cdef double total = prefix[n - 1]
    gains_arr = np.empty(m, dtype=np.float64)
    cdef cnp.float64_t[:] gains = gains_arr
    cdef double nl, nr, sl, sr, parent
    cdef int use_variance
    if criterion == "variance":
        use_variance = 1
    elif criterion == "gini":
        use_variance = 0
    else:
        raise ValueError(f"unknown split criterion: {criterion!r}")
    parent = total * (n - total) / n
    for k in range(m):
        nl = <double> cand_pos[k]
        nr = n - nl
        sl = prefix[cand_pos[k] - 1]
        sr = total - sl
        if use_variance:
            gains[k] = sl * sl / nl + sr * sr / nr - total * total / n
        else:
            gains[k] = 2.0 * (parent - sl * (nl - sl) / nl - sr * (nr - sr) / nr)
    return gains_arr
