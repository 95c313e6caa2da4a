"""Pure numpy implementations of the hot kernels.

These are the fallback backend for churnforge.kernels and the reference
the compiled extension is tested against. Accumulation order matches the
Cython loops so both backends produce bit-identical results.
"""

import numpy as np

BACKEND = "pure"


def im2col(x, kh, kw, sh, sw):
    """Gather sliding patches of a padded input into columns.

    x: (B, C, H, W) float64, already padded.
    Returns (B, C*kh*kw, Ho*Wo) with Ho = (H-kh)//sh + 1, Wo = (W-kw)//sw + 1.
    Column row index is c*(kh*kw) + i*kw + j.
    """
    B, C, H, W = x.shape
    ho = (H - kh) // sh + 1
    wo = (W - kw) // sw + 1
    sb, sc, srow, scol = x.strides
    view = np.lib.stride_tricks.as_strided(
        x,
        shape=(B, C, kh, kw, ho, wo),
        strides=(sb, sc, srow, scol, srow * sh, scol * sw),
        writeable=False,
    )
    return np.ascontiguousarray(view).reshape(B, C * kh * kw, ho * wo)


def col2im(cols, B, C, H, W, kh, kw, sh, sw):
    """Scatter-add columns back onto a padded input grid (im2col adjoint)."""
    ho = (H - kh) // sh + 1
    wo = (W - kw) // sw + 1
    out = np.zeros((B, C, H, W), dtype=np.float64)
    cols6 = cols.reshape(B, C, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + ho * sh : sh, j : j + wo * sw : sw] += cols6[:, :, i, j]
    return out


def split_gains(y_sorted, cand_pos, criterion):
    """Evaluate split gains at candidate positions of one sorted feature.

    y_sorted: targets ordered by ascending feature value.
    cand_pos: candidate left-partition sizes (1 <= pos <= n-1), int64.
    criterion: "variance" (sum-of-squares reduction, regression) or
               "gini" (unnormalized Gini decrease, binary labels).
    Returns one gain per candidate; larger is better, 0 means useless split.
    """
    n = y_sorted.shape[0]
    prefix = np.cumsum(y_sorted)
    total = prefix[-1]
    nl = cand_pos.astype(np.float64)
    nr = n - nl
    sl = prefix[cand_pos - 1]
    sr = total - sl
    if criterion == "variance":
        return sl * sl / nl + sr * sr / nr - total * total / n
    if criterion == "gini":
        parent = total * (n - total) / n
        return 2.0 * (parent - sl * (nl - sl) / nl - sr * (nr - sr) / nr)
    raise ValueError(f"unknown split criterion: {criterion!r}")
