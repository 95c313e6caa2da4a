"""Structured ops on top of the core primitives.

conv2d, maxpool2d, softmax and dropout are primitives with hand-written
backward rules (conv2d runs on the hot im2col/col2im kernels); attention,
normalize and the losses are composites that the tape differentiates on
its own.
"""

import numpy as np

from churnforge import kernels
from churnforge.errors import ConfigError, ShapeError
from churnforge.tensor import core
from churnforge.tensor.core import Tensor, _as_tensor, _finalize


def conv2d(x, w, stride=(1, 1), padding=(0, 0), groups=1):
    """Grouped 2-D cross-correlation.

    x: (B, C, H, W); w: (F, C/groups, kh, kw) -> (B, F, Ho, Wo) with
    Ho = (H + 2*ph - kh)//sh + 1 and likewise Wo. No kernel flip.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d needs 4-D input and kernel, got {x.shape} and {w.shape}")
    B, C, H, W = x.shape
    F, Cg, kh, kw = w.shape
    sh, sw = stride
    ph, pw = padding
    if C % groups or F % groups:
        raise ShapeError(f"channels {C} and filters {F} must divide groups={groups}")
    if Cg * groups != C:
        raise ShapeError(f"kernel expects {Cg * groups} input channels, input has {C}")
    if kh > H + 2 * ph or kw > W + 2 * pw:
        raise ShapeError(
            f"kernel {kh}x{kw} larger than padded input {H + 2 * ph}x{W + 2 * pw}"
        )
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    Hp, Wp = H + 2 * ph, W + 2 * pw
    ho = (Hp - kh) // sh + 1
    wo = (Wp - kw) // sw + 1
    cols = kernels.im2col(xp, kh, kw, sh, sw)  # (B, C*kh*kw, L)
    L = ho * wo
    colsg = cols.reshape(B, groups, (C // groups) * kh * kw, L)
    wg = w.data.reshape(groups, F // groups, (C // groups) * kh * kw)
    out = np.matmul(wg, colsg)  # (B, g, F/g, L)
    out = out.reshape(B, F, ho, wo)

    def bwd(g):
        dog = g.reshape(B, groups, F // groups, L)
        dw = np.einsum("bgfl,bgkl->gfk", dog, colsg).reshape(F, Cg, kh, kw)
        dcols = np.matmul(wg.swapaxes(-1, -2), dog)  # (B, g, K, L)
        dxp = kernels.col2im(
            dcols.reshape(B, C * kh * kw, L), B, C, Hp, Wp, kh, kw, sh, sw
        )
        dx = dxp[:, :, ph : ph + H, pw : pw + W] if (ph or pw) else dxp
        return dx, dw

    return _finalize(out, (x, w), bwd)


def maxpool2d(x, pool):
    """Non-overlapping max pooling; trailing rows/cols that do not fill a
    window are dropped (floor semantics)."""
    x = _as_tensor(x)
    B, C, H, W = x.shape
    p, q = pool
    ho, wo = H // p, W // q
    cropped = x.data[:, :, : ho * p, : wo * q]
    win = cropped.reshape(B, C, ho, p, wo, q)
    out = win.max(axis=(3, 5))

    def bwd(g):
        mask = win == out[:, :, :, None, :, None]
        # split ties evenly so the gradient check stays consistent
        counts = mask.sum(axis=(3, 5), keepdims=True)
        dcrop = mask * (g[:, :, :, None, :, None] / counts)
        dx = np.zeros_like(x.data)
        dx[:, :, : ho * p, : wo * q] = dcrop.reshape(B, C, ho * p, wo * q)
        return (dx,)

    return _finalize(out, (x,), bwd)


def softmax(x, axis=-1):
    """Max-subtracted softmax; every slice along ``axis`` sums to 1."""
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _finalize(out, (x,), bwd)


def dropout(x, p, mode, rng):
    """Inverted dropout: train mode zeroes with probability p and rescales
    survivors by 1/(1-p); infer mode is the identity."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    x = _as_tensor(x)
    if mode != "train" or p == 0.0:
        out = x.data.copy()

        def bwd_id(g):
            return (g,)

        return _finalize(out, (x,), bwd_id)
    keep = rng.random(x.shape) >= p
    scale = 1.0 / (1.0 - p)
    out = x.data * keep * scale

    def bwd(g):
        return (g * keep * scale,)

    return _finalize(out, (x,), bwd)


def normalize(x, gamma, beta, axes, eps=1e-5, ext_stats=None):
    """Normalize then affine-transform: gamma * (x - mu)/sqrt(var + eps) + beta.

    With ext_stats=(mean, var) those constants are used (inference /
    frozen-stats batch norm); otherwise moments are taken over ``axes`` and
    gradients flow through them. Returns (out, batch_mean, batch_var) with
    the moments as plain arrays for running-stat updates.
    """
    x = _as_tensor(x)
    if ext_stats is not None:
        mu_a, var_a = ext_stats
        xc = core.sub(x, Tensor(mu_a))
        inv = (var_a + eps) ** -0.5
        xhat = core.mul(xc, Tensor(inv))
        return core.add(core.mul(xhat, gamma), beta), mu_a, var_a
    mu = core.mean(x, axis=axes, keepdims=True)
    xc = core.sub(x, mu)
    var = core.mean(core.mul(xc, xc), axis=axes, keepdims=True)
    inv = core.pow_const(core.add(var, eps), -0.5)
    xhat = core.mul(xc, inv)
    out = core.add(core.mul(xhat, gamma), beta)
    return out, mu.data, var.data


def attention(q, k, v, n_heads, wq, wk, wv, wo, bq, bk, bv, bo):
    """Multi-head scaled dot-product attention with output projection.

    q, k, v: (B, T, d_model). Heads are split from d_model, attended
    independently with softmax(Q Kt / sqrt(d_head)) V, concatenated and
    projected by wo.
    """
    B, T, d = q.shape
    if d % n_heads:
        raise ConfigError(f"model dim {d} not divisible by {n_heads} heads")
    dh = d // n_heads

    def project(t, w, b):
        h = core.add(core.matmul(t, w), b)  # (B, T, d)
        h = core.reshape(h, (B, t.shape[1], n_heads, dh))
        return core.transpose(h, (0, 2, 1, 3))  # (B, nh, T, dh)

    qh = project(q, wq, bq)
    kh = project(k, wk, bk)
    vh = project(v, wv, bv)
    scores = core.mul(core.matmul(qh, core.transpose(kh, (0, 1, 3, 2))), dh**-0.5)
    weights = softmax(scores, axis=-1)  # (B, nh, Tq, Tk)
    ctx = core.matmul(weights, vh)  # (B, nh, Tq, dh)
    ctx = core.transpose(ctx, (0, 2, 1, 3))
    ctx = core.reshape(ctx, (B, T, d))
    return core.add(core.matmul(ctx, wo), bo)


def bce_with_logits(logits, targets, pos_weight=1.0):
    """Mean binary cross-entropy on sigmoid(logits), computed stably.

    per-element loss = pos_weight * y * softplus(-z) + (1 - y) * softplus(z).
    """
    logits, targets = _as_tensor(logits), _as_tensor(targets)
    if logits.shape != targets.shape:
        raise ShapeError(f"logits {logits.shape} vs targets {targets.shape}")
    z, y = logits.data, targets.data
    loss = pos_weight * y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    out = np.asarray(loss.mean())
    n = z.size

    def bwd(g):
        sz = _stable_sigmoid(z)
        dz = ((1.0 - y) * sz - pos_weight * y * (1.0 - sz)) * (g / n)
        return dz, None

    return _finalize(out, (logits, targets), bwd)


def squared_error_on_sigmoid(logits, targets):
    """Mean (y - sigmoid(z))^2, the literal squared-difference objective."""
    p = core.sigmoid(logits)
    d = core.sub(_as_tensor(targets), p)
    return core.mean(core.mul(d, d))


def _stable_sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
