"""Canned finite-difference verification suites.

Two layers: ``op_checks`` probes every differentiable tensor op in
isolation; ``architecture_checks`` runs end-to-end checks through each
desk-preset architecture under the training loss. Both return lists of
(name, GradCheckReport) so callers can print or assert.
"""

import numpy as np

from churnforge.deep.architectures import ARCHITECTURES, ArchitectureConfig, build_model
from churnforge.deep.layers import ForwardContext
from churnforge.tensor import (
    Tensor,
    add,
    attention,
    bce_with_logits,
    broadcast_to,
    concat,
    conv2d,
    dropout,
    exp,
    gelu,
    grad_check,
    log,
    matmul,
    maxpool2d,
    mean,
    mul,
    narrow,
    normalize,
    pow_const,
    relu,
    reshape,
    sigmoid,
    softmax,
    squared_error_on_sigmoid,
    sub,
    sum_,
    tanh,
    transpose,
)


def _tensor(rng, shape, positive=False):
    data = rng.normal(size=shape)
    if positive:
        data = np.abs(data) + 0.5
    return Tensor(data, requires_grad=True)


def _weighted_sum(out, weights):
    return sum_(mul(out, Tensor(weights)))


def op_checks(seed=0, tol=1e-4):
    """Gradient-check every tensor op; returns [(name, report), ...]."""
    rng = np.random.default_rng(seed)
    checks = []

    def register(name, params, fn):
        checks.append((name, params, fn))

    a = _tensor(rng, (4, 5))
    b = _tensor(rng, (4, 5))
    row = _tensor(rng, (1, 5))  # broadcast operand
    w45 = rng.normal(size=(4, 5))
    register("add", [a, b], lambda: _weighted_sum(add(a, b), w45))
    register("add_broadcast", [a, row], lambda: _weighted_sum(add(a, row), w45))
    register("sub", [a, b], lambda: _weighted_sum(sub(a, b), w45))
    register("mul", [a, b], lambda: _weighted_sum(mul(a, b), w45))

    p = _tensor(rng, (3, 4), positive=True)
    w34 = rng.normal(size=(3, 4))
    register("pow_const", [p], lambda: _weighted_sum(pow_const(p, 1.7), w34))
    register("log", [p], lambda: _weighted_sum(log(p), w34))
    c = _tensor(rng, (3, 4))
    register("exp", [c], lambda: _weighted_sum(exp(c), w34))
    register("gelu", [c], lambda: _weighted_sum(gelu(c), w34))
    register("sigmoid", [c], lambda: _weighted_sum(sigmoid(c), w34))
    register("tanh", [c], lambda: _weighted_sum(tanh(c), w34))
    # relu kink: keep probes away from zero
    r = Tensor(rng.normal(size=(3, 4)) + np.where(rng.random((3, 4)) < 0.5, -1.0, 1.0),
               requires_grad=True)
    register("relu", [r], lambda: _weighted_sum(relu(r), w34))

    m1 = _tensor(rng, (3, 4))
    m2 = _tensor(rng, (4, 6))
    w36 = rng.normal(size=(3, 6))
    register("matmul", [m1, m2], lambda: _weighted_sum(matmul(m1, m2), w36))
    bm1 = _tensor(rng, (2, 3, 4))
    bm2 = _tensor(rng, (2, 4, 6))
    w236 = rng.normal(size=(2, 3, 6))
    register("matmul_batched", [bm1, bm2], lambda: _weighted_sum(matmul(bm1, bm2), w236))

    t = _tensor(rng, (2, 3, 4))
    w24x = rng.normal(size=(24,))
    register("reshape", [t], lambda: _weighted_sum(reshape(t, (24,)), w24x))
    w432 = rng.normal(size=(4, 3, 2))
    register("transpose", [t], lambda: _weighted_sum(transpose(t, (2, 1, 0)), w432))
    w235 = rng.normal(size=(2, 3, 5))
    register("broadcast_to", [row],
             lambda: _weighted_sum(broadcast_to(reshape(row, (1, 1, 5)), (2, 3, 5)), w235))
    c1 = _tensor(rng, (2, 3))
    c2 = _tensor(rng, (2, 2))
    w25 = rng.normal(size=(2, 5))
    register("concat", [c1, c2], lambda: _weighted_sum(concat([c1, c2], axis=1), w25))
    w224 = rng.normal(size=(2, 2, 4))
    register("narrow", [t], lambda: _weighted_sum(narrow(t, 1, 1, 2), w224))
    w24 = rng.normal(size=(2, 4))
    register("sum", [t], lambda: _weighted_sum(sum_(t, axis=1), w24))
    w131 = rng.normal(size=(1, 3, 1))
    register("sum_keepdims", [t],
             lambda: _weighted_sum(sum_(t, axis=(0, 2), keepdims=True), w131))
    w23 = rng.normal(size=(2, 3))
    register("mean", [t], lambda: _weighted_sum(mean(t, axis=2), w23))
    register("mean_all", [t], lambda: mean(t))

    x = _tensor(rng, (2, 3, 6, 5))
    k = _tensor(rng, (4, 3, 3, 2))
    w_conv = rng.normal(size=(2, 4, 3, 4))
    register("conv2d", [x, k],
             lambda: _weighted_sum(conv2d(x, k, stride=(2, 1), padding=(1, 0)), w_conv))
    xg = _tensor(rng, (2, 4, 5, 5))
    kg = _tensor(rng, (6, 2, 3, 3))
    w_grp = rng.normal(size=(2, 6, 5, 5))
    register("conv2d_grouped", [xg, kg],
             lambda: _weighted_sum(conv2d(xg, kg, padding=(1, 1), groups=2), w_grp))
    kd = _tensor(rng, (4, 1, 3, 3))
    w_dw = rng.normal(size=(2, 4, 5, 5))
    register("conv2d_depthwise", [xg, kd],
             lambda: _weighted_sum(conv2d(xg, kd, padding=(1, 1), groups=4), w_dw))
    # maxpool kink: ties between pooled entries break finite differences
    mp_data = rng.permutation(np.arange(2 * 3 * 6 * 4, dtype=np.float64)).reshape(2, 3, 6, 4)
    mp = Tensor(mp_data * 0.1, requires_grad=True)
    w_mp = rng.normal(size=(2, 3, 3, 4))
    register("maxpool2d", [mp], lambda: _weighted_sum(maxpool2d(mp, (2, 1)), w_mp))

    s = _tensor(rng, (3, 5))
    w35 = rng.normal(size=(3, 5))
    register("softmax", [s], lambda: _weighted_sum(softmax(s, axis=-1), w35))

    nx = _tensor(rng, (4, 3, 5, 2))
    gamma = _tensor(rng, (1, 3, 1, 1), positive=True)
    beta = _tensor(rng, (1, 3, 1, 1))
    w_bn = rng.normal(size=(4, 3, 5, 2))
    register("normalize_batch", [nx, gamma, beta],
             lambda: _weighted_sum(normalize(nx, gamma, beta, axes=(0, 2, 3))[0], w_bn))
    lx = _tensor(rng, (4, 6))
    lg = _tensor(rng, (6,), positive=True)
    lb = _tensor(rng, (6,))
    w_ln = rng.normal(size=(4, 6))
    register("normalize_layer", [lx, lg, lb],
             lambda: _weighted_sum(normalize(lx, lg, lb, axes=(1,))[0], w_ln))
    ext = (rng.normal(size=(1, 6)), np.abs(rng.normal(size=(1, 6))) + 0.5)
    w_ext = rng.normal(size=(4, 6))
    register("normalize_ext_stats", [lx, lg, lb],
             lambda: _weighted_sum(
                 normalize(lx, reshape(lg, (1, 6)), reshape(lb, (1, 6)),
                           axes=(0,), ext_stats=ext)[0],
                 w_ext))

    d_model, heads = 8, 2
    q = _tensor(rng, (2, 4, d_model))
    attn_params = [q]
    mats = []
    for _ in range(4):
        w = _tensor(rng, (d_model, d_model))
        bias = _tensor(rng, (d_model,))
        attn_params += [w, bias]
        mats.append((w, bias))
    w_attn = rng.normal(size=(2, 4, d_model))
    register("attention", attn_params,
             lambda: _weighted_sum(
                 attention(q, q, q, heads,
                           mats[0][0], mats[1][0], mats[2][0], mats[3][0],
                           mats[0][1], mats[1][1], mats[2][1], mats[3][1]),
                 w_attn))

    logits = _tensor(rng, (6, 4))
    targets = (rng.random((6, 4)) < 0.4).astype(np.float64)
    register("bce_with_logits", [logits],
             lambda: bce_with_logits(logits, Tensor(targets)))
    register("bce_pos_weight", [logits],
             lambda: bce_with_logits(logits, Tensor(targets), pos_weight=3.0))
    register("squared_error_on_sigmoid", [logits],
             lambda: squared_error_on_sigmoid(logits, Tensor(targets)))

    dx = _tensor(rng, (5, 7))
    w_dx = rng.normal(size=(5, 7))
    register("dropout", [dx],
             lambda: _weighted_sum(dropout(dx, 0.4, "train", np.random.default_rng(7)),
                                   w_dx))

    results = []
    for name, params, fn in checks:
        results.append((name, grad_check(fn, params, tol=tol)))
    return results


def architecture_checks(preset="desk", seed=0, tol=1e-4, max_coords=3):
    """End-to-end gradient checks: bce loss through each architecture.

    Dropout draws are re-seeded per evaluation so the loss is deterministic;
    batch-norm runs on batch statistics (train mode), whose buffer updates
    do not feed back into the forward value.
    """
    rng = np.random.default_rng(seed)
    results = []
    for kind in ARCHITECTURES:
        config = ArchitectureConfig(kind, preset)
        model = build_model(config, seed=seed)
        X = Tensor(rng.normal(size=(2, config.window, config.n_features)))
        Y = Tensor((rng.random((2, config.n_outputs)) < 0.5).astype(np.float64))

        def fn(model=model, X=X, Y=Y):
            ctx = ForwardContext(mode="train", rng=np.random.default_rng(11))
            return bce_with_logits(model.forward(X, ctx), Y)

        params = model.parameters()
        results.append((kind, grad_check(fn, params, tol=tol, max_coords=max_coords)))
    return results
