"""Bias-corrected Adam."""

import numpy as np

from churnforge.errors import ShapeError


class AdamState:
    """Per-parameter first/second moment buffers plus the shared step count."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def adam_step(state, grads=None):
    """One update over all parameters in ``state``.

    grads defaults to each parameter's ``.grad``; parameters whose gradient
    is None are skipped. Updates are in place.
    """
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    if grads is None:
        grads = [p.grad for p in state.params]
    if len(grads) != len(state.params):
        raise ShapeError(f"{len(grads)} gradients for {len(state.params)} parameters")
    for i, (p, g) in enumerate(zip(state.params, grads)):
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} vs parameter {p.data.shape}")
        m = state.m[i]
        v = state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
