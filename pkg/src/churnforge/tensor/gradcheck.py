"""Finite-difference verification of analytic gradients.

Compares tape gradients against central differences on float64. Central
differences are only valid where the probe interval [x-h, x+h] is smooth;
losses through relu/maxpool networks are piecewise linear in any parameter,
so a probe that straddles a kink reports a spurious mismatch. Each
coordinate is therefore tried over a shrinking step schedule and accepted
as soon as one step size agrees -- the correct analytic gradient is the
h -> 0 limit, and an incorrect one cannot match the converging sequence.
For large parameter tensors a deterministic random subset of coordinates
is probed; small tensors are checked exhaustively.
"""

from dataclasses import dataclass, field

import numpy as np

from churnforge.tensor.core import GradTape, backward


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    per_param: dict = field(default_factory=dict)

    def __str__(self):
        state = "PASS" if self.passed else "FAIL"
        return f"gradcheck {state}: max relative error {self.max_rel_error:.3e}"


def grad_check(fn, params, h=(1e-5, 1e-6, 1e-7), tol=1e-4, atol=1e-7,
               max_coords=None, seed=0, names=None):
    """Check d fn / d params against central finite differences.

    fn: zero-argument callable returning a scalar Tensor; it must be
    deterministic (re-seed any dropout per call) and read the current
    ``.data`` of each parameter. ``h`` may be a single step or a schedule.
    Returns a GradCheckReport; failures are reported, not raised.
    """
    h_schedule = (h,) if np.isscalar(h) else tuple(h)
    for p in params:
        p.grad = None  # stale gradients would pollute the accumulated replay
    with GradTape() as tape:
        loss = fn()
    backward(loss, tape)
    analytic = [None if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.grad = None
    rng = np.random.default_rng(seed)
    report = GradCheckReport(passed=True, max_rel_error=0.0)
    for idx, p in enumerate(params):
        name = names[idx] if names else f"param{idx}"
        ana = analytic[idx]
        if ana is None:
            ana = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = np.arange(n)
        worst = 0.0
        for c in coords:
            a = float(ana.reshape(-1)[c])
            orig = flat[c]
            best = np.inf
            for step in h_schedule:
                flat[c] = orig + step
                fp = float(fn().data)
                flat[c] = orig - step
                fm = float(fn().data)
                flat[c] = orig
                numeric = (fp - fm) / (2.0 * step)
                diff = abs(a - numeric)
                if diff <= atol:
                    # below the resolution of central differences;
                    # structurally zero gradients land here
                    best = 0.0
                    break
                rel = diff / max(abs(a), abs(numeric), 1e-8)
                best = min(best, rel)
                if best <= tol:
                    break
            worst = max(worst, best)
        report.per_param[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
        if worst > tol:
            report.passed = False
    for p, g in zip(params, analytic):
        p.grad = g
    return report
