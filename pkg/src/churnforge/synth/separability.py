"""Bayes-proxy oracle for generator configs.

The oracle scores a window with the exact conditional probability of the
label: P(no activity in horizon week w | user latents at the anchor), from
a forward DP over the hidden chain expanded by lapse age (the activity rate
depends on how long a lapse has run). Separability is reported on at-risk
windows (anchor state not CHURNED): already-churned users are trivially
separable and would measure detection, not prediction.
"""

from dataclasses import dataclass, replace

import numpy as np

from churnforge.errors import ConfigError, DataError
from churnforge.data.windows import HORIZON_WEEKS, TAU
from churnforge.training.metrics import roc_auc
from churnforge.synth.generator import (
    STATE_CHURNED,
    STATE_ENGAGED,
    STATE_LAPSING,
    _simulate_population,
)


def _anchor_grid(n_days, tau=TAU, horizon_days=7 * HORIZON_WEEKS, stride=7):
    return list(range(tau, n_days - horizon_days + 1, stride))


def _window_table(config, n_users):
    """Eligible windows: (user, anchor, rate, state, age, labels[4])."""
    rates, states, ages, active = _simulate_population(config, n_users)
    anchors = _anchor_grid(config.n_days)
    if not anchors:
        raise ConfigError(
            f"date range of {config.n_days} days leaves no room for a window"
        )
    rows = []
    for t in anchors:
        eligible = active[:, t - TAU:t].any(axis=1)
        users = np.flatnonzero(eligible)
        labels = np.stack(
            [~active[users, t + 7 * w:t + 7 * (w + 1)].any(axis=1)
             for w in range(HORIZON_WEEKS)],
            axis=1,
        )
        rows.append((users, np.full(users.size, t), rates[users],
                     states[users, t], ages[users, t], labels))
    return tuple(np.concatenate(parts) for parts in zip(*rows))


def _transition_step(beta, T):
    engaged = beta[:, 0]
    lapse = beta[:, 1:-1]
    out = np.zeros_like(beta)
    out[:, 0] = engaged * T[0][0]
    out[:, 1] = engaged * T[0][1]
    out[:, 2:-1] += lapse[:, :-1] * T[1][1]
    out[:, -2] += lapse[:, -1] * T[1][1]  # age cap is sticky
    out[:, -1] = beta[:, -1] + engaged * T[0][2] + lapse.sum(axis=1) * T[1][2]
    return out


def oracle_scores(config, rates, states, ages):
    """P(no activity in week w | anchor latents) for each window, (n, 4)."""
    n = rates.size
    age_cap = config.n_days + 7 * HORIZON_WEEKS
    n_cols = age_cap + 3  # ENGAGED, LAPSING age 0..cap, CHURNED
    T = config.transition_matrix

    inactive = np.ones((n, n_cols))
    inactive[:, 0] = 1.0 - rates
    lapse_ages = np.arange(age_cap + 1)
    inactive[:, 1:-1] = 1.0 - rates[:, None] * config.lapse_rate_factor(lapse_ages)

    start_col = np.zeros(n, dtype=np.int64)
    start_col[states == STATE_LAPSING] = 1 + np.minimum(
        ages[states == STATE_LAPSING], age_cap
    )
    start_col[states == STATE_CHURNED] = n_cols - 1
    pi = np.zeros((n, n_cols))
    pi[np.arange(n), start_col] = 1.0

    scores = np.empty((n, HORIZON_WEEKS))
    for w in range(HORIZON_WEEKS):
        beta = pi.copy()
        for _ in range(7):
            beta *= inactive
            beta = _transition_step(beta, T)
        scores[:, w] = beta.sum(axis=1)
        for _ in range(7):
            pi = _transition_step(pi, T)
    return scores


@dataclass
class SeparabilityReport:
    aucs: list  # per week; None where a class is missing
    positive_rates: list  # per week, over all eligible windows
    at_risk_positive_rates: list
    n_windows: int
    n_at_risk: int


def verify_separability(config, n_users=None):
    users, anchors, rates, states, ages, labels = _window_table(config, n_users)
    at_risk = states != STATE_CHURNED
    if not at_risk.any():
        raise DataError("no at-risk windows; config churns everyone immediately")
    scores = oracle_scores(
        config, rates[at_risk], states[at_risk], ages[at_risk]
    )
    risk_labels = labels[at_risk]
    aucs = []
    for w in range(HORIZON_WEEKS):
        y = risk_labels[:, w]
        if y.all() or not y.any():
            aucs.append(None)
        else:
            aucs.append(roc_auc(y.astype(float), scores[:, w]))
    return SeparabilityReport(
        aucs=aucs,
        positive_rates=labels.mean(axis=0).tolist(),
        at_risk_positive_rates=risk_labels.mean(axis=0).tolist(),
        n_windows=int(labels.shape[0]),
        n_at_risk=int(at_risk.sum()),
    )


def measure_positive_rates(config, n_users=None):
    """Week positive rates over all eligible windows (pipeline view)."""
    *_, labels = _window_table(config, n_users)
    return labels.mean(axis=0)


def skewed_config(skew, pilot_users=None, max_iter=14, **overrides):
    """Config calibrated so week-1 negatives outnumber positives ``skew``-fold.

    Bisects churn_hazard; the map hazard -> positive rate is monotone. The
    pilot defaults to the config's own population (same seed and user count),
    so the realized dataset hits the target up to hazard resolution. The
    transition matrix is re-derived at each probe, so callers must not pin
    one in ``overrides``.
    """
    from churnforge.synth.generator import BehaviorConfig

    if skew <= 0:
        raise ConfigError(f"skew must be positive, got {skew}")
    if "transition_matrix" in overrides or "churn_hazard" in overrides:
        raise ConfigError("skew calibration owns churn_hazard and the matrix")
    target = 1.0 / (1.0 + skew)

    def probe(hazard):
        return BehaviorConfig(churn_hazard=hazard, **overrides)

    lo, hi = 1e-4, 0.4
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        rate = measure_positive_rates(probe(mid), n_users=pilot_users)[0]
        if rate < target:
            lo = mid
        else:
            hi = mid
    return probe(0.5 * (lo + hi))
