"""Windowing: Level-01 rows -> labeled 30-day samples, plus Level-02 stats.

A sample anchored at day t sees X rows for days t-30 .. t-1 (zeros on
inactive days) and four labels, Y[w] = 1 iff the user has no transactions
in days [t+7w, t+7(w+1)). Default anchors lie on a global 7-day grid so the
whole horizon stays inside the observed date range.
"""

from dataclasses import dataclass

import numpy as np

from churnforge.errors import ConfigError, DataError

TAU = 30
HORIZON_WEEKS = 4


@dataclass
class WindowSample:
    user_id: int
    anchor_day: int
    X: np.ndarray  # (tau, n_features) float64
    Y: np.ndarray  # (HORIZON_WEEKS,) uint8


def build_windows(rows, tau=TAU, horizon_weeks=HORIZON_WEEKS, stride=7,
                  anchors=None, day_range=None, active_within=None):
    """Returns (samples, n_skipped) sorted by (user_id, anchor_day).

    ``anchors``: explicit anchor days; anchors whose lookback or horizon
    leaves ``day_range`` are skipped and counted. Default: every ``stride``-th
    day from day_range[0] + tau while the horizon fits.
    Users with no active day in an anchor's lookback emit no sample there.
    ``active_within``: if set, a user must also have an active day in the
    last ``active_within`` days of the lookback (an at-risk filter: scoring
    users who went quiet weeks ago is trivial and dilutes evaluation).
    """
    if not rows:
        return [], 0
    if active_within is not None and not 1 <= active_within <= tau:
        raise ConfigError(
            f"active_within must be in [1, tau], got {active_within}"
        )
    horizon_days = 7 * horizon_weeks
    if day_range is None:
        days = [r.day for r in rows]
        day_range = (min(days), max(days))
    lo, hi = day_range

    n_skipped = 0
    if anchors is None:
        anchors = list(range(lo + tau, hi - horizon_days + 2, stride))
    else:
        valid = []
        for t in anchors:
            if t - tau < lo or t + horizon_days - 1 > hi:
                n_skipped += 1
            else:
                valid.append(t)
        anchors = valid
    anchors = np.asarray(sorted(anchors), dtype=np.int64)

    by_user = {}
    for r in rows:
        by_user.setdefault(r.user_id, []).append(r)

    n_features = rows[0].features.size
    samples = []
    for user_id in sorted(by_user):
        urows = by_user[user_id]
        udays = np.array([r.day for r in urows], dtype=np.int64)
        order = np.argsort(udays, kind="stable")
        udays = udays[order]
        ufeat = np.stack([urows[i].features for i in order])
        for t in anchors:
            start = t - tau
            i0, i1 = np.searchsorted(udays, [start, t])
            if i0 == i1:  # no active day in the lookback: ineligible
                continue
            if active_within is not None and udays[i1 - 1] < t - active_within:
                continue
            X = np.zeros((tau, n_features))
            X[udays[i0:i1] - start] = ufeat[i0:i1]
            Y = np.empty(horizon_weeks, dtype=np.uint8)
            for w in range(horizon_weeks):
                a, b = np.searchsorted(udays, [t + 7 * w, t + 7 * (w + 1)])
                Y[w] = 1 if a == b else 0
            samples.append(WindowSample(int(user_id), int(t), X, Y))
    return samples, n_skipped


def aggregate_level02(sample):
    """G_i: interleaved per-feature (mean, population std) over the window."""
    X = sample.X
    if X.ndim != 2:
        raise DataError(f"window X must be 2-D, got shape {X.shape}")
    mu = X.mean(axis=0)
    sigma = np.sqrt(np.mean((X - mu) ** 2, axis=0))
    G = np.empty(2 * X.shape[1])
    G[0::2] = mu
    G[1::2] = sigma
    return G


def level02_matrix(samples):
    """Stacks aggregate_level02 over samples: (n, 2 * n_features)."""
    if not samples:
        raise DataError("no samples to aggregate")
    return np.stack([aggregate_level02(s) for s in samples])


def labels_matrix(samples):
    return np.stack([s.Y for s in samples]).astype(np.float64)
