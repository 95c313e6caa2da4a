"""CART core shared by the random forest and the boosted ensemble.

Greedy binary splits; "variance" criterion maximizes sum-of-squares
reduction (regression, used by GBT on residuals), "gini" maximizes Gini
decrease (classification, used by RF). Candidate thresholds sit at
midpoints of adjacent sorted unique values, thinned to at most 256
evenly-spaced quantile candidates. Ties break to the lowest feature index,
then the lowest threshold.
"""

from dataclasses import dataclass

import numpy as np

from churnforge.errors import ConfigError, DataError
from churnforge.kernels import split_gains

MAX_CANDIDATES = 256
_MIN_GAIN = 1e-12


@dataclass
class Tree:
    """Flat node arrays; index 0 is the root, feature -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return self.feature.size

    def apply(self, X):
        """Leaf node index for every row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            rows = np.flatnonzero(feat >= 0)
            if rows.size == 0:
                return node
            cur = node[rows]
            go_left = X[rows, feat[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])

    def predict(self, X):
        return self.value[self.apply(X)]

    def depth(self):
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
        )


def _best_split(X, y, idx, features, criterion, min_samples_leaf):
    """Best (gain, feature, threshold) over the given rows, or None."""
    best = None
    n = idx.size
    for f in features:  # ascending order makes the tie-break implicit
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        boundaries = np.flatnonzero(np.diff(xs) > 0) + 1  # left sizes
        if boundaries.size == 0:
            continue
        ok = (boundaries >= min_samples_leaf) & (boundaries <= n - min_samples_leaf)
        boundaries = boundaries[ok]
        if boundaries.size == 0:
            continue
        if boundaries.size > MAX_CANDIDATES:
            pick = np.linspace(0, boundaries.size - 1, MAX_CANDIDATES)
            boundaries = boundaries[np.unique(pick.round().astype(np.int64))]
        gains = split_gains(y[idx][order], boundaries, criterion)
        k = int(np.argmax(gains))  # first max: lowest threshold wins ties
        if gains[k] > _MIN_GAIN and (best is None or gains[k] > best[0]):
            thr = 0.5 * (xs[boundaries[k] - 1] + xs[boundaries[k]])
            best = (float(gains[k]), int(f), float(thr))
    return best


def fit_tree(X, y, criterion="variance", max_depth=8, min_samples_leaf=1,
             rng=None, n_feature_sample=None):
    """Builds a Tree. ``n_feature_sample`` draws that many candidate features
    per split from ``rng`` (random-forest mode)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError(f"bad training shapes {X.shape} / {y.shape}")
    if X.shape[0] == 0:
        raise DataError("cannot fit a tree on zero samples")
    if max_depth < 0 or min_samples_leaf < 1:
        raise ConfigError("max_depth must be >= 0 and min_samples_leaf >= 1")
    if n_feature_sample is not None and rng is None:
        raise ConfigError("feature subsampling needs an rng")

    n_features = X.shape[1]
    cols = {k: [] for k in ("feature", "threshold", "left", "right", "value")}

    def add_node(value):
        cols["feature"].append(-1)
        cols["threshold"].append(0.0)
        cols["left"].append(-1)
        cols["right"].append(-1)
        cols["value"].append(value)
        return len(cols["feature"]) - 1

    def build(idx, depth):
        node = add_node(float(y[idx].mean()))
        if depth >= max_depth or idx.size < 2 * min_samples_leaf or np.ptp(y[idx]) == 0:
            return node
        if n_feature_sample is None:
            features = range(n_features)
        else:
            k = min(n_feature_sample, n_features)
            features = np.sort(rng.choice(n_features, size=k, replace=False))
        best = _best_split(X, y, idx, features, criterion, min_samples_leaf)
        if best is None:
            return node
        _, f, thr = best
        mask = X[idx, f] <= thr
        l_idx, r_idx = idx[mask], idx[~mask]
        if l_idx.size == 0 or r_idx.size == 0:  # degenerate midpoint rounding
            return node
        cols["feature"][node] = f
        cols["threshold"][node] = thr
        cols["left"][node] = build(l_idx, depth + 1)
        cols["right"][node] = build(r_idx, depth + 1)
        return node

    build(np.arange(X.shape[0]), 0)
    return Tree(
        feature=np.asarray(cols["feature"], dtype=np.int64),
        threshold=np.asarray(cols["threshold"], dtype=np.float64),
        left=np.asarray(cols["left"], dtype=np.int64),
        right=np.asarray(cols["right"], dtype=np.int64),
        value=np.asarray(cols["value"], dtype=np.float64),
    )
