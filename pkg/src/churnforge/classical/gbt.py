"""Gradient-boosted trees with logistic loss.

Stagewise: start from the base-rate log-odds, fit a variance-split
regression tree to the negative gradient (y - p), replace each leaf value
with a Newton step sum(residual) / sum(p(1-p)), and add it scaled by the
shrinkage. ``pos_weight`` > 1 up-weights positives in the init, gradients
and hessians (off by default).
"""

from dataclasses import dataclass

import numpy as np

from churnforge.errors import ConfigError, DataError
from churnforge.classical.logreg import _sigmoid
from churnforge.classical.tree import Tree, fit_tree

_PROB_CLIP = 1e-7


@dataclass
class GBTConfig:
    n_trees: int = 200
    max_depth: int = 4
    shrinkage: float = 0.1
    subsample: float = 1.0
    min_samples_leaf: int = 1
    pos_weight: float = 1.0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ConfigError("n_trees must be >= 0")
        if self.shrinkage <= 0:
            raise ConfigError(f"shrinkage must be positive, got {self.shrinkage}")
        if not 0.0 < self.subsample <= 1.0:
            raise ConfigError(f"subsample must be in (0, 1], got {self.subsample}")
        if self.pos_weight <= 0:
            raise ConfigError("pos_weight must be positive")


@dataclass
class GBTHead:
    init: float
    shrinkage: float
    trees: list

    def decision(self, X):
        f = np.full(X.shape[0], self.init)
        for tree in self.trees:
            f += self.shrinkage * tree.predict(X)
        return f

    def predict_proba(self, X):
        return _sigmoid(self.decision(X))

    def to_dict(self):
        return {
            "init": self.init,
            "shrinkage": self.shrinkage,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            init=float(d["init"]),
            shrinkage=float(d["shrinkage"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
        )


def _newton_leaves(tree, X, residual, hessian):
    """Replaces leaf means with sum(residual)/sum(hessian) per leaf."""
    leaf = tree.apply(X)
    value = tree.value.copy()
    num = np.bincount(leaf, weights=residual, minlength=value.size)
    den = np.bincount(leaf, weights=hessian, minlength=value.size)
    touched = np.unique(leaf)
    value[touched] = num[touched] / np.maximum(den[touched], 1e-12)
    return value


def fit_gbt(X, y, config=None, seed=0):
    config = config or GBTConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError(f"bad training shapes {X.shape} / {y.shape}")
    n = X.shape[0]
    w = np.where(y == 1.0, config.pos_weight, 1.0)
    pos = float((w * y).sum())
    neg = float((w * (1 - y)).sum())
    base = np.clip(pos / (pos + neg), _PROB_CLIP, 1 - _PROB_CLIP)
    head = GBTHead(init=float(np.log(base / (1 - base))), shrinkage=config.shrinkage,
                   trees=[])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    f = np.full(n, head.init)
    for _ in range(config.n_trees):
        p = _sigmoid(f)
        residual = w * (y - p)
        hessian = w * p * (1 - p)
        if config.subsample < 1.0:
            rows = rng.choice(n, size=max(1, int(round(config.subsample * n))),
                              replace=False)
            rows.sort()
        else:
            rows = slice(None)
        tree = fit_tree(
            X[rows],
            residual[rows],
            criterion="variance",
            max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
        )
        tree.value = _newton_leaves(tree, X[rows], residual[rows], hessian[rows])
        head.trees.append(tree)
        f += config.shrinkage * tree.predict(X)
    return head
