"""Random forest over Gini-split classification trees."""

from dataclasses import dataclass

import numpy as np

from churnforge.errors import ConfigError
from churnforge.classical.tree import Tree, fit_tree


@dataclass
class ForestConfig:
    n_trees: int = 200
    max_depth: int = 8
    min_samples_leaf: int = 1
    bootstrap: bool = True
    feature_subsample: str = "sqrt"  # "sqrt" | "all"

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("a forest needs at least one tree")
        if self.feature_subsample not in ("sqrt", "all"):
            raise ConfigError(
                f"feature_subsample must be 'sqrt' or 'all', "
                f"got {self.feature_subsample!r}"
            )


@dataclass
class ForestHead:
    trees: list

    def predict_proba(self, X):
        """Mean of per-tree leaf class frequencies."""
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)

    def to_dict(self):
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        return cls(trees=[Tree.from_dict(t) for t in d["trees"]])


def fit_random_forest(X, y, config=None, seed=0):
    """Per-tree RNG streams spawn from the seed, so tree order is immaterial."""
    config = config or ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if config.feature_subsample == "sqrt":
        k = max(1, int(round(np.sqrt(X.shape[1]))))
    else:
        k = None
    streams = np.random.SeedSequence(seed).spawn(config.n_trees)
    trees = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        trees.append(
            fit_tree(
                X[rows],
                y[rows],
                criterion="gini",
                max_depth=config.max_depth,
                min_samples_leaf=config.min_samples_leaf,
                rng=rng,
                n_feature_sample=k,
            )
        )
    return ForestHead(trees=trees)
