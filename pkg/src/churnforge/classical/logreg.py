"""L2-regularized logistic regression by full-batch gradient descent."""

from dataclasses import dataclass, field

import numpy as np

from churnforge.errors import ConfigError, DataError, DegenerateLabelsError


@dataclass
class LogRegConfig:
    lr: float = 0.3
    l2: float = 1e-4  # applied to weights, not the intercept
    max_iter: int = 5000
    tol: float = 1e-6  # stop when the gradient norm falls below this

    def __post_init__(self):
        if self.lr <= 0 or self.max_iter < 1 or self.tol <= 0 or self.l2 < 0:
            raise ConfigError(f"bad logistic-regression config: {self}")


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LogRegHead:
    weights: np.ndarray
    intercept: float
    n_iter: int = 0
    converged: bool = False

    def decision(self, X):
        return X @ self.weights + self.intercept

    def predict_proba(self, X):
        return _sigmoid(self.decision(X))

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64),
            intercept=float(d["intercept"]),
            n_iter=int(d.get("n_iter", 0)),
            converged=bool(d.get("converged", False)),
        )


def fit_logreg(X, y, config=None):
    """Minimizes mean BCE + (l2/2)||w||^2 until grad norm <= tol or max_iter."""
    config = config or LogRegConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError(f"bad training shapes {X.shape} / {y.shape}")
    if y.min() == y.max():
        raise DegenerateLabelsError(
            f"logistic regression needs both classes, labels are all {y[0]:g}"
        )
    n = X.shape[0]
    w = np.zeros(X.shape[1])
    b = 0.0
    head = LogRegHead(weights=w, intercept=b)
    for it in range(1, config.max_iter + 1):
        err = _sigmoid(X @ w + b) - y
        grad_w = X.T @ err / n + config.l2 * w
        grad_b = err.mean()
        w -= config.lr * grad_w
        b -= config.lr * grad_b
        head.n_iter = it
        if np.sqrt(grad_w @ grad_w + grad_b * grad_b) <= config.tol:
            head.converged = True
            break
    head.weights = w
    head.intercept = float(b)
    return head
