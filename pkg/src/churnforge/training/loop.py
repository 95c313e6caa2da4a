"""Mini-batch training with synchronous gradient averaging.

The worker pool is simulated in-process: each global step shards the batch,
runs per-shard forward/backward passes on separate tapes, then applies a
single averaged update — the full protocol of data-parallel synchronous
SGD, minus the wires. With one worker this degenerates to plain mini-batch
Adam.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from churnforge.deep.layers import ForwardContext
from churnforge.errors import ConfigError, DataError, ShapeError, TrainingDiverged
from churnforge.tensor import GradTape, Tensor, backward
from churnforge.tensor.adam import AdamState, adam_step
from churnforge.tensor.ops import bce_with_logits, squared_error_on_sigmoid
from churnforge.training.metrics import roc_auc

LOSSES = ("bce", "squared_error")

HISTORY_HEADER = "epoch,train_loss,val_loss,auc_w1,auc_w2,auc_w3,auc_w4"


@dataclass
class TrainConfig:
    """Knobs for one training run.

    ``report_every`` is the validation cadence in epochs; the final epoch is
    always evaluated. ``freeze_norm_stats`` makes batch-norm layers normalize
    with their running buffers during training, which removes the only
    batch-coupled computation and makes K-worker and single-worker runs
    arithmetically equivalent.
    """

    loss: str = "bce"
    epochs: int = 50
    batch_size: int = 256
    lr: float = 1e-4
    seed: int = 0
    n_workers: int = 1
    report_every: int = 1
    pos_weight: float = 1.0
    freeze_norm_stats: bool = False

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if not 1 <= self.epochs <= 100:
            raise ConfigError(f"epochs must be in 1..100, got {self.epochs}")
        if self.lr < 0:
            # lr = 0 is allowed as a degenerate no-op config so that
            # "zero learning rate leaves parameters unchanged" is testable.
            raise ConfigError(f"lr must be non-negative, got {self.lr}")
        if self.n_workers < 1:
            raise ConfigError(f"n_workers must be >= 1, got {self.n_workers}")
        if self.batch_size < self.n_workers:
            raise ConfigError(
                f"batch_size {self.batch_size} < n_workers {self.n_workers}"
            )
        if self.report_every < 1:
            raise ConfigError(f"report_every must be >= 1, got {self.report_every}")
        if self.pos_weight <= 0:
            raise ConfigError(f"pos_weight must be positive, got {self.pos_weight}")

    def to_dict(self):
        return {
            "loss": self.loss,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
            "n_workers": self.n_workers,
            "report_every": self.report_every,
            "pos_weight": self.pos_weight,
            "freeze_norm_stats": self.freeze_norm_stats,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int  # 1-based
    train_loss: float
    val_loss: float  # nan when validation was skipped this epoch
    val_auc: tuple  # 4 floats, nan for single-class or skipped weeks
    seconds: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based; 0 until a validated epoch completes
    best_val_auc: float = float("nan")
    best_state: tuple = None  # (params, buffers) snapshot at best_epoch

    def save(self, path):
        lines = [HISTORY_HEADER]
        for r in self.records:
            cells = [str(r.epoch), repr(float(r.train_loss))]
            if np.isnan(r.val_loss) and all(np.isnan(a) for a in r.val_auc):
                cells += [""] * 5
            else:
                cells.append(repr(float(r.val_loss)))
                cells += [repr(float(a)) for a in r.val_auc]
            lines.append(",".join(cells))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def snapshot_state(model):
    """Copy all parameter and buffer arrays of a deep model."""
    params = [p.data.copy() for p in model.parameters()]
    buffers = [getattr(owner, name).copy() for name, owner in model.buffers()]
    return params, buffers


def restore_state(model, state):
    params, buffers = state
    targets = model.parameters()
    if len(params) != len(targets):
        raise ShapeError(f"{len(params)} arrays for {len(targets)} parameters")
    for p, arr in zip(targets, params):
        if p.data.shape != arr.shape:
            raise ShapeError(f"parameter shape {p.data.shape} vs {arr.shape}")
        p.data[...] = arr
    slots = model.buffers()
    if len(buffers) != len(slots):
        raise ShapeError(f"{len(buffers)} arrays for {len(slots)} buffers")
    for (name, owner), arr in zip(slots, buffers):
        if getattr(owner, name).shape != arr.shape:
            raise ShapeError(f"buffer {name} shape mismatch")
        setattr(owner, name, arr.copy())


def sync_gradient_average(grad_sets):
    """Elementwise arithmetic mean of K shape-compatible gradient sets."""
    if not grad_sets:
        raise ShapeError("no gradient sets to average")
    first = grad_sets[0]
    for gs in grad_sets[1:]:
        if len(gs) != len(first):
            raise ShapeError(f"gradient set sizes differ: {len(gs)} vs {len(first)}")
        for g, g0 in zip(gs, first):
            if g.shape != g0.shape:
                raise ShapeError(f"gradient shapes differ: {g.shape} vs {g0.shape}")
    k = float(len(grad_sets))
    return [sum(gs[i] for gs in grad_sets) / k for i in range(len(first))]


def _stack_samples(samples, model):
    cfg = model.config
    X = np.stack([s.X for s in samples]).astype(np.float64)
    Y = np.stack([s.Y for s in samples]).astype(np.float64)
    if X.shape[1:] != (cfg.window, cfg.n_features):
        raise ShapeError(
            f"samples are {X.shape[1:]}, model expects "
            f"({cfg.window}, {cfg.n_features})"
        )
    if Y.shape[1] != cfg.n_outputs:
        raise ShapeError(f"labels have {Y.shape[1]} weeks, model emits {cfg.n_outputs}")
    return X, Y


def _loss_tensor(logits, targets, config):
    if config.loss == "bce":
        return bce_with_logits(logits, Tensor(targets), pos_weight=config.pos_weight)
    return squared_error_on_sigmoid(logits, Tensor(targets))


def _param_norms(model):
    return [float(np.sqrt((p.data**2).sum())) for p in model.parameters()]


def predict_logits(model, X, batch_size=512):
    """Infer-mode forward over ``X`` in batches; returns an (n, 4) array."""
    ctx = ForwardContext(mode="infer")
    out = []
    for lo in range(0, X.shape[0], batch_size):
        out.append(model.forward(Tensor(X[lo : lo + batch_size]), ctx).data)
    return np.concatenate(out, axis=0)


def _validate_epoch(model, Xval, Yval, config):
    logits = predict_logits(model, Xval)
    loss = float(_loss_tensor(Tensor(logits), Yval, config).data)
    aucs = []
    for w in range(Yval.shape[1]):
        col = Yval[:, w]
        if col.min() == col.max():
            aucs.append(float("nan"))
        else:
            aucs.append(roc_auc(col, logits[:, w]))
    return loss, tuple(aucs)


def _train_step(model, params, Xb, Yb, config, ctx):
    """One synchronous global step over a batch; returns (loss, grads)."""
    shards = np.array_split(np.arange(Xb.shape[0]), config.n_workers)
    shards = [s for s in shards if s.size]
    grad_sets = []
    losses = []
    for rows in shards:
        with GradTape() as tape:
            logits = model.forward(Tensor(Xb[rows]), ctx)
            loss = _loss_tensor(logits, Yb[rows], config)
        backward(loss, tape)
        grad_sets.append(
            [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
        )
        losses.append(float(loss.data))
        for p in params:
            p.grad = None
    return float(np.mean(losses)), sync_gradient_average(grad_sets)


def train(model, split, config):
    """Train ``model`` on ``split.train``; returns a TrainHistory.

    The model is updated in place. Validation metrics are computed on
    ``split.validation`` every ``report_every`` epochs (and on the last);
    the parameter snapshot with the best mean validation AUC is kept on
    ``history.best_state``. Batches of a single sample are skipped because
    train-mode batch statistics are undefined there.
    """
    if not split.train:
        raise DataError("training part is empty")
    Xtr, Ytr = _stack_samples(split.train, model)
    has_val = bool(split.validation)
    if has_val:
        Xval, Yval = _stack_samples(split.validation, model)

    shuffle_rng = np.random.default_rng((config.seed, 101))
    ctx = ForwardContext(
        mode="train",
        rng=np.random.default_rng((config.seed, 202)),
        bn_frozen=config.freeze_norm_stats,
    )
    params = model.parameters()
    adam = AdamState(params, lr=config.lr)
    history = TrainHistory()
    n = Xtr.shape[0]

    for epoch in range(1, config.epochs + 1):
        tick = time.perf_counter()
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        seen = 0
        for bi, lo in enumerate(range(0, n, config.batch_size)):
            rows = perm[lo : lo + config.batch_size]
            if rows.size < 2:
                continue
            loss, grads = _train_step(model, params, Xtr[rows], Ytr[rows], config, ctx)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} batch {bi}; "
                    f"parameter norms: {_param_norms(model)}"
                )
            adam_step(adam, grads)
            loss_sum += loss * rows.size
            seen += rows.size
        train_loss = loss_sum / seen if seen else float("nan")

        report = epoch % config.report_every == 0 or epoch == config.epochs
        val_loss, val_auc = float("nan"), (float("nan"),) * 4
        if report and has_val:
            val_loss, val_auc = _validate_epoch(model, Xval, Yval, config)
            mean_auc = float(np.nanmean(val_auc)) if not all(
                np.isnan(a) for a in val_auc
            ) else float("nan")
            if not np.isnan(mean_auc) and (
                np.isnan(history.best_val_auc) or mean_auc > history.best_val_auc
            ):
                history.best_epoch = epoch
                history.best_val_auc = mean_auc
                history.best_state = snapshot_state(model)
        history.records.append(
            EpochRecord(epoch, train_loss, val_loss, val_auc, time.perf_counter() - tick)
        )

    if history.best_state is None:
        history.best_epoch = config.epochs
        history.best_state = snapshot_state(model)
    return history
