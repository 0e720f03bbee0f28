"""Training loop with balanced minibatches, weight decay and early stopping."""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import balanced_minibatch
from .model import cross_entropy, forward_proba, grad_params, one_hot, predict_class
from .nslkdd import CLASS_NAMES, N_CLASSES

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 128
    max_epochs: int = 100
    weight_decay: float = 1e-4
    early_stop_patience: int = 10
    validation_fraction: float = 0.1
    seed: int = 42
    optimizer: str = "sgd"

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "max_epochs", "early_stop_patience"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not 0 < self.validation_fraction <= 0.5:
            raise ValueError("validation_fraction must lie in (0, 0.5]")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    best_epoch: int = 0
    initial_loss: float = float("nan")

    @property
    def epochs_run(self):
        return len(self.train_loss)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_accuracy"])
            for i, (loss, acc) in enumerate(zip(self.train_loss, self.val_accuracy), 1):
                w.writerow([i, repr(loss), repr(acc)])


def stratified_split(y, fraction, rng):
    """Return (train_idx, val_idx) with ``round(fraction * n_c)`` validation rows per class."""
    train_idx, val_idx = [], []
    for c in range(N_CLASSES):
        members = rng.permutation(np.flatnonzero(y == c))
        k = int(round(fraction * members.size))
        if members.size > 1:
            k = min(max(k, 1), members.size - 1)
        val_idx.append(members[:k])
        train_idx.append(members[k:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(val_idx))


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _accuracy(model, X, y):
    return float(np.mean(predict_class(model, X) == y)) if len(y) else 0.0


def train(model, dataset, config=None):
    """Train a copy of ``model``; returns the best-validation-accuracy parameters and the history."""
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = stratified_split(dataset.y, config.validation_fraction, rng)
    Xtr, ytr = dataset.X[train_idx], dataset.y[train_idx]
    Xval, yval = dataset.X[val_idx], dataset.y[val_idx]

    model = model.copy()
    params = model.params()
    adam = _Adam(params, config.learning_rate) if config.optimizer == "adam" else None
    history = TrainHistory()
    history.initial_loss = float(cross_entropy(one_hot(ytr), forward_proba(model, Xtr)).mean())
    best_acc, best_params, stale = -1.0, None, 0
    batches = math.ceil(len(ytr) / config.batch_size)

    for epoch in range(1, config.max_epochs + 1):
        losses = []
        for b in range(batches):
            bx, by = balanced_minibatch((Xtr, ytr), config.batch_size, rng)
            loss, grads = grad_params(model, bx, by, config.weight_decay)
            if not (math.isfinite(loss) and all(np.all(np.isfinite(g)) for g in grads)):
                raise TrainingError(f"non-finite loss or gradient at epoch {epoch}, batch {b}")
            if adam is not None:
                adam.step(params, grads)
            else:
                for p, g in zip(params, grads):
                    p -= config.learning_rate * g
            losses.append(loss)
        history.train_loss.append(float(np.mean(losses)))
        acc = _accuracy(model, Xval, yval)
        history.val_accuracy.append(acc)
        log.info("epoch %d: loss %.4f val_acc %.4f", epoch, history.train_loss[-1], acc)
        if acc > best_acc:
            best_acc, best_params, stale = acc, [p.copy() for p in params], 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                break

    for p, best in zip(params, best_params):
        p[...] = best
    return model, history


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    @property
    def n_samples(self):
        return int(self.confusion.sum())

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "accuracy": self.accuracy,
            "classes": list(CLASS_NAMES),
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
        }


def _safe_ratio(num, den):
    return np.divide(num, den, out=np.zeros(len(num)), where=den > 0)


def evaluate(model, dataset):
    pred = predict_class(model, dataset.X) if len(dataset) else np.zeros(0, dtype=np.intp)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (dataset.y, pred), 1)
    diag = np.diag(confusion).astype(float)
    total = confusion.sum()
    return EvalReport(
        accuracy=float(diag.sum() / total) if total else 0.0,
        confusion=confusion,
        precision=_safe_ratio(diag, confusion.sum(axis=0).astype(float)),
        recall=_safe_ratio(diag, confusion.sum(axis=1).astype(float)),
    )


def collect_misclassified(model, dataset, true_class, predicted_class):
    """All ``(x0, row_index)`` with label ``true_class`` that the model predicts as ``predicted_class``."""
    if not len(dataset):
        return []
    pred = predict_class(model, dataset.X)
    rows = np.flatnonzero((dataset.y == true_class) & (pred == predicted_class))
    return [(dataset.X[i].copy(), int(i)) for i in rows]
