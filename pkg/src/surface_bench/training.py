"""Seeded training loop with per-batch augmentation and early stopping.

Batch composition is a pure function of (seed, epoch); augmentation draws
are keyed by (master_seed, epoch, sample index).  Two runs with the same
config, bundle, and seed therefore produce bitwise-identical histories and
checkpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentKey, AugmentSpec, apply, draw_params
from .errors import TrainingError
from .imaging import PatchStore, normalize
from .models import Model
from .nn.loss import SmoothedLossSpec, smoothed_cross_entropy, softmax
from .nn.optim import SGD, SgdConfig


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-5
    momentum: float = 0.0
    batch_size: int = 48
    smoothing_epsilon: float = 0.1
    max_epochs: int = 20
    patience: int = 5
    min_delta: float = 0.001
    seed: int = 0
    augment: AugmentSpec | None = field(default_factory=AugmentSpec)

    def __post_init__(self) -> None:
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_acc: float
    train_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats]
    stopped_epoch: int
    best_epoch: int

    CSV_HEADER = "epoch,train_acc,train_loss,val_acc"

    def to_csv(self, path: str | Path) -> None:
        lines = [self.CSV_HEADER]
        for e in self.epochs:
            lines.append(f"{e.epoch},{e.train_acc!r},{e.train_loss!r},{e.val_acc!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainHistory":
        lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
        epochs = []
        for line in lines[1:]:
            ep, ta, tl, va = line.split(",")
            epochs.append(EpochStats(int(ep), float(ta), float(tl), float(va)))
        best = max(range(len(epochs)), key=lambda i: (epochs[i].val_acc, -i))
        return cls(epochs, stopped_epoch=epochs[-1].epoch, best_epoch=epochs[best].epoch)


class EarlyStopping:
    """Keras-style patience rule on a maximized metric.

    An epoch counts as an improvement when its value reaches the previous
    anchor plus ``min_delta``; training stops after ``patience``
    consecutive non-improving epochs.  Independently, ``best_epoch`` tracks
    the strict maximum (earliest epoch on ties) for checkpoint selection.
    """

    def __init__(self, patience: int, min_delta: float):
        self.patience = patience
        self.min_delta = min_delta
        self.best_epoch = 0
        self.best_value = -math.inf
        self._anchor = -math.inf
        self._stale = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record one epoch's metric; returns True when training should stop."""
        if value > self.best_value:
            self.best_value = value
            self.best_epoch = epoch
        if value >= self._anchor + self.min_delta:
            self._anchor = value
            self._stale = 0
        else:
            self._stale += 1
        return self._stale >= self.patience


def epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Seeded index batches for one epoch; the incomplete tail is dropped."""
    order = np.random.default_rng((int(seed), int(epoch))).permutation(n)
    return [
        order[i * batch_size : (i + 1) * batch_size] for i in range(n // batch_size)
    ]


def _augmented_batch(
    store: PatchStore, indices: np.ndarray, spec: AugmentSpec | None, epoch: int
) -> np.ndarray:
    tensors = []
    for i in indices:
        patch = store.images[i]
        if spec is not None:
            patch = apply(patch, draw_params(spec, AugmentKey(epoch, int(i))))
        tensors.append(normalize(patch, store.mean, store.std))
    return np.stack(tensors)


def train(
    model: Model,
    train_store: PatchStore,
    val_store: PatchStore,
    config: TrainConfig,
) -> tuple[Model, TrainHistory]:
    """Train in place; returns the model restored to its best epoch.

    Augmentation touches training batches only; validation runs in infer
    mode on unaugmented data after every epoch.
    """
    n = len(train_store)
    if n == 0 or len(val_store) == 0:
        raise TrainingError("train and validation splits must be non-empty")
    if config.batch_size > n:
        raise TrainingError(
            f"batch_size {config.batch_size} exceeds train split size {n}"
        )
    loss_spec = SmoothedLossSpec(config.smoothing_epsilon, model.spec.num_classes)
    opt = SGD(
        model.parameters(), SgdConfig(config.learning_rate, config.momentum)
    )
    stopper = EarlyStopping(config.patience, config.min_delta)
    best_snapshot = model.snapshot()
    history: list[EpochStats] = []
    for epoch in range(1, config.max_epochs + 1):
        correct = 0
        seen = 0
        loss_sum = 0.0
        batches = epoch_batches(n, config.batch_size, config.seed, epoch)
        for indices in batches:
            x = _augmented_batch(train_store, indices, config.augment, epoch)
            y = train_store.labels[indices]
            logits = model.forward(x, train=True)
            loss, dlogits = smoothed_cross_entropy(logits, y, loss_spec)
            model.backward(dlogits)
            opt.step(model.gradients())
            correct += int((logits.argmax(axis=1) == y).sum())
            seen += len(y)
            loss_sum += loss
        val_acc = evaluate_split(model, val_store, config.batch_size)
        history.append(
            EpochStats(epoch, correct / seen, loss_sum / len(batches), val_acc)
        )
        stop = stopper.update(epoch, val_acc)
        if stopper.best_epoch == epoch:
            best_snapshot = model.snapshot()
        if stop:
            break
    model.restore(best_snapshot)
    return model, TrainHistory(
        history, stopped_epoch=history[-1].epoch, best_epoch=stopper.best_epoch
    )


def _eval_batches(n: int, batch_size: int):
    for start in range(0, n, batch_size):
        yield np.arange(start, min(start + batch_size, n))


def predict(
    model: Model, store: PatchStore, batch_size: int = 48
) -> tuple[np.ndarray, np.ndarray]:
    """Infer-mode argmax predictions and their softmax confidences."""
    if len(store) == 0:
        raise TrainingError("cannot predict on an empty split")
    preds = np.empty(len(store), dtype=np.int64)
    confidence = np.empty(len(store), dtype=np.float64)
    for indices in _eval_batches(len(store), batch_size):
        logits = model.forward(store.tensor_batch(indices), train=False)
        probs = softmax(logits)
        preds[indices] = probs.argmax(axis=1)
        confidence[indices] = probs.max(axis=1)
    return preds, confidence


def evaluate_split(model: Model, store: PatchStore, batch_size: int = 48) -> float:
    """Plain accuracy over a split: no augmentation, running-stat batch norm."""
    preds, _ = predict(model, store, batch_size)
    return float((preds == store.labels).mean())
