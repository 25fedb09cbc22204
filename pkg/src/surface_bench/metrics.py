"""Evaluation artifacts: confusion matrices, precision/recall, sequence
stability, and latency summaries.

Confusion matrix orientation is fixed as rows = ground truth, columns =
prediction, in surface-class code order.
"""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EvalError
from .imaging import PatchStore
from .models import Model
from .taxonomy import SurfaceClass
from .training import predict

NUM_CLASSES = len(SurfaceClass)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) int64, rows = truth, cols = prediction

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_csv(self, path: str | Path) -> None:
        names = [cls.name for cls in SurfaceClass][: self.num_classes]
        lines = ["truth\\*predicted," + ",".join(names)]
        for i, name in enumerate(names):
            lines.append(name + "," + ",".join(str(v) for v in self.counts[i]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def confusion_matrix(
    predictions, labels, num_classes: int = NUM_CLASSES
) -> ConfusionMatrix:
    """Count matrix with entry (i, j) = samples of truth i predicted as j."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise EvalError(
            f"predictions {predictions.shape} and labels {labels.shape} must be "
            "equal-length vectors"
        )
    for name, arr in (("prediction", predictions), ("label", labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise EvalError(f"{name} code out of range [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float | None  # None when the class was never predicted
    recall: float | None  # None when the class has no true samples


def precision_recall(
    cm: ConfusionMatrix,
) -> tuple[list[ClassMetrics], float]:
    """Per-class precision/recall plus overall accuracy.

    0/0 cases surface as None rather than 0 so a collapsed predictor is
    visible in the report.
    """
    counts = cm.counts
    col_sums = counts.sum(axis=0)
    row_sums = counts.sum(axis=1)
    per_class = []
    for k in range(cm.num_classes):
        tp = int(counts[k, k])
        precision = tp / col_sums[k] if col_sums[k] > 0 else None
        recall = tp / row_sums[k] if row_sums[k] > 0 else None
        per_class.append(ClassMetrics(precision, recall))
    return per_class, cm.accuracy


@dataclass(frozen=True)
class SequenceReport:
    """Per-frame classification stability over one recorded sequence."""

    sequence_id: str
    truth: int
    predictions: tuple[int, ...]
    confidences: tuple[float, ...]
    switch_count: int
    error_runs: dict[int, int]  # run length -> number of runs

    @property
    def frames(self) -> int:
        return len(self.predictions)

    @property
    def error_frames(self) -> int:
        return sum(length * count for length, count in self.error_runs.items())


def _error_run_histogram(errors: np.ndarray) -> dict[int, int]:
    runs: dict[int, int] = {}
    length = 0
    for wrong in errors:
        if wrong:
            length += 1
        elif length:
            runs[length] = runs.get(length, 0) + 1
            length = 0
    if length:
        runs[length] = runs.get(length, 0) + 1
    return runs


def sequence_report_from_predictions(
    sequence_id: str, truth: int, predictions, confidences=None
) -> SequenceReport:
    """Stability statistics over an already-classified frame sequence."""
    predictions = np.asarray(predictions, dtype=np.int64)
    if predictions.size == 0:
        raise EvalError(f"sequence {sequence_id!r} has no frames")
    if confidences is None:
        confidences = np.ones(predictions.size)
    switch_count = int((predictions[1:] != predictions[:-1]).sum())
    return SequenceReport(
        sequence_id=sequence_id,
        truth=int(truth),
        predictions=tuple(int(p) for p in predictions),
        confidences=tuple(float(c) for c in confidences),
        switch_count=switch_count,
        error_runs=_error_run_histogram(predictions != truth),
    )


def sequence_report(
    model: Model, store: PatchStore, batch_size: int = 48
) -> SequenceReport:
    """Classify one sequence frame by frame; no temporal coupling.

    All frames in the store must share a sequence id and ground truth.
    """
    if len(store) == 0:
        raise EvalError("empty sequence")
    if len(set(store.sequence_ids)) != 1:
        raise EvalError(f"expected one sequence, got {sorted(set(store.sequence_ids))}")
    truths = set(store.labels.tolist())
    if len(truths) != 1:
        raise EvalError(f"sequence frames disagree on ground truth: {sorted(truths)}")
    preds, confidence = predict(model, store, batch_size)
    return sequence_report_from_predictions(
        store.sequence_ids[0], store.labels[0], preds, confidence
    )


@dataclass(frozen=True)
class LatencyReport:
    mean_ms: float
    median_ms: float
    p95_ms: float
    frames: int
    hardware: str
    predictions: tuple[int, ...]


def latency_report(
    model: Model, store: PatchStore, warmup: int = 5, min_frames: int = 30
) -> LatencyReport:
    """Wall-clock single-frame inference statistics, warm-up excluded."""
    if len(store) < warmup + min_frames:
        raise EvalError(
            f"need at least {warmup + min_frames} patches, got {len(store)}"
        )
    times = []
    preds = []
    for i in range(len(store)):
        x = store.tensor_batch([i])
        start = time.perf_counter()
        logits = model.forward(x, train=False)
        elapsed = time.perf_counter() - start
        preds.append(int(logits.argmax(axis=1)[0]))
        if i >= warmup:
            times.append(elapsed * 1000.0)
    times_arr = np.asarray(times)
    hardware = f"{platform.machine()} {platform.system()}, {os.cpu_count()} logical cores"
    return LatencyReport(
        mean_ms=float(times_arr.mean()),
        median_ms=float(np.median(times_arr)),
        p95_ms=float(np.percentile(times_arr, 95)),
        frames=len(times),
        hardware=hardware,
        predictions=tuple(preds),
    )


@dataclass
class EvalReport:
    """Everything the test-set analysis produces, serializable to JSON."""

    confusion: ConfusionMatrix
    per_class: list[ClassMetrics]
    accuracy: float
    sequences: list[SequenceReport] = field(default_factory=list)
    latency: LatencyReport | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.counts.tolist(),
            "per_class": {
                cls.name: {
                    "precision": self.per_class[cls.value].precision,
                    "recall": self.per_class[cls.value].recall,
                }
                for cls in SurfaceClass
                if cls.value < len(self.per_class)
            },
            "sequences": [
                {
                    "sequence_id": s.sequence_id,
                    "truth": s.truth,
                    "predictions": list(s.predictions),
                    "confidences": list(s.confidences),
                    "switch_count": s.switch_count,
                    "error_runs": {str(k): v for k, v in sorted(s.error_runs.items())},
                }
                for s in self.sequences
            ],
            "latency": None
            if self.latency is None
            else {
                "mean_ms": self.latency.mean_ms,
                "median_ms": self.latency.median_ms,
                "p95_ms": self.latency.p95_ms,
                "frames": self.latency.frames,
                "hardware": self.latency.hardware,
            },
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8"
        )

    def text_table(self) -> str:
        names = [cls.name for cls in SurfaceClass][: self.confusion.num_classes]
        width = max(len(n) for n in names) + 2
        lines = ["confusion matrix (rows = truth, cols = predicted):"]
        lines.append(" " * width + "".join(f"{n[:10]:>12}" for n in names))
        for i, name in enumerate(names):
            row = "".join(f"{v:>12}" for v in self.confusion.counts[i])
            lines.append(f"{name:<{width}}" + row)
        lines.append("")
        lines.append(f"{'class':<{width}}{'precision':>12}{'recall':>12}")
        for i, name in enumerate(names):
            m = self.per_class[i]
            p = "undefined" if m.precision is None else f"{m.precision:.4f}"
            r = "undefined" if m.recall is None else f"{m.recall:.4f}"
            lines.append(f"{name:<{width}}{p:>12}{r:>12}")
        lines.append("")
        lines.append(f"overall accuracy: {self.accuracy:.4f}")
        return "\n".join(lines)


def build_eval_report(
    model: Model, store: PatchStore, batch_size: int = 48
) -> EvalReport:
    """Confusion matrix and per-class metrics for one split."""
    preds, _ = predict(model, store, batch_size)
    cm = confusion_matrix(preds, store.labels, model.spec.num_classes)
    per_class, accuracy = precision_recall(cm)
    return EvalReport(confusion=cm, per_class=per_class, accuracy=accuracy)
