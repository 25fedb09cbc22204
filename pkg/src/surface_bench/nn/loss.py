"""Softmax cross-entropy with label smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class SmoothedLossSpec:
    """Targets are (1 - epsilon) * onehot + epsilon / num_classes."""

    epsilon: float = 0.1
    num_classes: int = 6

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must be in [0, 1)")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")

    def target_row(self, label: int) -> np.ndarray:
        row = np.full(self.num_classes, self.epsilon / self.num_classes)
        row[label] += 1.0 - self.epsilon
        return row


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, max-shifted for stability."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def smoothed_cross_entropy(
    logits: np.ndarray, labels: np.ndarray, spec: SmoothedLossSpec
) -> tuple[float, np.ndarray]:
    """Mean batch loss -sum_k t_k log softmax(logits)_k and its logit gradient.

    The gradient is (softmax - t) / batch, exact for the forward definition.
    """
    if logits.ndim != 2 or logits.shape[1] != spec.num_classes:
        raise ShapeError(
            f"expected logits (B, {spec.num_classes}), got {logits.shape}"
        )
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise ShapeError(f"expected labels ({logits.shape[0]},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= spec.num_classes:
        raise ShapeError(
            f"label out of range [0, {spec.num_classes}): "
            f"{labels[(labels < 0) | (labels >= spec.num_classes)][0]}"
        )
    b, k = logits.shape
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    targets = np.full_like(log_probs, spec.epsilon / k)
    targets[np.arange(b), labels] += 1.0 - spec.epsilon
    loss = float(-(targets * log_probs).sum(axis=1).mean())
    grad = (np.exp(log_probs) - targets) / b
    return loss, grad.astype(logits.dtype, copy=False)
