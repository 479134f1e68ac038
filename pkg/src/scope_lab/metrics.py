"""Per-class precision reporting for the classification comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ShapeError


@dataclass(slots=True)
class PrecisionReport:
    """Per-class precision plus its mean and spread across classes.

    `std_precision` is the population standard deviation; the spread across
    class precisions is the headline imbalance measure, so both numbers are
    computed over the full fixed set of classes, never a sample of them.
    """

    per_class: np.ndarray
    mean_precision: float
    std_precision: float


def precision_report(y_true, y_pred, num_classes: int) -> PrecisionReport:
    """Compute TP / (TP + FP) per class; a never-predicted class scores 0.

    Counting an absent prediction as zero precision (rather than skipping the
    class) is deliberate: collapsing onto a subset of classes should read as
    a precision failure, not be averaged away.
    """
    if num_classes < 1:
        raise ConfigError(f"num_classes must be positive, got {num_classes}")
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ShapeError(f"label shapes do not match: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ConfigError("cannot report precision on an empty label set")
    if y_pred.min() < 0 or y_pred.max() >= num_classes:
        raise ConfigError("prediction outside [0, num_classes)")
    if y_true.min() < 0 or y_true.max() >= num_classes:
        raise ConfigError("true label outside [0, num_classes)")

    per_class = np.zeros(num_classes)
    for c in range(num_classes):
        predicted = y_pred == c
        n_pred = int(predicted.sum())
        if n_pred > 0:
            per_class[c] = float((y_true[predicted] == c).sum()) / n_pred
    return PrecisionReport(
        per_class=per_class,
        mean_precision=float(per_class.mean()),
        std_precision=float(per_class.std()),
    )
