"""Confusion matrices and the accuracy / weighted-F1 / macro-F1 triple.

All metrics are derived from integer confusion counts so that repeated runs
are exactly reproducible. Zero-support convention: a class with
precision + recall = 0 gets F1 = 0; macro-F1 averages over every declared
class (zero-support included), weighted-F1 weights by gold support and so
ignores classes that never occur in the gold labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np


class MetricsError(Exception):
    pass


def confusion(
    gold: Sequence[Hashable], pred: Sequence[Hashable], labels: Sequence[Hashable]
) -> np.ndarray:
    """Square count matrix: entry [g][p] = how often gold g was predicted p."""
    if len(gold) != len(pred):
        raise MetricsError(f"gold/pred length mismatch: {len(gold)} vs {len(pred)}")
    index = {label: i for i, label in enumerate(labels)}
    if len(index) != len(labels):
        raise MetricsError("duplicate labels")
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, p in zip(gold, pred):
        try:
            cm[index[g], index[p]] += 1
        except KeyError as exc:
            raise MetricsError(f"unknown label {exc.args[0]!r}") from None
    return cm


@dataclass(frozen=True)
class MetricScores:
    accuracy: float
    weighted_f1: float
    macro_f1: float


def classification_metrics(cm: np.ndarray) -> MetricScores:
    """Accuracy, support-weighted F1 and macro-averaged F1 from a confusion matrix."""
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] == 0:
        raise MetricsError(f"confusion matrix must be square and non-empty, got {cm.shape}")
    total = int(cm.sum())
    if total == 0:
        raise MetricsError("confusion matrix has zero total")
    diag = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)  # gold counts per class
    predicted = cm.sum(axis=0).astype(np.float64)

    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, diag / predicted, 0.0)
        recall = np.where(support > 0, diag / support, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / pr, 0.0)

    accuracy = float(diag.sum() / total)
    macro_f1 = float(f1.mean())
    weighted_f1 = float((f1 * support).sum() / support.sum())
    return MetricScores(accuracy=accuracy, weighted_f1=weighted_f1, macro_f1=macro_f1)


def accuracy_score(gold: Sequence[Hashable], pred: Sequence[Hashable]) -> float:
    if len(gold) != len(pred):
        raise MetricsError("gold/pred length mismatch")
    if not gold:
        raise MetricsError("empty label sequences")
    return float(sum(1 for g, p in zip(gold, pred) if g == p) / len(gold))
