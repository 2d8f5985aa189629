"""Confusion matrices and balanced accuracy."""

from __future__ import annotations

import numpy as np

from .dataset import N_CLASSES

__all__ = ["confusion", "balanced_accuracy", "bac"]


def confusion(true_labels, predicted_labels, n_classes: int = N_CLASSES) -> np.ndarray:
    """``counts[t, p]``: samples of true class ``t`` predicted as ``p``."""
    t = np.asarray(true_labels, dtype=int).ravel()
    p = np.asarray(predicted_labels, dtype=int).ravel()
    if t.size != p.size:
        raise ValueError(f"{t.size} true labels but {p.size} predictions")
    if t.size == 0:
        raise ValueError("no samples to evaluate")
    if min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= n_classes:
        raise ValueError("label outside the class range")
    return np.bincount(t * n_classes + p, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def balanced_accuracy(cm) -> float:
    """Mean per-class recall. Every true class must occur at least once."""
    cm = np.asarray(cm)
    support = cm.sum(axis=1)
    if np.any(support == 0):
        missing = np.flatnonzero(support == 0).tolist()
        raise ValueError(f"class index(es) {missing} absent from the evaluated samples")
    return float(np.mean(np.diag(cm) / support))


def bac(true_labels, predicted_labels, n_classes: int = N_CLASSES) -> float:
    return balanced_accuracy(confusion(true_labels, predicted_labels, n_classes))
