"""Detection metrics: evasion robustness and ROC/AUC."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from sklearn.metrics import auc as trapezoid_area, roc_curve

from ..errors import DegenerateData


@dataclass(frozen=True)
class EvalReport:
    roc: list[tuple[float, float]]
    auc: float
    evasion_robustness: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "auc": self.auc,
            "roc": [[fpr, tpr] for fpr, tpr in self.roc],
            "evasion_robustness": self.evasion_robustness,
        }
        out.update(self.extra)
        return out


def evasion_robustness(model, attacked) -> float:
    """Fraction of attacked samples the model still flags as malicious."""
    attacked = np.atleast_2d(np.asarray(attacked, dtype=float))
    if attacked.shape[0] == 0 or attacked.size == 0:
        raise ValueError("no attacked samples")
    return float(np.mean(model.decision_function(attacked) >= 0.0))


def roc_from_scores(scores, labels) -> tuple[list[tuple[float, float]], float]:
    """ROC points over every distinct score and the trapezoidal area under them.

    ``labels`` are truthy for malicious. Because every distinct score is a
    threshold, the area equals the probability that a random malicious sample
    outscores a random benign one, with ties counting one half.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if labels.all() or not labels.any():
        raise DegenerateData("ROC needs both malicious and benign samples")
    fpr, tpr, _ = roc_curve(labels, scores, drop_intermediate=False)
    auc = float(trapezoid_area(fpr, tpr))
    return [(float(a), float(b)) for a, b in zip(fpr, tpr)], auc


def roc_auc(model, X, y, positive=None) -> EvalReport:
    """ROC/AUC of ``model`` on labeled data; ``positive`` defaults to ``model.classes_[1]``."""
    positive = model.classes_[1] if positive is None else positive
    scores = model.decision_function(X)
    roc, auc = roc_from_scores(scores, np.asarray(y) == positive)
    return EvalReport(roc, auc)
