"""Linear SVM trained by (proximal) subgradient descent on the hinge loss."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import DegenerateData, SpaceMismatch
from ..features import FeatureKind, FeatureSpace, FeatureVector


class HingeLinearClassifier(ClassifierMixin, BaseEstimator):
    """Linear classifier minimizing ``mean hinge loss + alpha * R(w)``.

    ``alpha = 1 / (C * n_samples)`` so that ``C`` has the usual SVM meaning
    (larger C, weaker regularization). ``penalty="l2"`` uses
    ``R = ||w||^2 / 2`` with a plain subgradient step; ``penalty="l1"``
    uses ``R = ||w||_1`` with a soft-threshold (proximal) step, which gives
    exact zeros. The bias is never regularized.

    The positive class (``classes_[1]``) is "malicious" and ties go to it:
    a sample is malicious when ``decision_function(x) >= 0``.

    Training is single threaded with a fixed accumulation order, so equal
    inputs and ``random_state`` give bit-identical weights.
    """

    def __init__(
        self,
        penalty: str = "l2",
        C: float = 1.0,
        epochs: int = 300,
        eta0: float = 0.5,
        schedule: str = "invsqrt",
        batch_size: int | None = None,
        random_state: int = 0,
    ):
        self.penalty = penalty
        self.C = C
        self.epochs = epochs
        self.eta0 = eta0
        self.schedule = schedule
        self.batch_size = batch_size
        self.random_state = random_state

    def _step(self, t: int) -> float:
        if self.schedule == "invsqrt":
            return self.eta0 / np.sqrt(1.0 + t)
        if self.schedule == "constant":
            return self.eta0
        if self.schedule == "inverse":
            return self.eta0 / (1.0 + t)
        raise ValueError(f"unknown step schedule {self.schedule!r}")

    def fit(self, X, y, feature_space: FeatureSpace | None = None):
        X, y = check_X_y(X, y, dtype=float)
        if self.penalty not in ("l1", "l2"):
            raise ValueError("penalty must be 'l1' or 'l2'")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        classes = np.unique(y)
        if len(classes) != 2:
            raise DegenerateData(f"need exactly two classes, got {len(classes)}")
        n, d = X.shape
        if feature_space is not None and len(feature_space) != d:
            raise SpaceMismatch(f"feature space has {len(feature_space)} names, X has {d} columns")
        self.classes_ = classes
        self.n_features_in_ = d
        self.space_ = feature_space if feature_space is not None else FeatureSpace.generic(d)
        signs = np.where(y == classes[1], 1.0, -1.0)
        alpha = 1.0 / (self.C * n)

        rng = np.random.default_rng(self.random_state)
        w = np.zeros(d)
        b = 0.0
        t = 0
        history = []
        for _ in range(self.epochs):
            if self.batch_size is None or self.batch_size >= n:
                batches = [np.arange(n)]
            else:
                order = rng.permutation(n)
                batches = [order[i:i + self.batch_size] for i in range(0, n, self.batch_size)]
            for idx in batches:
                eta = self._step(t)
                t += 1
                xb, sb = X[idx], signs[idx]
                active = sb * (xb @ w + b) < 1.0
                grad_w = -(sb[active] @ xb[active]) / len(idx)
                grad_b = -sb[active].sum() / len(idx)
                if self.penalty == "l2":
                    w = w - eta * (grad_w + alpha * w)
                else:
                    w = w - eta * grad_w
                    w = np.sign(w) * np.maximum(np.abs(w) - eta * alpha, 0.0)
                b -= eta * grad_b
            history.append(self._objective(X, signs, w, b, alpha))
        self.coef_ = w
        self.intercept_ = float(b)
        self.loss_history_ = np.asarray(history)
        return self

    def _objective(self, X, signs, w, b, alpha) -> float:
        hinge = np.maximum(0.0, 1.0 - signs * (X @ w + b)).mean()
        reg = 0.5 * float(w @ w) if self.penalty == "l2" else float(np.abs(w).sum())
        return float(hinge + alpha * reg)

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise SpaceMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0.0, self.classes_[1], self.classes_[0])

    def selected_features(self, threshold: float = 1e-6) -> frozenset[str]:
        check_is_fitted(self, "coef_")
        return frozenset(n for n, w in zip(self.space_.names, self.coef_) if abs(w) > threshold)

    # -- persistence -----------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        check_is_fitted(self, "coef_")
        return {
            "space_sha256": self.space_.sha256,
            "weights": [float(v) for v in self.coef_],
            "bias": self.intercept_,
            "reg": {"kind": self.penalty, "C": self.C},
            "classes": [_plain(c) for c in self.classes_],
            "params": {k: v for k, v in self.get_params().items() if k not in ("penalty", "C")},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, raw: dict[str, Any], space: FeatureSpace | None = None) -> "HingeLinearClassifier":
        model = cls(penalty=raw["reg"]["kind"], C=raw["reg"]["C"], **raw.get("params", {}))
        weights = np.asarray(raw["weights"], dtype=float)
        if space is None:
            space = FeatureSpace.generic(len(weights))
        if len(space) != len(weights):
            raise SpaceMismatch("model weights do not match the feature space")
        if space.kind is not FeatureKind.GENERIC and raw.get("space_sha256") not in (None, space.sha256):
            raise SpaceMismatch("model was trained on a different feature space")
        model.coef_ = weights
        model.intercept_ = float(raw["bias"])
        model.classes_ = np.asarray(raw.get("classes", [0, 1]))
        model.n_features_in_ = len(weights)
        model.space_ = space
        model.loss_history_ = np.asarray([])
        return model

    @classmethod
    def load(cls, path: str | Path, space: FeatureSpace | None = None) -> "HingeLinearClassifier":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")), space)


def _plain(value: Any) -> Any:
    return value.item() if hasattr(value, "item") else value


def score(model: HingeLinearClassifier, x: FeatureVector) -> float:
    """``w . x + b`` for a vector over the model's own feature space."""
    check_is_fitted(model, "coef_")
    if x.space != model.space_:
        raise SpaceMismatch("feature vector belongs to a different feature space")
    return float(np.dot(model.coef_, x.as_array()) + model.intercept_)


def is_malicious(model: HingeLinearClassifier, X) -> np.ndarray:
    return model.decision_function(np.atleast_2d(X)) >= 0.0
