"""Iterative adversarial retraining."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from sklearn.base import clone

from .attacks import _Attack
from .linear import HingeLinearClassifier
from .metrics import evasion_robustness

# A variant generator takes (current model, seed rows) and returns attacked rows.
Generator = Callable[[HingeLinearClassifier, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RetrainConfig:
    max_iterations: int = 5
    seeds_per_iteration: int = 50
    stop_when_no_new: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 0 or self.seeds_per_iteration < 1:
            raise ValueError("max_iterations must be >= 0 and seeds_per_iteration >= 1")

    def to_json(self) -> dict[str, Any]:
        return {
            "max_iterations": self.max_iterations,
            "seeds_per_iteration": self.seeds_per_iteration,
            "stop_when_no_new": self.stop_when_no_new,
        }


@dataclass
class RetrainResult:
    model: HingeLinearClassifier
    log: list[dict[str, Any]] = field(default_factory=list)
    X: np.ndarray | None = None
    y: np.ndarray | None = None


def _generator(attack: _Attack | Generator) -> Generator:
    if isinstance(attack, _Attack):
        def run(model: HingeLinearClassifier, seeds: np.ndarray) -> np.ndarray:
            return clone(attack).set_params(estimator=model).transform(seeds)
        return run
    return attack


def retrain_iterative(
    model0: HingeLinearClassifier,
    attack: _Attack | Generator,
    X_train,
    y_train,
    seeds,
    cfg: RetrainConfig = RetrainConfig(),
) -> RetrainResult:
    """Attack, append the variants labeled malicious, refit; repeat.

    Seeds are taken round-robin, ``cfg.seeds_per_iteration`` per iteration.
    Every variant is labeled malicious whether or not it evaded. A variant
    equal to a malicious row already in the training data (an unchanged seed,
    or a variant from an earlier iteration) is dropped; variants repeated
    within one iteration are all kept, so a common evasion weighs in as often
    as the attack finds it. With ``stop_when_no_new`` an iteration that adds
    nothing ends the loop without refitting. ``max_iterations=0`` returns ``model0`` itself.
    """
    generate = _generator(attack)
    X = np.asarray(X_train, dtype=float).copy()
    y = np.asarray(y_train).copy()
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    malicious = model0.classes_[1]
    model = model0
    result = RetrainResult(model0, [], X, y)
    seen = {row.tobytes() for row in X[y == malicious]}
    cursor = 0
    for it in range(cfg.max_iterations):
        take = [(cursor + k) % len(seeds) for k in range(min(cfg.seeds_per_iteration, len(seeds)))]
        cursor = (cursor + len(take)) % len(seeds)
        batch = seeds[take]
        variants = np.atleast_2d(generate(model, batch))
        evaded = float(np.mean(model.decision_function(variants) < 0.0))
        fresh = [row for row in variants if row.tobytes() not in seen]
        seen.update(row.tobytes() for row in fresh)
        entry = {
            "iteration": it + 1,
            "attacked": len(variants),
            "evaded_before_refit": evaded,
            "added": len(fresh),
        }
        if not fresh and cfg.stop_when_no_new:
            entry["stopped"] = "no new variants"
            result.log.append(entry)
            break
        if fresh:
            X = np.vstack([X, np.asarray(fresh)])
            y = np.concatenate([y, np.full(len(fresh), malicious, dtype=y.dtype)])
        model = clone(model0).fit(X, y, feature_space=model0.space_)
        entry["robustness_after_refit"] = evasion_robustness(model, variants)
        entry["training_rows"] = len(X)
        result.log.append(entry)
    result.model, result.X, result.y = model, X, y
    return result
