"""Sweep the L1 regularization strength to steer which features survive."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from sklearn.base import clone

from ..features import FeatureSpace
from .linear import HingeLinearClassifier

DEFAULT_SPARSITY_THRESHOLD = 1e-6


@dataclass(frozen=True)
class MatchCount:
    target: int

    def __post_init__(self) -> None:
        if self.target < 1:
            raise ValueError("target must be positive")

    def satisfied(self, selected: frozenset[str]) -> bool:
        return len(selected) == self.target

    def to_json(self) -> dict[str, Any]:
        return {"match_count": self.target}


@dataclass(frozen=True)
class CoverSet:
    target: frozenset[str] = frozenset()

    def satisfied(self, selected: frozenset[str]) -> bool:
        return self.target <= selected

    def to_json(self) -> dict[str, Any]:
        return {"cover_set": sorted(self.target)}


@dataclass
class SweepResult:
    log: list[tuple[float, frozenset[str]]] = field(default_factory=list)
    chosen_C: float | None = None
    selected: frozenset[str] | None = None

    @property
    def reached(self) -> bool:
        return self.chosen_C is not None

    def to_json(self) -> dict[str, Any]:
        return {
            "log": [{"C": c, "selected": sorted(s), "count": len(s)} for c, s in self.log],
            "chosen_C": self.chosen_C,
            "selected": None if self.selected is None else sorted(self.selected),
            "status": "reached" if self.reached else "TargetUnreachable",
        }


def l1_sweep(
    X,
    y,
    mode: MatchCount | CoverSet,
    C_grid: Iterable[float],
    base: HingeLinearClassifier | None = None,
    feature_space: FeatureSpace | None = None,
    threshold: float = DEFAULT_SPARSITY_THRESHOLD,
) -> SweepResult:
    """Fit an L1 model per C (strongest regularization first) and find the first hit.

    The whole grid is always trained so the log is complete. An unreachable
    target leaves ``chosen_C`` as ``None`` rather than raising.
    """
    grid = [float(c) for c in C_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("C grid must be ascending (strong to weak regularization)")
    template = base if base is not None else HingeLinearClassifier()
    result = SweepResult()
    for C in grid:
        model = clone(template).set_params(penalty="l1", C=C).fit(X, y, feature_space=feature_space)
        selected = model.selected_features(threshold)
        result.log.append((C, selected))
        if result.chosen_C is None and mode.satisfied(selected):
            result.chosen_C, result.selected = C, selected
    return result
