"""Small synthetic datasets for the learning experiments.

``evasion_toy`` draws binary SL2013-style path vectors: malicious rows carry
one of the two JavaScript routes whose paths make up the fixture conserved
set, plus decoy structure correlated with malice; benign rows lean on
ordinary document structure. ``signal_toy`` has exactly three informative
features among noise, for sparsity sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import FeatureKind, FeatureSpace
from ..fixtures import EXPECTED_UNIFORM_SL2013

OPENACTION_ROUTE = ("/OpenAction", "/OpenAction/JS")
NAMES_ROUTE = ("/Names", "/Names/JavaScript", "/Names/JavaScript/Names", "/Names/JavaScript/Names/JS")

# (path, P[present | malicious], P[present | benign])
_BACKGROUND = (
    ("/AA", 0.6, 0.05),
    ("/AcroForm", 0.7, 0.15),
    ("/Metadata", 0.1, 0.6),
    ("/MarkInfo", 0.05, 0.5),
    ("/Outlines", 0.15, 0.6),
    ("/PageMode", 0.15, 0.5),
    ("/Pages", 1.0, 1.0),
    ("/StructTreeRoot", 0.05, 0.45),
    ("/Type", 1.0, 1.0),
)
# Route-attached decoys present whenever their route is.
_ROUTE_DECOYS = {"/OpenAction/S": OPENACTION_ROUTE, "/Names/JavaScript/Names/S": NAMES_ROUTE}

CONSERVED = EXPECTED_UNIFORM_SL2013


@dataclass(frozen=True)
class ToyData:
    space: FeatureSpace
    X: np.ndarray
    y: np.ndarray

    @property
    def malicious(self) -> np.ndarray:
        return self.X[self.y == 1]


def evasion_space() -> FeatureSpace:
    names = set(OPENACTION_ROUTE) | set(NAMES_ROUTE) | set(_ROUTE_DECOYS) | {p for p, _, _ in _BACKGROUND}
    return FeatureSpace(FeatureKind.SL2013, tuple(sorted(names)))


def evasion_toy(n_malicious: int = 200, n_benign: int = 200, seed: int = 0) -> ToyData:
    """Binary path vectors; label 1 is malicious.

    A few benign rows use a harmless /OpenAction (GoTo) or a /Names tree of
    named destinations, so the outer route paths alone do not give malice away.
    """
    rng = np.random.default_rng(seed)
    space = evasion_space()
    col = {name: space.index(name) for name in space.names}
    rows = []
    for label, n in ((1, n_malicious), (0, n_benign)):
        for _ in range(n):
            row = np.zeros(len(space))
            for path, p_mal, p_ben in _BACKGROUND:
                row[col[path]] = rng.random() < (p_mal if label else p_ben)
            if label:
                route = rng.integers(3)  # 0: OpenAction, 1: Names, 2: both
                routes = [OPENACTION_ROUTE, NAMES_ROUTE] if route == 2 else [(OPENACTION_ROUTE, NAMES_ROUTE)[route]]
                for r in routes:
                    for path in r:
                        row[col[path]] = 1
                    for decoy, owner in _ROUTE_DECOYS.items():
                        if owner is r:
                            row[col[decoy]] = 1
            else:
                if rng.random() < 0.2:
                    row[col["/OpenAction"]] = row[col["/OpenAction/S"]] = 1
                if rng.random() < 0.2:
                    row[col["/Names"]] = 1
            rows.append(row)
    X = np.asarray(rows)
    y = np.repeat([1, 0], [n_malicious, n_benign])
    return ToyData(space, X, y)


def signal_toy(n: int = 400, n_noise: int = 7, seed: int = 0, flip: float = 0.05) -> ToyData:
    """Three binary signal features decide the label; the rest are coin flips.

    The label is malicious when at least two of ``s0, s1, s2`` are set, then
    flipped with probability ``flip``.
    """
    rng = np.random.default_rng(seed)
    d = 3 + n_noise
    X = (rng.random((n, d)) < 0.5).astype(float)
    y = (X[:, :3].sum(axis=1) >= 2).astype(int)
    y = np.where(rng.random(n) < flip, 1 - y, y)
    names = tuple(f"s{i}" for i in range(3)) + tuple(f"z{i:02d}" for i in range(n_noise))
    return ToyData(FeatureSpace(FeatureKind.GENERIC, names), X, y)


SIGNAL_FEATURES = frozenset({"s0", "s1", "s2"})


def single_feature_toy(seed: int = 0) -> ToyData:
    """Malice is told apart by two features, but the weaker one alone evades.

    Malicious rows have ``k`` and ``m``; benign rows have ``m`` or nothing.
    A model trained on this leans on ``k``; flipping ``k`` off evades. Adding
    the attacked rows (``m`` only, labeled malicious) moves weight onto the
    bias and ``m``.
    """
    rng = np.random.default_rng(seed)
    names = ("k", "m", "n")
    mal = np.column_stack([np.ones(30), np.ones(30), rng.random(30) < 0.5])
    ben = np.column_stack([np.zeros(30), rng.random(30) < 0.2, rng.random(30) < 0.5])
    X = np.vstack([mal, ben]).astype(float)
    y = np.repeat([1, 0], 30)
    return ToyData(FeatureSpace(FeatureKind.GENERIC, names), X, y)
