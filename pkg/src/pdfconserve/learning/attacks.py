"""Feature-space evasion attacks on binary feature vectors.

Both attacks accept a ``frozen`` set of feature names the attacker may not
touch. Freezing the conserved features models an attacker who must keep the
file's malicious functionality intact.

Attacks are sklearn transformers: ``CoordinateGreedy(estimator=model).transform(X)``
returns the attacked rows. :meth:`run` attacks a single vector and reports
the details.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .linear import HingeLinearClassifier

DEFAULT_LAMBDA = 0.005
DEFAULT_EPSILON = 1000


@dataclass(frozen=True)
class AttackResult:
    x: np.ndarray
    objective: float
    score: float
    evaded: bool
    n_changed: int


def _row_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), index]))


class _Attack(TransformerMixin, BaseEstimator):
    def _frozen_mask(self, model: HingeLinearClassifier) -> np.ndarray:
        mask = np.zeros(model.n_features_in_, dtype=bool)
        for name in self.frozen or ():
            if name not in model.space_:
                raise ValueError(f"frozen feature {name!r} is not in the model's feature space")
            mask[model.space_.index(name)] = True
        return mask

    def fit(self, X=None, y=None):
        if self.estimator is None:
            raise ValueError("set estimator= to the model under attack")
        check_is_fitted(self.estimator, "coef_")
        self._frozen_mask(self.estimator)
        self.n_features_in_ = self.estimator.n_features_in_
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "n_features_in_"):
            self.fit()
        X = check_array(X, dtype=float)
        return np.vstack([self.run(self.estimator, x, i).x for i, x in enumerate(X)]) if len(X) else X.copy()

    def run(self, model: HingeLinearClassifier, x, index: int = 0) -> AttackResult:
        raise NotImplementedError


class CoordinateGreedy(_Attack):
    """Local search minimizing ``Q(x') = f(x') + lam * sum_j (x'_j - x_j)^2``.

    Each step scans every free coordinate and flips the one giving the
    largest strict decrease of Q; the search stops at a local minimum or
    after ``max_sweeps`` steps. The first restart starts at ``x``; later
    restarts start from a random perturbation of ``x`` and use a random
    tie-breaking order. The lowest-Q result wins, so Q never ends above Q(x).
    """

    def __init__(
        self,
        estimator: HingeLinearClassifier | None = None,
        lam: float = DEFAULT_LAMBDA,
        max_sweeps: int = 1000,
        restarts: int = 1,
        frozen: frozenset[str] | tuple[str, ...] = (),
        random_state: int = 0,
    ):
        self.estimator = estimator
        self.lam = lam
        self.max_sweeps = max_sweeps
        self.restarts = restarts
        self.frozen = frozen
        self.random_state = random_state

    def objective(self, model: HingeLinearClassifier, x_adv: np.ndarray, x: np.ndarray) -> float:
        return float(x_adv @ model.coef_ + model.intercept_ + self.lam * np.sum((x_adv - x) ** 2))

    def run(self, model: HingeLinearClassifier, x, index: int = 0) -> AttackResult:
        if self.lam < 0 or self.max_sweeps < 1 or self.restarts < 1:
            raise ValueError("need lam >= 0, max_sweeps >= 1 and restarts >= 1")
        x = np.asarray(x, dtype=float)
        w = model.coef_
        free = ~self._frozen_mask(model)
        free_idx = np.flatnonzero(free)
        rng = _row_rng(self.random_state, index)
        best, best_q = x.copy(), self.objective(model, x, x)
        for restart in range(self.restarts):
            current = x.copy()
            if restart > 0 and len(free_idx):
                kick = free_idx[rng.random(len(free_idx)) < 0.5]
                current[kick] = 1.0 - current[kick]
            order = rng.permutation(free_idx)
            for _ in range(self.max_sweeps):
                flipped = 1.0 - current[order]
                delta = (w[order] * (flipped - current[order])
                         + self.lam * ((flipped - x[order]) ** 2 - (current[order] - x[order]) ** 2))
                if not len(delta):
                    break
                k = int(np.argmin(delta))
                if not delta[k] < 0.0:
                    break
                current[order[k]] = flipped[k]
            q = self.objective(model, current, x)
            if q < best_q:
                best, best_q = current, q
        f = float(best @ w + model.intercept_)
        return AttackResult(best, best_q, f, f < 0.0, int(np.sum(best != x)))


class SaltPepper(_Attack):
    """Random bit-flip noise of increasing size until the sample is misclassified.

    Draw ``t`` (1-based) flips ``min(t, n_free)`` distinct free coordinates of
    the original vector, chosen uniformly at random. The attack stops at the
    first draw that is classified benign, after ``max_draws`` draws, or when
    the next draw would push the total number of flips past ``epsilon``.
    """

    def __init__(
        self,
        estimator: HingeLinearClassifier | None = None,
        epsilon: int = DEFAULT_EPSILON,
        max_draws: int = 100,
        frozen: frozenset[str] | tuple[str, ...] = (),
        random_state: int = 0,
    ):
        self.estimator = estimator
        self.epsilon = epsilon
        self.max_draws = max_draws
        self.frozen = frozen
        self.random_state = random_state

    def run(self, model: HingeLinearClassifier, x, index: int = 0) -> AttackResult:
        x = np.asarray(x, dtype=float)
        free_idx = np.flatnonzero(~self._frozen_mask(model))
        rng = _row_rng(self.random_state, index)
        current = x.copy()
        used = 0

        def f(v: np.ndarray) -> float:
            return float(v @ model.coef_ + model.intercept_)

        for t in range(1, self.max_draws + 1):
            k = min(t, len(free_idx))
            if k == 0 or used + k > self.epsilon:
                break
            chosen = rng.choice(free_idx, size=k, replace=False)
            current = x.copy()
            current[chosen] = 1.0 - current[chosen]
            used += k
            if f(current) < 0.0:
                break
        score = f(current)
        return AttackResult(current, score, score, score < 0.0, int(np.sum(current != x)))


def coordinate_greedy(model: HingeLinearClassifier, x, cfg: CoordinateGreedy, index: int = 0) -> AttackResult:
    return cfg.run(model, x, index)


def salt_pepper(model: HingeLinearClassifier, x, cfg: SaltPepper, index: int = 0) -> AttackResult:
    return cfg.run(model, x, index)


def attack_config_to_json(attack: _Attack) -> dict:
    params = {k: v for k, v in attack.get_params(deep=False).items() if k != "estimator"}
    params["frozen"] = sorted(params.get("frozen") or ())
    return {"kind": type(attack).__name__, **params}


def attack_from_json(raw: dict) -> _Attack:
    raw = dict(raw)
    kind = raw.pop("kind")
    raw["frozen"] = tuple(sorted(raw.get("frozen", ())))
    classes = {"CoordinateGreedy": CoordinateGreedy, "SaltPepper": SaltPepper,
               "coordinate_greedy": CoordinateGreedy, "salt_pepper": SaltPepper}
    if kind not in classes:
        raise ValueError(f"unknown attack kind {kind!r}")
    return classes[kind](**raw)
