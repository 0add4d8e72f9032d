from __future__ import annotations

import json

import numpy as np
import pytest
from sklearn.base import clone

from pdfconserve.errors import DegenerateData, SpaceMismatch
from pdfconserve.features import FeatureKind, FeatureSpace, FeatureVector
from pdfconserve.learning import (
    CoordinateGreedy,
    CoverSet,
    HingeLinearClassifier,
    MatchCount,
    RetrainConfig,
    SaltPepper,
    coordinate_greedy,
    evasion_robustness,
    l1_sweep,
    retrain_iterative,
    roc_auc,
    roc_from_scores,
    salt_pepper,
    score,
)
from pdfconserve.learning.attacks import attack_config_to_json, attack_from_json
from pdfconserve.learning.toy import SIGNAL_FEATURES, evasion_toy, signal_toy, single_feature_toy

from .oracles import concordance_auc, exhaustive_min_q


def fixed(weights, bias=0.0, names=None):
    space = FeatureSpace(FeatureKind.GENERIC, tuple(names)) if names else None
    raw = {"weights": list(weights), "bias": bias, "reg": {"kind": "l2", "C": 1.0}, "classes": [0, 1]}
    return HingeLinearClassifier.from_json(raw, space)


W = (2.0, -1.0, 0.5)


# -- training and scoring ----------------------------------------------------


def test_separable_toy_reaches_full_accuracy():
    X = np.array([[1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    y = np.array([1, 1, 0, 0])
    model = HingeLinearClassifier(C=10.0).fit(X, y)
    assert model.score(X, y) == 1.0


def test_all_zero_features_fall_back_to_majority_bias():
    # Bias-only hinge optimum with 3 positives and 1 negative is b = 1.
    X = np.zeros((4, 2))
    y = np.array([1, 1, 1, 0])
    model = HingeLinearClassifier(epochs=2000).fit(X, y)
    assert np.all(model.coef_ == 0.0)
    assert model.intercept_ == pytest.approx(1.0, abs=0.05)
    assert list(model.predict(X)) == [1, 1, 1, 1]


def test_training_is_bit_identical_across_runs():
    data = evasion_toy(seed=3)
    a = HingeLinearClassifier(batch_size=32, random_state=5).fit(data.X, data.y)
    b = HingeLinearClassifier(batch_size=32, random_state=5).fit(data.X, data.y)
    assert a.coef_.tobytes() == b.coef_.tobytes() and a.intercept_ == b.intercept_


def test_training_loss_trends_down():
    data = evasion_toy(seed=1)
    hist = HingeLinearClassifier(epochs=200).fit(data.X, data.y).loss_history_
    window = 20
    averaged = [hist[i:i + window].mean() for i in range(0, len(hist), window)]
    assert all(b <= a + 1e-3 for a, b in zip(averaged, averaged[1:]))


def test_single_class_is_degenerate():
    with pytest.raises(DegenerateData):
        HingeLinearClassifier().fit(np.eye(3), [1, 1, 1])


def test_score_examples():
    model = fixed(W)
    space = model.space_
    assert score(model, FeatureVector(space, (1, 0, 1))) == 2.5
    assert score(fixed(W, bias=-0.25), FeatureVector(space, (0, 0, 0))) == -0.25
    other = FeatureSpace(FeatureKind.GENERIC, ("a", "b", "c"))
    with pytest.raises(SpaceMismatch):
        score(model, FeatureVector(other, (1, 0, 1)))
    with pytest.raises(SpaceMismatch):
        model.decision_function(np.ones((1, 4)))


def test_tie_is_malicious():
    assert fixed((1.0,), bias=-1.0).predict(np.ones((1, 1)))[0] == 1


def test_model_json_roundtrip(tmp_path):
    data = evasion_toy(seed=2)
    model = HingeLinearClassifier(penalty="l1", C=0.5).fit(data.X, data.y, feature_space=data.space)
    path = tmp_path / "model.json"
    model.save(path)
    raw = json.loads(path.read_text())
    assert {"space_sha256", "weights", "bias", "reg"} <= set(raw)
    back = HingeLinearClassifier.load(path, data.space)
    assert np.array_equal(back.decision_function(data.X), model.decision_function(data.X))
    wrong = FeatureSpace(FeatureKind.SL2013, tuple(f"/x{i:02d}" for i in range(len(data.space))))
    with pytest.raises(SpaceMismatch):
        HingeLinearClassifier.load(path, wrong)


# -- attacks -------------------------------------------------------------------


def test_cg_matches_exhaustive_on_example():
    model = fixed(W)
    res = coordinate_greedy(model, [1, 0, 1], CoordinateGreedy(lam=0.005))
    assert list(res.x) == [0, 1, 0]
    assert res.score == -1.0 and res.evaded
    assert res.objective == pytest.approx(exhaustive_min_q(W, 0.0, [1, 0, 1], 0.005))


def test_cg_respects_frozen_feature():
    model = fixed(W, names=("a", "b", "c"))
    res = coordinate_greedy(model, [1, 0, 1], CoordinateGreedy(lam=0.005, frozen=("a",)))
    assert res.x[0] == 1
    assert list(res.x) == [1, 1, 0]
    assert res.objective == pytest.approx(exhaustive_min_q(W, 0.0, [1, 0, 1], 0.005, frozen=(0,)))


def test_cg_huge_lambda_keeps_x():
    res = coordinate_greedy(fixed(W), [1, 0, 1], CoordinateGreedy(lam=1e6))
    assert list(res.x) == [1, 0, 1] and res.n_changed == 0


def test_cg_rejects_unknown_frozen_name():
    with pytest.raises(ValueError):
        coordinate_greedy(fixed(W), [1, 0, 1], CoordinateGreedy(frozen=("nope",)))


def test_salt_pepper_single_feature_dependence():
    model = fixed((1.0, 0.0, 0.0, 0.0), bias=-0.5)
    x = [1, 0, 0, 0]
    for seed in range(10):
        res = salt_pepper(model, x, SaltPepper(epsilon=1, random_state=seed))
        assert res.evaded == (res.x[0] == 0)
        again = salt_pepper(model, x, SaltPepper(epsilon=1, random_state=seed))
        assert np.array_equal(res.x, again.x)
    # A larger budget always reaches k eventually: draw 4 flips every free coordinate.
    assert salt_pepper(model, x, SaltPepper(epsilon=1000)).evaded


def test_salt_pepper_all_frozen_or_zero_budget():
    model = fixed(W, names=("a", "b", "c"))
    res = salt_pepper(model, [1, 0, 1], SaltPepper(frozen=("a", "b", "c")))
    assert list(res.x) == [1, 0, 1] and not res.evaded
    res = salt_pepper(model, [1, 0, 1], SaltPepper(epsilon=0))
    assert list(res.x) == [1, 0, 1] and not res.evaded


@pytest.mark.parametrize("make", [
    lambda frozen: CoordinateGreedy(restarts=3, frozen=frozen),
    lambda frozen: SaltPepper(frozen=frozen),
])
def test_frozen_mask_invariance(make):
    data = evasion_toy(seed=4)
    model = HingeLinearClassifier().fit(data.X, data.y, feature_space=data.space)
    frozen = tuple(data.space.names[::3])
    cols = [data.space.index(n) for n in frozen]
    X = data.malicious
    adv = make(frozen).set_params(estimator=model).fit().transform(X)
    assert np.array_equal(adv[:, cols], X[:, cols])


def test_attack_config_json_roundtrip():
    for attack in (CoordinateGreedy(lam=0.1, restarts=4, frozen=("b", "a")), SaltPepper(epsilon=9)):
        raw = attack_config_to_json(attack)
        assert attack_config_to_json(attack_from_json(raw)) == raw
    with pytest.raises(ValueError):
        attack_from_json({"kind": "Gradient"})


# -- retraining ----------------------------------------------------------------


def test_retrain_fixed_point_when_attack_cannot_evade():
    data = evasion_toy(seed=5)
    model0 = HingeLinearClassifier().fit(data.X, data.y, feature_space=data.space)
    seeds = data.malicious[:10]
    result = retrain_iterative(model0, lambda model, batch: batch.copy(), data.X, data.y, seeds,
                               RetrainConfig(max_iterations=3, seeds_per_iteration=10))
    assert len(result.log) == 1 and result.log[0]["added"] == 0 and "stopped" in result.log[0]
    assert result.model is model0
    assert len(result.X) == len(data.X)


def test_retrain_zero_iterations_returns_model0():
    data = evasion_toy(seed=5)
    model0 = HingeLinearClassifier().fit(data.X, data.y, feature_space=data.space)
    result = retrain_iterative(model0, CoordinateGreedy(), data.X, data.y, data.X[:5],
                               RetrainConfig(max_iterations=0))
    assert result.model is model0 and result.log == []


def _brute_force_attack(lam):
    """Exhaustive minimizer of Q; used as the reference attacker on 3 features."""
    import itertools

    def run(model, batch):
        out = []
        for x in batch:
            cands = [np.array(c, dtype=float) for c in itertools.product((0, 1), repeat=len(x))]
            q = [c @ model.coef_ + model.intercept_ + lam * np.sum((c - x) ** 2) for c in cands]
            out.append(cands[int(np.argmin(q))])
        return np.array(out)
    return run


def test_retrain_single_feature_toy():
    data = single_feature_toy()
    model0 = HingeLinearClassifier(C=10.0).fit(data.X, data.y, feature_space=data.space)
    seeds = data.malicious
    attack = _brute_force_attack(0.005)
    before = attack(model0, seeds)
    assert evasion_robustness(model0, before) < 1.0
    assert np.all(before[:, data.space.index("k")] == 0)
    result = retrain_iterative(model0, attack, data.X, data.y, seeds,
                               RetrainConfig(max_iterations=1, seeds_per_iteration=len(seeds)))
    assert evasion_robustness(result.model, before) == 1.0


def test_retrain_does_not_hurt_robustness_on_toy():
    train, test = evasion_toy(seed=11), evasion_toy(seed=12)
    model0 = HingeLinearClassifier().fit(train.X, train.y, feature_space=train.space)
    attack = CoordinateGreedy(frozen=tuple(sorted(set(train.space.names) & {"/OpenAction", "/Names"})))
    result = retrain_iterative(model0, attack, train.X, train.y, train.malicious,
                               RetrainConfig(max_iterations=3, seeds_per_iteration=50))
    seeds = test.malicious
    r0 = evasion_robustness(model0, clone(attack).set_params(estimator=model0).transform(seeds))
    r1 = evasion_robustness(result.model, clone(attack).set_params(estimator=result.model).transform(seeds))
    assert r1 >= r0
    assert [e["iteration"] for e in result.log] == list(range(1, len(result.log) + 1))


def test_retrain_config_validation():
    with pytest.raises(ValueError):
        RetrainConfig(seeds_per_iteration=0)
    with pytest.raises(ValueError):
        RetrainConfig(max_iterations=-1)


# -- metrics -------------------------------------------------------------------


def test_robustness_ratios():
    model = fixed((1.0,), bias=-0.5)
    assert evasion_robustness(model, [[1]] * 90 + [[0]] * 10) == 0.9
    assert evasion_robustness(model, [[1]] * 5) == 1.0
    assert evasion_robustness(model, [[0]] * 5) == 0.0
    with pytest.raises(ValueError):
        evasion_robustness(model, np.zeros((0, 1)))


def test_auc_examples():
    _, auc = roc_from_scores([0.9, 0.7, 0.8, 0.1], [1, 1, 0, 0])
    assert auc == pytest.approx(0.75, abs=1e-12)
    assert roc_from_scores([3, 4, 1, 2], [1, 1, 0, 0])[1] == 1.0
    assert roc_from_scores([0.5] * 6, [1, 0, 1, 0, 1, 0])[1] == 0.5
    with pytest.raises(DegenerateData):
        roc_from_scores([1, 2], [1, 1])


def test_roc_is_monotone_and_matches_concordance():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 51))
        scores = rng.integers(0, 6, n) / 5.0
        labels = np.arange(n) % 2 == 0
        roc, auc = roc_from_scores(scores, labels)
        fpr, tpr = zip(*roc)
        assert list(fpr) == sorted(fpr) and list(tpr) == sorted(tpr)
        assert auc == pytest.approx(concordance_auc(scores, labels), abs=1e-9)


def test_roc_auc_report():
    data = evasion_toy(seed=6)
    model = HingeLinearClassifier().fit(data.X, data.y, feature_space=data.space)
    report = roc_auc(model, data.X, data.y)
    assert 0.0 <= report.auc <= 1.0
    assert report.auc == pytest.approx(concordance_auc(model.decision_function(data.X), data.y == 1), abs=1e-9)
    assert set(report.to_json()) >= {"auc", "roc", "evasion_robustness"}


# -- l1 sweep ------------------------------------------------------------------


GRID = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]


def test_l1_selects_signal_features():
    data = signal_toy()
    sweep = l1_sweep(data.X, data.y, MatchCount(3), GRID, feature_space=data.space)
    assert sweep.reached and sweep.selected == SIGNAL_FEATURES
    counts = [len(s) for _, s in sweep.log]
    assert counts == sorted(counts)
    assert len(sweep.log) == len(GRID)


def test_l1_cover_empty_set_is_first_grid_point():
    data = signal_toy()
    sweep = l1_sweep(data.X, data.y, CoverSet(frozenset()), GRID, feature_space=data.space)
    assert sweep.chosen_C == GRID[0]


def test_l1_unreachable_target():
    data = signal_toy()
    sweep = l1_sweep(data.X, data.y, MatchCount(len(data.space) + 1), GRID, feature_space=data.space)
    assert not sweep.reached
    assert sweep.to_json()["status"] == "TargetUnreachable"
    assert len(sweep.log) == len(GRID)


def test_l1_grid_must_ascend():
    data = signal_toy()
    with pytest.raises(ValueError):
        l1_sweep(data.X, data.y, MatchCount(3), [1.0, 0.1])
