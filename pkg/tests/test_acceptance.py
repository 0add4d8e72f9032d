"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Every tolerance and sample size is pinned below. Reference answers come from
the brute-force implementations in ``tests/oracles.py``, never from the
package itself.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import pytest

from pdfconserve import fixtures
from pdfconserve.cli import main
from pdfconserve.config import DEFAULTS
from pdfconserve.features import StructuralPath, path_strings
from pdfconserve.learning import (
    CoordinateGreedy,
    HingeLinearClassifier,
    MatchCount,
    l1_sweep,
    roc_auc,
)
from pdfconserve.learning.toy import CONSERVED, SIGNAL_FEATURES, evasion_toy, signal_toy
from pdfconserve.mutation import delete_path, locate_sites, probe_dependents, replace_path, select_donor
from pdfconserve.pdf import parse_pdf, serialize_pdf
from pdfconserve.pipeline import ConservedSets, SeedRecord, conserved_sets, forward_elimination, map_to_pdfrate_b

from .oracles import concordance_auc, exhaustive_min_q, forward_elimination_reference

# -- pinned parameters ---------------------------------------------------------

FE_INSTANCES = 1000          # criterion 1
FE_MAX_SEEDS = 6
FE_MAX_FEATURES = 10
FE_BETAS = (1, 2, 3, 5)
FE_RNG = 20240101

FE_BETA = 3                  # criteria 2, 3

MUTATION_MIN_PAIRS = 30      # criterion 4

CG_MODELS = 200              # criterion 6
CG_MAX_FEATURES = 12
CG_RESTARTS = 8
CG_MATCH_RATE = 0.95
CG_Q_ABS_TOL = 1e-9
CG_RNG = 6

FROZEN_SEEDS = 100           # criterion 7
FROZEN_ROWS = 100

RETRAIN_SEED = 7             # criterion 8
RETRAIN_ATTACK = "cg_frozen"
AUC_DROP_MAX = 0.02

AUC_SETS = 100               # criterion 9
AUC_MAX_POINTS = 50
AUC_TOL = 1e-9
AUC_RNG = 9

L1_GRID = tuple(DEFAULTS["learning"]["l1_grid"])  # criterion 10

CLI_SEED = 11                # criterion 11

_results: dict[int, bool] = {}


def verdict(capsys, n: int, ok: bool, detail: str) -> None:
    _results[n] = ok
    with capsys.disabled():
        print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\nacceptance summary:")
        for n in range(1, 12):
            state = _results.get(n)
            print(f"  criterion {n:2d}: {'not run' if state is None else 'PASS' if state else 'FAIL'}")


# -- 1. Forward Elimination vs literal transcription --------------------------


def _random_instance(rng: random.Random):
    features = [f"f{k}" for k in range(rng.randint(1, FE_MAX_FEATURES))]
    sets = []
    for i in range(rng.randint(1, FE_MAX_SEEDS)):
        present = [f for f in features if rng.random() < 0.7]
        S = {f for f in present if rng.random() < 0.5}
        O = set(present) - S  # noqa: E741
        D = {j: frozenset(f for f in features if f != j and rng.random() < 0.2) for j in sorted(S)}
        sets.append(ConservedSets(str(i), frozenset(S), frozenset(O), D))
    return sets, rng.choice(FE_BETAS)


def test_criterion_01_forward_elimination_matches_reference(capsys):
    rng = random.Random(FE_RNG)
    mismatches = 0
    for _ in range(FE_INSTANCES):
        sets, beta = _random_instance(rng)
        ours = forward_elimination(sets, beta).S
        ref = forward_elimination_reference([s.S for s in sets], [s.O for s in sets], [s.D for s in sets], beta)
        mismatches += ours != ref
    verdict(capsys, 1, mismatches == 0,
            f"{FE_INSTANCES - mismatches}/{FE_INSTANCES} random instances equal the literal transcription")


# -- 2. worked examples ---------------------------------------------------------


def _cs(seed, S=(), O=(), D=None):  # noqa: E741
    return ConservedSets(seed, frozenset(S), frozenset(O), {k: frozenset(v) for k, v in (D or {}).items()})


def test_criterion_02_worked_examples(capsys):
    contradiction = [_cs("1", {"a", "b"}), _cs("2", {"b"}, {"a"}), _cs("3", {"b"}, {"a"}), _cs("4", {"b"}, {"a"})]
    single = [_cs("1", {"x", "y", "z"}, {"p", "q"}, {"x": {"y"}})]
    cascade = [_cs("1", {"a", "b"}, D={"a": {"b"}}), _cs("2", {"b"}, {"a"}),
               _cs("3", {"b"}, {"a"}), _cs("4", {"b"}, {"a"})]
    checks = {
        "contradiction": forward_elimination(contradiction, FE_BETA).S == {"b"},
        "single seed": forward_elimination(single, FE_BETA).S == {"x", "y", "z"},
        "dependence cascade": forward_elimination(cascade, FE_BETA).S == frozenset(),
    }
    failed = [k for k, ok in checks.items() if not ok]
    verdict(capsys, 2, not failed, f"3 worked examples, failed: {failed or 'none'}")


# -- 3. fixture table -----------------------------------------------------------


def test_criterion_03_fixture_table(capsys):
    seeds = fixtures.malicious_seeds()
    per = [conserved_sets(s, fixtures.benign_donor(), fixtures.default_oracle()) for s in seeds]
    uniform = forward_elimination(per, FE_BETA).S
    pdfrate = map_to_pdfrate_b(seeds, per).S
    # JavaScript relevance recomputed from the path text: does any component name JS?
    relevance = {p: bool({"JS", "JavaScript"} & set(StructuralPath.parse(p))) for p in uniform}
    checks = {
        "uniform == expected": uniform == fixtures.EXPECTED_UNIFORM_SL2013,
        "no decoys": not uniform & fixtures.DECOY_PATHS,
        "pdfrate-b subset": fixtures.EXPECTED_PDFRATE_B_SUBSET <= pdfrate,
        "js relevance": relevance == fixtures.JAVASCRIPT_RELEVANT,
    }
    failed = [k for k, ok in checks.items() if not ok]
    verdict(capsys, 3, not failed,
            f"S={sorted(uniform)} pdfrate_b={sorted(pdfrate)}, failed: {failed or 'none'}")


# -- 4. mutation matrix ---------------------------------------------------------


def test_criterion_04_mutation_matrix(capsys):
    donor = fixtures.benign_donor()
    pairs, failures = 0, []
    for name, graph in sorted(fixtures.all_fixtures().items()):
        for path in sorted(path_strings(graph)):
            pairs += 1
            deleted = delete_path(graph, path)
            flipped = {str(p) for p in deleted.flipped}
            after = path_strings(deleted.graph)
            replaced = replace_path(graph, path, select_donor(donor, path))
            deps = {str(p) for p in probe_dependents(graph, path)}
            ok = (path in flipped and path not in after and locate_sites(deleted.graph, path) == []
                  and path in path_strings(replaced.graph)
                  and path not in deps and deps == flipped - {path})
            if not ok:
                failures.append((name, path))
    ok = pairs >= MUTATION_MIN_PAIRS and not failures
    verdict(capsys, 4, ok, f"{pairs - len(failures)}/{pairs} path/fixture pairs hold, failures: {failures[:5] or 'none'}")


# -- 5. round trip ----------------------------------------------------------------


def test_criterion_05_round_trip(capsys):
    graphs = []
    for name, graph in sorted(fixtures.all_fixtures().items()):
        graphs.append((name, graph))
        for path in sorted(path_strings(graph)):
            graphs.append((f"{name}-{path}", delete_path(graph, path).graph))
    failures = []
    for label, graph in graphs:
        once = serialize_pdf(graph)
        back = parse_pdf(once)
        if path_strings(back) != path_strings(graph) or serialize_pdf(back) != once:
            failures.append(label)
    verdict(capsys, 5, not failures,
            f"{len(graphs) - len(failures)}/{len(graphs)} graphs (fixtures plus every single deletion) round-trip")


# -- 6. Coordinate Greedy vs brute force -----------------------------------------


def test_criterion_06_coordinate_greedy_vs_exhaustive(capsys):
    rng = np.random.default_rng(CG_RNG)
    matched = never_worse = frozen_ok = 0
    for i in range(CG_MODELS):
        d = int(rng.integers(2, CG_MAX_FEATURES + 1))
        w = rng.normal(size=d)
        x = (rng.random(d) < 0.5).astype(float)
        b = max(float(rng.normal()), -float(w @ x))  # x starts malicious
        lam = float(rng.choice([0.0, 0.005, 0.1, 0.5, 2.0]))
        frozen_idx = tuple(int(k) for k in np.flatnonzero(rng.random(d) < 0.25))
        raw = {"weights": list(w), "bias": b, "reg": {"kind": "l2", "C": 1.0}}
        model = HingeLinearClassifier.from_json(raw)
        frozen = tuple(model.space_.names[k] for k in frozen_idx)
        attack = CoordinateGreedy(lam=lam, restarts=CG_RESTARTS, frozen=frozen, random_state=i)
        res = attack.run(model, x)
        q_ref = exhaustive_min_q(w, b, x, lam, frozen_idx)
        q_x = float(w @ x + b)
        matched += abs(res.objective - q_ref) <= CG_Q_ABS_TOL
        never_worse += res.objective <= q_x + CG_Q_ABS_TOL
        frozen_ok += all(res.x[k] == x[k] for k in frozen_idx)
    rate = matched / CG_MODELS
    ok = rate >= CG_MATCH_RATE and never_worse == CG_MODELS and frozen_ok == CG_MODELS
    verdict(capsys, 6, ok, f"Q matches exhaustive on {rate:.1%} (need {CG_MATCH_RATE:.0%}); "
                           f"Q<=Q(x) {never_worse}/{CG_MODELS}; frozen mask {frozen_ok}/{CG_MODELS}")


# -- 7. frozen conserved features lower evasion success ------------------------


def test_criterion_07_frozen_attack_evades_less(capsys):
    free_success, frozen_success, lower = [], [], 0
    for s in range(FROZEN_SEEDS):
        train, test = evasion_toy(seed=2 * s), evasion_toy(seed=2 * s + 1)
        model = HingeLinearClassifier().fit(train.X, train.y, feature_space=train.space)
        rows = test.malicious[:FROZEN_ROWS]
        frozen = tuple(sorted(CONSERVED & set(train.space.names)))
        rates = []
        for mask in ((), frozen):
            adv = CoordinateGreedy(estimator=model, frozen=mask, random_state=s).fit().transform(rows)
            rates.append(float(np.mean(model.decision_function(adv) < 0.0)))
        free_success.append(rates[0])
        frozen_success.append(rates[1])
        lower += rates[1] < rates[0]
    diff = float(np.mean(free_success) - np.mean(frozen_success))
    verdict(capsys, 7, diff > 0.0,
            f"mean evasion success unrestricted {np.mean(free_success):.3f} vs frozen {np.mean(frozen_success):.3f} "
            f"(difference {diff:.3f}; frozen strictly lower on {lower}/{FROZEN_SEEDS} seeds)")


# -- 8. retraining ------------------------------------------------------------------


def test_criterion_08_retraining_improves_robustness(capsys, tmp_path):
    assert main(["experiment", "--out", str(tmp_path), "--seed", str(RETRAIN_SEED)]) == 0
    table = json.loads((tmp_path / "experiment.json").read_text())["comparison"]
    row = table[RETRAIN_ATTACK]
    ok = row["retrained_robustness"] >= row["baseline_robustness"] and row["auc_drop"] <= AUC_DROP_MAX
    info = table.get("cg")
    with capsys.disabled():
        if info is not None:
            print(f"\n[criterion  8] info: unrestricted CG robustness {info['baseline_robustness']:.3f} -> "
                  f"{info['retrained_robustness']:.3f}, AUC drop {info['auc_drop']:.4f} "
                  f"(not the gated attacker; see README)")
    verdict(capsys, 8, ok,
            f"{RETRAIN_ATTACK}: robustness {row['baseline_robustness']:.3f} -> {row['retrained_robustness']:.3f}, "
            f"AUC drop {row['auc_drop']:.4f} (max {AUC_DROP_MAX})")


# -- 9. AUC -------------------------------------------------------------------------


def test_criterion_09_auc_matches_concordance(capsys):
    rng = np.random.default_rng(AUC_RNG)
    identity = HingeLinearClassifier.from_json({"weights": [1.0], "bias": 0.0, "reg": {"kind": "l2", "C": 1.0}})
    worst = 0.0
    for _ in range(AUC_SETS):
        n = int(rng.integers(2, AUC_MAX_POINTS + 1))
        scores = np.round(rng.normal(size=n), int(rng.integers(0, 3)))  # rounding forces ties
        labels = rng.random(n) < 0.5
        labels[0], labels[1] = True, False
        report = roc_auc(identity, scores.reshape(-1, 1), labels.astype(int))
        worst = max(worst, abs(report.auc - concordance_auc(scores, labels)))
    example = roc_auc(identity, np.array([[0.9], [0.7], [0.8], [0.1]]), np.array([1, 1, 0, 0])).auc
    ok = worst <= AUC_TOL and abs(example - 0.75) <= AUC_TOL
    verdict(capsys, 9, ok, f"max |AUC - concordance| over {AUC_SETS} sets = {worst:.2e}; hand example {example}")


# -- 10. l1 sweep -------------------------------------------------------------------


def test_criterion_10_l1_sweep(capsys):
    data = signal_toy()
    sweep = l1_sweep(data.X, data.y, MatchCount(3), L1_GRID, feature_space=data.space)
    counts = [len(s) for _, s in sweep.log]
    ok = sweep.selected == SIGNAL_FEATURES and counts == sorted(counts)
    verdict(capsys, 10, ok, f"chosen C={sweep.chosen_C} selects {sorted(sweep.selected or [])}; counts along grid {counts}")


# -- 11. determinism ------------------------------------------------------------------


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_11_cli_determinism(capsys, tmp_path):
    corpus = tmp_path / "fx"
    assert main(["fixtures", "--out", str(corpus)]) == 0
    config = str(corpus / "config.json")
    commands = ("extract", "conserve", "map", "train", "attack", "retrain", "evaluate", "experiment")
    trees, codes = [], []
    for k in range(2):
        out = tmp_path / f"run{k}"
        codes.append([main([c, "--config", config, "--out", str(out), "--seed", str(CLI_SEED)]) for c in commands])
        trees.append(_tree(out))
    differing = sorted(k for k in set(trees[0]) | set(trees[1]) if trees[0].get(k) != trees[1].get(k))
    ok = codes[0] == codes[1] == [0] * len(commands) and not differing
    verdict(capsys, 11, ok, f"{len(commands)} commands, {len(trees[0])} output files, differing: {differing or 'none'}")


def test_seed_record_is_used_consistently():
    # Guard for criterion 3: fixture seeds are the ones the CLI writes out.
    assert [s.id for s in fixtures.malicious_seeds()] == sorted(fixtures.SEED_BUILDERS)
    assert isinstance(fixtures.malicious_seeds()[0], SeedRecord)
