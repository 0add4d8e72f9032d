"""Command-line entry point.

Every subcommand reads one JSON config (``--config``), honors ``--seed`` and
``CPATH_*`` overrides, and writes its reports into ``--out``. Reports are
plain JSON with sorted keys and no timestamps, so two runs with the same
inputs produce identical bytes.

Exit status: 0 success, 2 configuration error, 3 oracle failure, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import fixtures
from .config import FIXTURES, load_config, resolve_path
from .errors import ConfigError, OracleError, PdfConserveError, SeedNotMalicious
from .features import (
    DEFAULT_COUNT_DEFS,
    DEFAULT_RULES,
    FeatureKind,
    FeatureSpace,
    build_feature_space,
    document_features,
    load_count_defs,
    load_rules,
)
from .learning.attacks import CoordinateGreedy, SaltPepper
from .learning.l1 import CoverSet, MatchCount, l1_sweep
from .learning.linear import HingeLinearClassifier
from .learning.metrics import evasion_robustness, roc_auc
from .learning.retrain import RetrainConfig, retrain_iterative
from .learning.toy import evasion_toy
from .oracle import CachedOracle, CommandOracle, RuleOracle, SignatureRule
from .pdf import load_graph_json, parse_pdf, serialize_pdf
from .pdf.objects import ObjectGraph
from .pipeline import (
    SeedRecord,
    conserved_sets,
    forward_elimination,
    map_to_hidost,
    map_to_pdfrate_b,
    read_conserved_jsonl,
    write_conserved_jsonl,
)

log = logging.getLogger("pdfconserve")

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE, EXIT_DATA = 0, 2, 3, 4


class DataError(PdfConserveError):
    pass


# --------------------------------------------------------------------------
# Small helpers


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class Run:
    """Config, output directory and file writing for one command invocation."""

    def __init__(self, cfg: dict[str, Any], base_dir: Path, out: Path):
        self.cfg = cfg
        self.base_dir = base_dir
        self.out = out
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        log.info("wrote %s", path)
        return path

    def report(self, name: str, body: dict[str, Any]) -> Path:
        return self.write(name, dumps({"config": self.cfg, **body}))

    def path(self, value: str) -> Path:
        return resolve_path(value, self.base_dir)

    @property
    def seed(self) -> int:
        return self.cfg["seed"]


def _load_document(path: Path) -> ObjectGraph:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            return load_graph_json(data)
        return parse_pdf(data)
    except PdfConserveError as exc:
        raise DataError(f"{path}: {exc}") from exc


def load_corpus(run: Run, spec: str | None) -> list[tuple[str, ObjectGraph]]:
    """``fixtures:<name>`` selects a shipped set; anything else is a file or directory."""
    if spec is None:
        return []
    if spec.startswith(FIXTURES + ":"):
        which = spec.split(":", 1)[1]
        if which == "seeds":
            return [(s.id, s.graph) for s in fixtures.malicious_seeds()]
        if which == "clean":
            return [(f"clean{i}", g) for i, g in enumerate(fixtures.clean_documents())]
        named = fixtures.all_fixtures()
        if which in named:
            return [(which, named[which])]
        raise ConfigError(f"unknown fixture set {spec!r}")
    path = run.path(spec)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".pdf", ".json") and p.is_file())
    elif path.is_file():
        files = [path]
    else:
        raise ConfigError(f"corpus path {path} does not exist")
    return [(p.stem, _load_document(p)) for p in files]


def _rules(run: Run):
    value = run.cfg["pipeline"]["rules_path"]
    if value is None:
        return DEFAULT_RULES
    try:
        return load_rules(run.path(value))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"consolidation rules {value}: {exc}") from None


def _count_defs(run: Run):
    value = run.cfg["pipeline"]["count_defs_path"]
    if value is None:
        return DEFAULT_COUNT_DEFS
    try:
        return load_count_defs(run.path(value))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"count definitions {value}: {exc}") from None


def build_oracle(run: Run):
    spec = run.cfg["oracle"]

    def rule_oracle() -> RuleOracle:
        if spec["rules"] == FIXTURES:
            return RuleOracle(fixtures.default_rules(), run.cfg["pipeline"]["depth_limit"])
        try:
            raw = json.loads(run.path(spec["rules"]).read_text(encoding="utf-8"))
            rules = [SignatureRule.from_json(r) for r in raw]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"oracle rules {spec['rules']}: {exc}") from None
        return RuleOracle(rules, run.cfg["pipeline"]["depth_limit"])

    if spec["kind"] == "rule":
        return rule_oracle()
    if spec["kind"] == "cached":
        fallback = None if spec["strict"] else rule_oracle()
        try:
            return CachedOracle.load(run.path(spec["cache"]), spec["strict"], fallback)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    program = spec["program"]
    program = [program] if isinstance(program, str) else list(program)
    return CommandOracle(program, spec["timeout"], spec["max_parallel"])


# --------------------------------------------------------------------------
# Structural commands


def cmd_extract(run: Run) -> None:
    corpus = run.cfg["corpus"]
    docs = [(f"seed:{i}", 1, g) for i, g in load_corpus(run, corpus["seeds"])]
    docs += [(f"clean:{i}", 0, g) for i, g in load_corpus(run, corpus["clean"])]
    if not docs:
        raise ConfigError("the corpus is empty")
    pipe = run.cfg["pipeline"]
    kind = FeatureKind(pipe["feature_kind"])
    rules, defs = _rules(run), _count_defs(run)
    space = build_feature_space([g for _, _, g in docs], kind, pipe["depth_limit"], rules, defs)
    lines = []
    for doc_id, label, graph in docs:
        active = document_features(graph, kind, pipe["depth_limit"], rules, defs)
        lines.append(dumps_line({
            "id": doc_id,
            "label": label,
            "features": sorted(n for n in active if n in space),
            "ignored": sum(1 for n in active if n not in space),
        }))
    run.write("space.txt", space.to_text())
    run.write("vectors.jsonl", "".join(lines))
    run.report("extract.json", {
        "documents": len(docs),
        "features": len(space),
        "kind": kind.value,
        "space_sha256": space.sha256,
    })


def dumps_line(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False) + "\n"


def _seeds(run: Run) -> list[SeedRecord]:
    seeds = [SeedRecord(i, g) for i, g in load_corpus(run, run.cfg["corpus"]["seeds"])]
    if not seeds:
        raise ConfigError("no seeds in the corpus")
    return seeds


def _donor(run: Run) -> ObjectGraph:
    donors = load_corpus(run, run.cfg["corpus"]["donor"])
    if len(donors) != 1:
        raise ConfigError("corpus.donor must name exactly one document")
    return donors[0][1]


def _write_mappings(run: Run, seeds: list[SeedRecord], per_seed, uniform) -> dict[str, Any]:
    pipe = run.cfg["pipeline"]
    hidost = map_to_hidost(uniform, _rules(run))
    by_id = {s.id: s for s in seeds}
    kept = [by_id[c.seed_id] for c in per_seed]
    pdfrate = map_to_pdfrate_b(kept, per_seed, _count_defs(run), pipe["beta"], pipe["depth_limit"])
    run.write("hidost.json", dumps(hidost.to_json()))
    run.write("pdfrate_b.json", dumps(pdfrate.to_json()))
    return {"hidost": sorted(hidost.features), "pdfrate_b": sorted(pdfrate.S)}


def cmd_conserve(run: Run) -> None:
    pipe = run.cfg["pipeline"]
    seeds, donor, oracle = _seeds(run), _donor(run), build_oracle(run)
    per_seed, skipped = [], []
    for seed in seeds:
        try:
            per_seed.append(conserved_sets(seed, donor, oracle, None, pipe["depth_limit"], run.cfg["workers"]))
        except SeedNotMalicious as exc:
            log.warning("%s", exc)
            skipped.append(seed.id)
    run.write("conserved.jsonl", write_conserved_jsonl(per_seed))
    uniform = forward_elimination(per_seed, pipe["beta"]) if per_seed else None
    uniform_json = uniform.to_json() if uniform else {"S": [], "eliminated": [], "beta": pipe["beta"], "trace": []}
    run.write("uniform.json", dumps(uniform_json))
    mapped = _write_mappings(run, seeds, per_seed, uniform.S if uniform else frozenset())
    run.report("conserve.json", {
        "seeds": [s.id for s in seeds],
        "skipped_not_malicious": skipped,
        "inconclusive": {c.seed_id: sorted(c.inconclusive) for c in per_seed if c.inconclusive},
        "S": uniform_json["S"],
        **mapped,
    })


def cmd_map(run: Run) -> None:
    path = run.out / "conserved.jsonl"
    if not path.exists():
        raise DataError(f"{path} not found; run 'conserve' first")
    try:
        per_seed = read_conserved_jsonl(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        raise DataError(f"{path}: {exc}") from None
    seeds = _seeds(run)
    missing = sorted({c.seed_id for c in per_seed} - {s.id for s in seeds})
    if missing:
        raise DataError(f"conserved sets name unknown seeds: {', '.join(missing)}")
    S = forward_elimination(per_seed, run.cfg["pipeline"]["beta"]).S if per_seed else frozenset()
    mapped = _write_mappings(run, seeds, per_seed, S)
    run.report("map.json", {"S": sorted(S), **mapped})


# --------------------------------------------------------------------------
# Learning commands


class Dataset:
    def __init__(self, space: FeatureSpace, X, y, X_test, y_test):
        self.space, self.X, self.y, self.X_test, self.y_test = space, X, y, X_test, y_test

    @property
    def train_malicious(self) -> np.ndarray:
        return self.X[self.y == 1]

    @property
    def test_malicious(self) -> np.ndarray:
        return self.X_test[self.y_test == 1]


def _read_vectors(path: Path, space: FeatureSpace) -> tuple[np.ndarray, np.ndarray]:
    rows, labels = [], []
    try:
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            row = np.zeros(len(space))
            for name in rec["features"]:
                if name in space:
                    row[space.index(name)] = 1.0
            rows.append(row)
            labels.append(int(rec["label"]))
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: bad vector record: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no vectors")
    return np.asarray(rows), np.asarray(labels)


def load_dataset(run: Run) -> Dataset:
    spec = run.cfg["learning"]["dataset"]
    if spec["kind"] == "toy":
        n_mal, n_ben = spec.get("n_malicious", 200), spec.get("n_benign", 200)
        train = evasion_toy(n_mal, n_ben, seed=[run.seed, 0])
        test = evasion_toy(n_mal, n_ben, seed=[run.seed, 1])
        return Dataset(train.space, train.X, train.y, test.X, test.y)
    try:
        space = FeatureSpace.read(run.path(spec["space"]), spec.get("feature_kind", "SL2013"))
    except KeyError as exc:
        raise ConfigError(f"learning.dataset needs {exc}") from None
    except (OSError, ValueError) as exc:
        raise DataError(f"feature space: {exc}") from None
    X, y = _read_vectors(run.path(spec["train"]), space)
    X_test, y_test = _read_vectors(run.path(spec["test"]), space) if spec.get("test") else (X, y)
    return Dataset(space, X, y, X_test, y_test)


def _estimator(run: Run) -> HingeLinearClassifier:
    return HingeLinearClassifier(**run.cfg["learning"]["model"], random_state=run.seed)


def _conserved(run: Run, space: FeatureSpace) -> list[str]:
    value = run.cfg["learning"]["conserved"]
    if value == FIXTURES:
        names = fixtures.EXPECTED_UNIFORM_SL2013
    elif isinstance(value, list):
        names = value
    else:
        try:
            names = json.loads(run.path(value).read_text(encoding="utf-8"))["S"]
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"learning.conserved {value}: {exc}") from None
    return sorted(n for n in names if n in space)


def build_attacks(run: Run, space: FeatureSpace) -> dict[str, CoordinateGreedy | SaltPepper]:
    conserved = _conserved(run, space)
    attacks = {}
    for spec in run.cfg["learning"]["attacks"]:
        params = {k: v for k, v in spec.items() if k not in ("name", "kind")}
        frozen = params.get("frozen", [])
        if frozen == "conserved":
            frozen = conserved
        unknown = [n for n in frozen if n not in space]
        if unknown:
            raise ConfigError(f"attack {spec['name']!r} freezes unknown features: {', '.join(unknown)}")
        params["frozen"] = tuple(sorted(frozen))
        cls = CoordinateGreedy if spec["kind"] == "CoordinateGreedy" else SaltPepper
        try:
            attacks[spec["name"]] = cls(random_state=run.seed, **params)
        except TypeError as exc:
            raise ConfigError(f"attack {spec['name']!r}: {exc}") from None
    return attacks


def _baseline(run: Run, data: Dataset) -> HingeLinearClassifier:
    path = run.out / "model.json"
    if path.exists():
        try:
            return HingeLinearClassifier.load(path, data.space)
        except (ValueError, KeyError) as exc:
            raise DataError(f"{path}: {exc}") from None
    model = _estimator(run).fit(data.X, data.y, feature_space=data.space)
    model.save(path)
    return model


def _evaluate(model, data: Dataset, attacks) -> dict[str, Any]:
    report = roc_auc(model, data.X_test, data.y_test)
    out: dict[str, Any] = {"auc": report.auc, "roc": [list(p) for p in report.roc], "robustness": {}}
    for name, attack in attacks.items():
        adv = attack.set_params(estimator=model).transform(data.test_malicious)
        out["robustness"][name] = evasion_robustness(model, adv)
    return out


def cmd_train(run: Run) -> None:
    data = load_dataset(run)
    model = _estimator(run).fit(data.X, data.y, feature_space=data.space)
    model.save(run.out / "model.json")
    run.write("space.txt", data.space.to_text())
    run.report("train.json", {
        "train_accuracy": float(model.score(data.X, data.y)),
        "final_objective": float(model.loss_history_[-1]),
        "auc": roc_auc(model, data.X_test, data.y_test).auc,
        "selected": len(model.selected_features()),
        "space_sha256": data.space.sha256,
    })


def cmd_attack(run: Run) -> None:
    data = load_dataset(run)
    model = _baseline(run, data)
    body = {}
    for name, attack in build_attacks(run, data.space).items():
        attack.set_params(estimator=model)
        results = [attack.run(model, x, i) for i, x in enumerate(data.test_malicious)]
        body[name] = {
            "frozen": sorted(attack.frozen),
            "evaded": sum(r.evaded for r in results),
            "attacked": len(results),
            "robustness": evasion_robustness(model, np.asarray([r.x for r in results])),
            "mean_changed": float(np.mean([r.n_changed for r in results])) if results else 0.0,
            "variants": [sorted(data.space.names[j] for j in np.flatnonzero(r.x)) for r in results],
        }
    run.report("attack.json", {"attacks": body})


def _retrain_all(run: Run, data: Dataset, model0, attacks) -> dict[str, Any]:
    rt = run.cfg["learning"]["retrain"]
    cfg = RetrainConfig(rt["max_iterations"], rt["seeds_per_iteration"], rt["stop_when_no_new"])
    out = {}
    for name, attack in attacks.items():
        result = retrain_iterative(model0, attack, data.X, data.y, data.train_malicious, cfg)
        result.model.save(run.out / f"model_retrained_{name}.json")
        out[name] = {"model": result.model, "log": result.log}
    return out


def cmd_retrain(run: Run) -> None:
    data = load_dataset(run)
    model0 = _baseline(run, data)
    retrained = _retrain_all(run, data, model0, build_attacks(run, data.space))
    run.report("retrain.json", {"retrain": {k: {"log": v["log"]} for k, v in retrained.items()}})


def cmd_evaluate(run: Run) -> None:
    data = load_dataset(run)
    attacks = build_attacks(run, data.space)
    models = {"baseline": _baseline(run, data)}
    for name in attacks:
        path = run.out / f"model_retrained_{name}.json"
        if path.exists():
            models[f"retrained_{name}"] = HingeLinearClassifier.load(path, data.space)
    run.report("evaluate.json", {"models": {k: _evaluate(m, data, attacks) for k, m in models.items()}})


def cmd_experiment(run: Run) -> None:
    data = load_dataset(run)
    attacks = build_attacks(run, data.space)
    model0 = _estimator(run).fit(data.X, data.y, feature_space=data.space)
    model0.save(run.out / "model.json")
    base = _evaluate(model0, data, attacks)
    retrained = _retrain_all(run, data, model0, attacks)
    table = {}
    for name, attack in attacks.items():
        model = retrained[name]["model"]
        ev = _evaluate(model, data, {name: attack})
        table[name] = {
            "frozen": sorted(attack.frozen),
            "baseline_robustness": base["robustness"][name],
            "retrained_robustness": ev["robustness"][name],
            "robustness_delta": ev["robustness"][name] - base["robustness"][name],
            "baseline_auc": base["auc"],
            "retrained_auc": ev["auc"],
            "auc_drop": base["auc"] - ev["auc"],
            "retrain_log": retrained[name]["log"],
        }
    conserved = _conserved(run, data.space)
    grid = run.cfg["learning"]["l1_grid"]
    template = _estimator(run)
    sweeps = {
        "cover_conserved": l1_sweep(data.X, data.y, CoverSet(frozenset(conserved)), grid, template, data.space).to_json(),
    }
    if conserved:
        sweeps["match_count"] = l1_sweep(
            data.X, data.y, MatchCount(len(conserved)), grid, template, data.space).to_json()
    run.report("experiment.json", {
        "baseline": base,
        "comparison": table,
        "conserved": conserved,
        "frozen_mask_note": "frozen attacks keep the conserved features fixed; this is how conserved "
                            "features enter the defense here",
        "l1": sweeps,
    })


def cmd_fixtures(run: Run) -> None:
    """Write the shipped synthetic corpus as PDF files plus a config that uses them."""
    for sub in ("seeds", "clean"):
        (run.out / sub).mkdir(exist_ok=True)
    for seed in fixtures.malicious_seeds():
        (run.out / "seeds" / f"{seed.id}.pdf").write_bytes(serialize_pdf(seed.graph))
    for i, graph in enumerate(fixtures.clean_documents()):
        (run.out / "clean" / f"clean{i}.pdf").write_bytes(serialize_pdf(graph))
    (run.out / "donor.pdf").write_bytes(serialize_pdf(fixtures.benign_donor()))
    run.write("rules.json", dumps([r.to_json() for r in fixtures.default_rules()]))
    run.write("config.json", dumps({
        "corpus": {"seeds": "seeds", "clean": "clean", "donor": "donor.pdf"},
        "oracle": {"kind": "rule", "rules": "rules.json"},
    }))


COMMANDS: dict[str, tuple[Callable[[Run], None], str]] = {
    "extract": (cmd_extract, "build the feature space and per-document vectors"),
    "conserve": (cmd_conserve, "find conserved features per seed and the uniform set"),
    "map": (cmd_map, "map conserved SL2013 paths to Hidost and PDFRate-B features"),
    "train": (cmd_train, "train the baseline linear model"),
    "attack": (cmd_attack, "run the configured evasion attacks against the model"),
    "retrain": (cmd_retrain, "iteratively retrain against each attack"),
    "evaluate": (cmd_evaluate, "ROC/AUC and evasion robustness of saved models"),
    "experiment": (cmd_experiment, "baseline, retraining and L1 sweeps in one report"),
    "fixtures": (cmd_fixtures, "write the synthetic corpus and a matching config"),
}


def _u64(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--seed", type=_u64, help="RNG seed, overrides the config")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="pdfconserve", description="Find conserved PDF malware features and test evasion-robust retraining.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg, base_dir = load_config(args.config, args.seed)
        run = Run(cfg, base_dir, args.out)
        COMMANDS[args.command][0](run)
    except ConfigError as exc:
        print(f"pdfconserve: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleError as exc:
        print(f"pdfconserve: oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except PdfConserveError as exc:
        print(f"pdfconserve: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"pdfconserve: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
