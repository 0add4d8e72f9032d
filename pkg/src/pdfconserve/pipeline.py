"""Conserved-feature identification.

Per seed: a deletion pass gives the preliminary conserved set S, the
non-conserved set O and the dependent sets D[j]; a replacement pass then
moves features whose benign replacement keeps the file malicious from S to
O. Forward elimination merges per-seed results into one uniform set, which
can be carried over to Hidost (path consolidation) and binarized PDFRate
(count-feature flips).
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Any, Callable, Iterable, Mapping, Sequence, TypeVar

from .errors import OracleError, SeedNotMalicious
from .features import (
    DEFAULT_COUNT_DEFS,
    DEFAULT_DEPTH_LIMIT,
    DEFAULT_RULES,
    ConsolidationRule,
    CountFeatureDef,
    FeatureKind,
    FeatureSpace,
    consolidate,
    extract_pdfrate_b,
    path_strings,
)
from .mutation import delete_path, replace_path, select_donor
from .oracle import Oracle
from .pdf import ObjectGraph, serialize_pdf

log = logging.getLogger(__name__)

DEFAULT_BETA = 3

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class SeedRecord:
    id: str
    graph: ObjectGraph
    label: str = "malicious"


@dataclass(frozen=True)
class ConservedSets:
    seed_id: str
    S: frozenset[str] = frozenset()
    O: frozenset[str] = frozenset()  # noqa: E741
    D: Mapping[str, frozenset[str]] = field(default_factory=dict)
    inconclusive: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.S & self.O:
            raise ValueError(f"S and O overlap on {sorted(self.S & self.O)}")
        for j, deps in self.D.items():
            if j in deps:
                raise ValueError(f"{j} listed as its own dependent")

    def to_json(self) -> dict[str, Any]:
        return {
            "seed": self.seed_id,
            "S": sorted(self.S),
            "O": sorted(self.O),
            "inconclusive": sorted(self.inconclusive),
            "D": {j: sorted(self.D[j]) for j in sorted(self.D)},
        }

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "ConservedSets":
        return cls(
            seed_id=str(raw["seed"]),
            S=frozenset(raw.get("S", ())),
            O=frozenset(raw.get("O", ())),
            D={j: frozenset(v) for j, v in raw.get("D", {}).items()},
            inconclusive=frozenset(raw.get("inconclusive", ())),
        )


@dataclass(frozen=True)
class TraceEntry:
    feature: str
    o_count: int
    s_count: int
    action: str  # "kept", "eliminated" or "skipped"


@dataclass(frozen=True)
class UniformResult:
    S: frozenset[str]
    eliminated: frozenset[str]
    visited_Q: frozenset[str]
    beta: Fraction
    trace: tuple[TraceEntry, ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "S": sorted(self.S),
            "eliminated": sorted(self.eliminated),
            "beta": _beta_json(self.beta),
            "trace": [
                {"feature": t.feature, "o_count": t.o_count, "s_count": t.s_count, "action": t.action}
                for t in self.trace
            ],
        }


def _beta_json(beta: Fraction) -> int | float | str:
    if beta.denominator == 1:
        return beta.numerator
    as_float = float(beta)
    return as_float if Fraction(as_float) == beta else str(beta)


def as_beta(beta: Real | str) -> Fraction:
    value = Fraction(beta)
    if value <= 0:
        raise ValueError("beta must be positive")
    return value


def _pmap(fn: Callable[[T], R], items: Sequence[T], workers: int, oracle: Oracle | None = None) -> list[R]:
    limit = workers
    cap = getattr(oracle, "max_parallel", 1) if oracle is not None else None
    if cap is not None:
        limit = min(limit, cap)
    if limit <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=limit) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------


def check_seed(seed: SeedRecord, oracle: Oracle) -> None:
    verdict = oracle.evaluate(serialize_pdf(seed.graph))
    if not verdict.malicious:
        raise SeedNotMalicious(f"oracle calls seed {seed.id!r} benign before any mutation")


def deletion_pass(
    seed: SeedRecord,
    oracle: Oracle,
    space: FeatureSpace | None = None,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
    workers: int = 1,
) -> ConservedSets:
    """Delete each present feature in turn and ask the oracle.

    Still malicious: the feature is non-conserved (O). Benign: possibly
    conserved (S). Errors: inconclusive. D[j] records what else vanished.
    Features absent from the seed are never probed.
    """
    if space is not None and space.kind is not FeatureKind.SL2013:
        raise ValueError("the deletion pass runs over an SL2013 feature space")
    check_seed(seed, oracle)
    present = path_strings(seed.graph, depth_limit)
    if space is not None:
        present = frozenset(p for p in present if p in space)
    features = sorted(present)

    def probe(j: str) -> tuple[str, str, frozenset[str]]:
        outcome = delete_path(seed.graph, j, depth_limit)
        deps = frozenset(str(p) for p in outcome.flipped) - {j}
        try:
            verdict = oracle.evaluate(serialize_pdf(outcome.graph))
        except OracleError as exc:
            log.warning("seed %s: deleting %s -> %s", seed.id, j, exc)
            return j, "inconclusive", deps
        return j, "O" if verdict.malicious else "S", deps

    S, O, inconclusive = set(), set(), set()
    D: dict[str, frozenset[str]] = {}
    for j, where, deps in _pmap(probe, features, workers, oracle):
        D[j] = deps
        {"S": S, "O": O, "inconclusive": inconclusive}[where].add(j)
    return ConservedSets(seed.id, frozenset(S), frozenset(O), D, frozenset(inconclusive))


def replacement_pass(
    seed: SeedRecord,
    prelim: ConservedSets,
    donor_graph: ObjectGraph,
    oracle: Oracle,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
    workers: int = 1,
) -> ConservedSets:
    """Replace each preliminary conserved feature with a benign donor object.

    Features whose replacement leaves the file malicious move to O.
    """
    if prelim.seed_id != seed.id:
        raise ValueError("preliminary sets belong to a different seed")

    def probe(j: str) -> tuple[str, str]:
        donor = select_donor(donor_graph, j, depth_limit)
        outcome = replace_path(seed.graph, j, donor, depth_limit)
        try:
            verdict = oracle.evaluate(serialize_pdf(outcome.graph))
        except OracleError as exc:
            log.warning("seed %s: replacing %s -> %s", seed.id, j, exc)
            return j, "inconclusive"
        return j, "O" if verdict.malicious else "S"

    S, O, inconclusive = set(), set(prelim.O), set(prelim.inconclusive)
    for j, where in _pmap(probe, sorted(prelim.S), workers, oracle):
        {"S": S, "O": O, "inconclusive": inconclusive}[where].add(j)
    return ConservedSets(seed.id, frozenset(S), frozenset(O), dict(prelim.D), frozenset(inconclusive))


def conserved_sets(
    seed: SeedRecord,
    donor_graph: ObjectGraph,
    oracle: Oracle,
    space: FeatureSpace | None = None,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
    workers: int = 1,
) -> ConservedSets:
    prelim = deletion_pass(seed, oracle, space, depth_limit, workers)
    return replacement_pass(seed, prelim, donor_graph, oracle, depth_limit, workers)


# --------------------------------------------------------------------------


def forward_elimination(sets: Sequence[ConservedSets], beta: Real | str = DEFAULT_BETA) -> UniformResult:
    """Merge per-seed conserved sets into one uniform set.

    Start from the union of the S_i. Visit each candidate j once in
    lexicographic order; unless j was already swept up, compare how many
    seeds call it non-conserved against beta times how many call it
    conserved. When the former wins, drop j and everything that depends on
    it (D^j, unioned over seeds) and mark them visited.
    """
    if not sets:
        raise ValueError("need at least one seed")
    beta = as_beta(beta)
    S: set[str] = set().union(*(s.S for s in sets))
    candidates = sorted(S)
    Q: set[str] = set()
    D: dict[str, set[str]] = {}
    for s in sets:
        for j, deps in s.D.items():
            D.setdefault(j, set()).update(deps)
    trace = []
    for j in candidates:
        o_count = sum(j in s.O for s in sets)
        s_count = sum(j in s.S for s in sets)
        if j in Q:
            trace.append(TraceEntry(j, o_count, s_count, "skipped"))
            continue
        if o_count >= beta * s_count:
            removed = {j} | D.get(j, set())
            S -= removed
            Q |= removed
            trace.append(TraceEntry(j, o_count, s_count, "eliminated"))
        else:
            trace.append(TraceEntry(j, o_count, s_count, "kept"))
    eliminated = frozenset(candidates) - S
    return UniformResult(frozenset(S), eliminated, frozenset(Q), beta, tuple(trace))


@dataclass(frozen=True)
class HidostMapping:
    features: frozenset[str]
    collisions: Mapping[str, tuple[str, ...]]
    missing: tuple[str, ...] = ()

    def to_json(self) -> dict[str, Any]:
        return {
            "S": sorted(self.features),
            "collisions": {k: list(v) for k, v in sorted(self.collisions.items())},
            "missing": list(self.missing),
        }


def map_to_hidost(
    uniform: UniformResult | Iterable[str],
    rules: Sequence[ConsolidationRule] = DEFAULT_RULES,
    space: FeatureSpace | None = None,
) -> HidostMapping:
    """Consolidate each conserved SL2013 path into its Hidost name.

    ``collisions`` lists Hidost names reached from more than one SL2013 path;
    ``missing`` lists SL2013 paths whose image is not a feature of ``space``
    (when a Hidost space is given).
    """
    paths = uniform.S if isinstance(uniform, UniformResult) else frozenset(uniform)
    images: dict[str, list[str]] = {}
    for p in sorted(paths):
        images.setdefault(str(consolidate(p, rules)), []).append(p)
    collisions = {img: tuple(src) for img, src in images.items() if len(src) > 1}
    missing: list[str] = []
    if space is not None:
        missing = sorted(src for img, srcs in images.items() if img not in space for src in srcs)
    features = frozenset(img for img in images if space is None or img in space)
    return HidostMapping(features, collisions, tuple(missing))


def pdfrate_b_sets(
    seeds: Sequence[SeedRecord],
    per_seed: Sequence[ConservedSets],
    defs: Sequence[CountFeatureDef] = DEFAULT_COUNT_DEFS,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
) -> list[ConservedSets]:
    """Per-seed conserved count features.

    A count feature is conserved for a seed when deleting one of the seed's
    conserved paths flips it from 1 to 0. The O side holds count features
    flipped by deleting a non-conserved path and not already in S.
    """
    if len(seeds) != len(per_seed):
        raise ValueError("per_seed must align with seeds")
    result = []
    for seed, sets in zip(seeds, per_seed):
        if sets.seed_id != seed.id:
            raise ValueError(f"per-seed sets for {sets.seed_id!r} do not match seed {seed.id!r}")
        base = extract_pdfrate_b(seed.graph, defs).active()

        def flips(paths: Iterable[str]) -> set[str]:
            out: set[str] = set()
            for p in sorted(paths):
                mutated = delete_path(seed.graph, p, depth_limit).graph
                out |= base - extract_pdfrate_b(mutated, defs).active()
            return out

        s_side = flips(sets.S)
        o_side = flips(sets.O) - s_side
        result.append(ConservedSets(seed.id, frozenset(s_side), frozenset(o_side)))
    return result


def map_to_pdfrate_b(
    seeds: Sequence[SeedRecord],
    per_seed: Sequence[ConservedSets],
    defs: Sequence[CountFeatureDef] = DEFAULT_COUNT_DEFS,
    beta: Real | str = DEFAULT_BETA,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
) -> UniformResult:
    sets = pdfrate_b_sets(seeds, per_seed, defs, depth_limit)
    if not sets:
        return UniformResult(frozenset(), frozenset(), frozenset(), as_beta(beta), ())
    return forward_elimination(sets, beta)


def overlap_analysis(uniform: UniformResult | Iterable[str], selected: Iterable[str]) -> tuple[int, int, int]:
    """``(|S & selected|, |selected|, |S|)``."""
    conserved = uniform.S if isinstance(uniform, UniformResult) else frozenset(uniform)
    selected = frozenset(selected)
    return len(conserved & selected), len(selected), len(conserved)


def write_conserved_jsonl(sets: Iterable[ConservedSets]) -> str:
    return "".join(json.dumps(s.to_json(), sort_keys=True) + "\n" for s in sets)


def read_conserved_jsonl(text: str) -> list[ConservedSets]:
    return [ConservedSets.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]
