"""Structural-path (SL2013 / Hidost) and binarized PDFRate count features."""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .pdf.objects import Name, ObjectGraph, Ref, Stream

DEFAULT_DEPTH_LIMIT = 10

# A site is the place a dictionary key lives: the number of the indirect object
# that owns the container (None for the trailer) plus the chain of keys and
# array indices leading from that object's top level to the key itself.
Site = tuple["int | None", tuple["str | int", ...]]


class StructuralPath(tuple):
    """Sequence of dictionary-key names from the document catalog.

    Rendered as ``/A/B/C``. Components containing ``/`` or ``#`` are escaped
    as ``#2F`` / ``#23`` so that rendering and :meth:`parse` are inverses.
    """

    def __new__(cls, components: Iterable[str]) -> "StructuralPath":
        comps = tuple(str(c) for c in components)
        if not comps:
            raise ValueError("a structural path needs at least one component")
        if any(not c for c in comps):
            raise ValueError(f"empty component in {comps!r}")
        return super().__new__(cls, comps)

    @classmethod
    def parse(cls, text: str) -> "StructuralPath":
        if not text.startswith("/") or text == "/":
            raise ValueError(f"not a structural path: {text!r}")
        parts = text[1:].split("/")
        return cls(re.sub(r"#([0-9A-Fa-f]{2})", lambda m: chr(int(m.group(1), 16)), p) for p in parts)

    def __str__(self) -> str:
        return "".join("/" + c.replace("#", "#23").replace("/", "#2F") for c in self)

    def __repr__(self) -> str:
        return f"StructuralPath({str(self)!r})"

    def is_prefix_of(self, other: Sequence[str]) -> bool:
        return len(self) < len(other) and tuple(other[: len(self)]) == tuple(self)


def as_path(path: "StructuralPath | str | Sequence[str]") -> StructuralPath:
    if isinstance(path, StructuralPath):
        return path
    if isinstance(path, str):
        return StructuralPath.parse(path)
    return StructuralPath(path)


class FeatureKind(str, enum.Enum):
    SL2013 = "SL2013"
    HIDOST = "Hidost"
    PDFRATE_B = "PdfRateB"
    GENERIC = "Generic"


@dataclass(frozen=True)
class FeatureSpace:
    kind: FeatureKind
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", FeatureKind(self.kind))
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if list(names) != sorted(set(names)):
            raise ValueError("feature names must be unique and sorted lexicographically")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self._positions[name]

    @property
    def _positions(self) -> dict[str, int]:
        cached = self.__dict__.get("_pos")
        if cached is None:
            cached = {n: i for i, n in enumerate(self.names)}
            object.__setattr__(self, "_pos", cached)
        return cached

    def __contains__(self, name: object) -> bool:
        return name in self._positions

    def to_text(self) -> str:
        return "".join(n + "\n" for n in self.names)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def write(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_text().encode("utf-8"))

    @classmethod
    def read(cls, path: str | Path, kind: FeatureKind | str = FeatureKind.SL2013) -> "FeatureSpace":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(kind, tuple(line for line in lines if line))

    @classmethod
    def generic(cls, n_features: int) -> "FeatureSpace":
        width = max(3, len(str(n_features - 1)))
        return cls(FeatureKind.GENERIC, tuple(f"f{j:0{width}d}" for j in range(n_features)))


@dataclass(frozen=True)
class FeatureVector:
    space: FeatureSpace
    bits: tuple[int, ...]
    ignored: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        object.__setattr__(self, "bits", bits)
        if len(bits) != len(self.space.names):
            raise ValueError("bit vector length does not match the feature space")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("feature values must be 0 or 1")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=float)

    def active(self) -> frozenset[str]:
        return frozenset(n for n, b in zip(self.space.names, self.bits) if b)


# --------------------------------------------------------------------------
# Structural paths


def walk(graph: ObjectGraph, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> Iterator[tuple[StructuralPath, Site]]:
    """Yield ``(path, site)`` for every dictionary key reachable from the catalog.

    Keys append a component, arrays are transparent and references are
    followed. An object already on the current chain is never re-entered, so
    the walk terminates on cyclic graphs. A stream's ``/Length`` is skipped:
    the writer owns it, so it is not a feature a mutation could remove.
    """
    if depth_limit < 1:
        raise ValueError("depth_limit must be positive")
    objects = graph.objects

    def visit(value: Any, path: tuple[str, ...], owner: int | None, chain: tuple, on_chain: frozenset[int]):
        while isinstance(value, Ref):
            if value.num in on_chain or value.num not in objects:
                return
            owner, chain = value.num, ()
            on_chain = on_chain | {value.num}
            value = objects[value.num]
        skip = ()
        if isinstance(value, Stream):
            value, skip = value.dict, ("Length",)
        if isinstance(value, dict):
            if len(path) >= depth_limit:
                return
            for key in sorted(k for k in value if k not in skip):
                here = path + (key,)
                yield StructuralPath(here), (owner, chain + (key,))
                yield from visit(value[key], here, owner, chain + (key,), on_chain)
        elif isinstance(value, list):
            for i, item in enumerate(value):
                yield from visit(item, path, owner, chain + (i,), on_chain)

    yield from visit(graph.trailer["Root"], (), None, ("Root",), frozenset())


def extract_paths(graph: ObjectGraph, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> frozenset[StructuralPath]:
    return frozenset(path for path, _ in walk(graph, depth_limit))


def path_strings(graph: ObjectGraph, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> frozenset[str]:
    return frozenset(str(p) for p in extract_paths(graph, depth_limit))


# --------------------------------------------------------------------------
# Hidost consolidation


@dataclass(frozen=True)
class ConsolidationRule:
    """Rewrite a path prefix.

    Each pattern component matches one path component literally, except
    ``*`` which matches any single component. On a match the matched prefix
    is replaced by ``replacement`` and the rest of the path is kept.
    """

    pattern: tuple[str, ...]
    replacement: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.pattern or not self.replacement:
            raise ValueError("consolidation rules need a non-empty pattern and replacement")

    @classmethod
    def parse(cls, line: str) -> "ConsolidationRule":
        left, sep, right = line.partition("->")
        if not sep:
            raise ValueError(f"rule must look like '<pattern> -> <replacement>': {line!r}")
        return cls(tuple(as_path(left.strip())), tuple(as_path(right.strip())))

    def match(self, path: Sequence[str]) -> bool:
        if len(path) < len(self.pattern):
            return False
        return all(p == "*" or p == c for p, c in zip(self.pattern, path))

    def __str__(self) -> str:
        return f"{StructuralPath(self.pattern)} -> {StructuralPath(self.replacement)}"


# The SL2013 conserved paths map one-to-one onto Hidost names, so the shipped
# default is the empty (identity) rule list. Full tables load from a file.
DEFAULT_RULES: tuple[ConsolidationRule, ...] = ()


def load_rules(path: str | Path) -> list[ConsolidationRule]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


def parse_rules(text: str) -> list[ConsolidationRule]:
    rules = []
    for line in text.splitlines():
        # "#" inside a path is an escape (#2F), so comments need leading whitespace.
        line = re.split(r"(?:^|\s)#", line, maxsplit=1)[0].strip()
        if line:
            rules.append(ConsolidationRule.parse(line))
    return rules


def consolidate(path: StructuralPath | str, rules: Sequence[ConsolidationRule] = DEFAULT_RULES) -> StructuralPath:
    path = as_path(path)
    for rule in rules:
        if rule.match(path):
            return StructuralPath(rule.replacement + tuple(path[len(rule.pattern):]))
    return path


# --------------------------------------------------------------------------
# Binarized PDFRate count features


@dataclass(frozen=True)
class CountFeatureDef:
    name: str
    match: frozenset[str]
    binarize_threshold: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "match", frozenset(self.match))
        if not self.match:
            raise ValueError(f"{self.name}: match set must be non-empty")
        if self.binarize_threshold < 1:
            raise ValueError(f"{self.name}: threshold must be >= 1")


DEFAULT_COUNT_DEFS: tuple[CountFeatureDef, ...] = (
    CountFeatureDef("count_acroform", frozenset({"AcroForm"})),
    CountFeatureDef("count_box_other", frozenset({"ArtBox", "BleedBox", "CropBox", "TrimBox"})),
    CountFeatureDef("count_embeddedfile", frozenset({"EmbeddedFile", "EmbeddedFiles"})),
    CountFeatureDef("count_javascript", frozenset({"JavaScript"})),
    CountFeatureDef("count_js", frozenset({"JS"})),
    CountFeatureDef("count_page", frozenset({"Page"})),
)


def load_count_defs(path: str | Path) -> list[CountFeatureDef]:
    """Read count definitions from JSON: ``[{"name", "match": [...], "threshold"}]``."""

    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return [CountFeatureDef(d["name"], frozenset(d["match"]), int(d.get("threshold", 1))) for d in raw]


def count_tokens(graph: ObjectGraph) -> dict[str, int]:
    """Occurrences of each name token as a dictionary key or name value, over every object."""
    counts: dict[str, int] = {}
    stack: list[Any] = [graph.trailer, *graph.objects.values()]
    while stack:
        item = stack.pop()
        if isinstance(item, Stream):
            item = item.dict
        if isinstance(item, dict):
            for key, val in item.items():
                counts[key] = counts.get(key, 0) + 1
                stack.append(val)
        elif isinstance(item, list):
            stack.extend(item)
        elif isinstance(item, Name):
            counts[str(item)] = counts.get(str(item), 0) + 1
    return counts


def pdfrate_b_space(defs: Sequence[CountFeatureDef] = DEFAULT_COUNT_DEFS) -> FeatureSpace:
    names = [d.name for d in defs]
    if len(set(names)) != len(names):
        raise ValueError("count feature names must be unique")
    return FeatureSpace(FeatureKind.PDFRATE_B, tuple(sorted(names)))


def extract_pdfrate_b(graph: ObjectGraph, defs: Sequence[CountFeatureDef] = DEFAULT_COUNT_DEFS) -> FeatureVector:
    space = pdfrate_b_space(defs)
    counts = count_tokens(graph)
    by_name = {d.name: d for d in defs}
    bits = []
    for name in space.names:
        d = by_name[name]
        total = sum(counts.get(token, 0) for token in d.match)
        bits.append(int(total >= d.binarize_threshold))
    return FeatureVector(space, tuple(bits))


# --------------------------------------------------------------------------
# Feature spaces and vectors


def document_features(
    graph: ObjectGraph,
    kind: FeatureKind | str = FeatureKind.SL2013,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
    rules: Sequence[ConsolidationRule] = DEFAULT_RULES,
    count_defs: Sequence[CountFeatureDef] = DEFAULT_COUNT_DEFS,
) -> frozenset[str]:
    """Names of the features that are 1 on ``graph``."""
    kind = FeatureKind(kind)
    if kind is FeatureKind.SL2013:
        return path_strings(graph, depth_limit)
    if kind is FeatureKind.HIDOST:
        return frozenset(str(consolidate(p, rules)) for p in extract_paths(graph, depth_limit))
    if kind is FeatureKind.PDFRATE_B:
        return extract_pdfrate_b(graph, count_defs).active()
    raise ValueError(f"cannot extract {kind.value} features from a document")


def build_feature_space(
    corpus: Sequence[ObjectGraph],
    kind: FeatureKind | str = FeatureKind.SL2013,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
    rules: Sequence[ConsolidationRule] = DEFAULT_RULES,
    count_defs: Sequence[CountFeatureDef] = DEFAULT_COUNT_DEFS,
) -> FeatureSpace:
    if not corpus:
        raise ValueError("corpus must be non-empty")
    kind = FeatureKind(kind)
    if kind is FeatureKind.PDFRATE_B:
        return pdfrate_b_space(count_defs)
    names: set[str] = set()
    for graph in corpus:
        names |= document_features(graph, kind, depth_limit, rules)
    return FeatureSpace(kind, tuple(sorted(names)))


def vectorize(paths: Iterable[StructuralPath | str], space: FeatureSpace) -> FeatureVector:
    """Binary vector over ``space``; names outside the space are counted in ``ignored``."""
    if space.kind not in (FeatureKind.SL2013, FeatureKind.HIDOST):
        raise ValueError("vectorize applies to structural-path spaces")
    present = {str(p) for p in paths}
    bits = tuple(int(n in present) for n in space.names)
    ignored = sum(1 for p in present if p not in space)
    return FeatureVector(space, bits, ignored)


class StructuralPathVectorizer(TransformerMixin, BaseEstimator):
    """Learn a path vocabulary from graphs and map graphs to binary rows.

    ``kind="Hidost"`` applies ``rules`` to every path before vocabulary
    lookup.
    """

    def __init__(self, kind: str = "SL2013", depth_limit: int = DEFAULT_DEPTH_LIMIT, rules=None):
        self.kind = kind
        self.depth_limit = depth_limit
        self.rules = rules

    def fit(self, graphs, y=None):
        kind = FeatureKind(self.kind)
        if kind not in (FeatureKind.SL2013, FeatureKind.HIDOST):
            raise ValueError(f"unsupported kind {self.kind!r}")
        self.space_ = build_feature_space(list(graphs), kind, self.depth_limit, self.rules or DEFAULT_RULES)
        self.n_features_out_ = len(self.space_)
        return self

    def transform(self, graphs) -> np.ndarray:
        check_is_fitted(self, "space_")
        rows = []
        for g in graphs:
            names = document_features(g, self.space_.kind, self.depth_limit, self.rules or DEFAULT_RULES)
            rows.append(vectorize(names, self.space_).bits)
        return np.asarray(rows, dtype=float).reshape(len(rows), len(self.space_))

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        check_is_fitted(self, "space_")
        return np.asarray(self.space_.names, dtype=object)


class PdfRateBVectorizer(TransformerMixin, BaseEstimator):
    """Binarized count features. Stateless; ``fit`` only fixes the space."""

    def __init__(self, defs=None):
        self.defs = defs

    def fit(self, graphs=None, y=None):
        self.space_ = pdfrate_b_space(self.defs or DEFAULT_COUNT_DEFS)
        self.n_features_out_ = len(self.space_)
        return self

    def transform(self, graphs) -> np.ndarray:
        check_is_fitted(self, "space_")
        defs = self.defs or DEFAULT_COUNT_DEFS
        rows = [extract_pdfrate_b(g, defs).bits for g in graphs]
        return np.asarray(rows, dtype=float).reshape(len(rows), len(self.space_))

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        check_is_fitted(self, "space_")
        return np.asarray(self.space_.names, dtype=object)
