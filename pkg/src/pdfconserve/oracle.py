"""Malice oracles: decide whether a repacked PDF still does something malicious.

Three implementations share the ``evaluate(pdf_bytes) -> Verdict`` protocol:

* :class:`RuleOracle` - deterministic signature rules over structural paths,
* :class:`CachedOracle` - verdicts keyed by the SHA-256 of the file bytes,
* :class:`CommandOracle` - an external program (e.g. a sandbox wrapper).

Each oracle exposes ``max_parallel``: ``None`` means concurrent calls are
safe, an integer caps how many callers may evaluate at once.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Protocol

from .errors import MalformedPdf, OracleError, UnsupportedConstruct
from .features import DEFAULT_DEPTH_LIMIT, StructuralPath, as_path, walk
from .pdf import parse_pdf
from .pdf.objects import ObjectGraph, Ref, Stream

DEFAULT_TIMEOUT = 60.0


class Outcome(str, enum.Enum):
    MALICIOUS = "malicious"
    BENIGN = "benign"


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    signatures: tuple[str, ...] = ()
    latency: float = 0.0

    def __post_init__(self) -> None:
        if (self.outcome is Outcome.MALICIOUS) != bool(self.signatures):
            raise ValueError("a verdict is malicious exactly when it carries signatures")

    @property
    def malicious(self) -> bool:
        return self.outcome is Outcome.MALICIOUS


class Oracle(Protocol):
    max_parallel: int | None

    def evaluate(self, pdf: bytes) -> Verdict: ...


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AnyNonEmpty:
    def __call__(self, value: Any, graph: ObjectGraph) -> bool:
        value = graph.resolve(value)
        if value is None:
            return False
        if isinstance(value, bytes):
            return len(value) > 0
        if isinstance(value, Stream):
            return len(value.data) > 0
        if isinstance(value, (list, dict)):
            return len(value) > 0
        return True

    def to_json(self) -> Any:
        return "any"


@dataclass(frozen=True)
class ContainsToken:
    """Raw-byte search over text values and stream payloads below the value."""

    token: bytes

    def __call__(self, value: Any, graph: ObjectGraph) -> bool:
        stack = [(value, frozenset())]
        while stack:
            item, chain = stack.pop()
            if isinstance(item, Ref):
                if item.num in chain or item.num not in graph.objects:
                    continue
                stack.append((graph.objects[item.num], chain | {item.num}))
            elif isinstance(item, bytes):
                if self.token in item:
                    return True
            elif isinstance(item, Stream):
                if self.token in item.data:
                    return True
                stack.extend((v, chain) for v in item.dict.values())
            elif isinstance(item, dict):
                stack.extend((v, chain) for v in item.values())
            elif isinstance(item, list):
                stack.extend((v, chain) for v in item)
        return False

    def to_json(self) -> Any:
        return {"contains": self.token.decode("latin-1")}


@dataclass(frozen=True)
class SignatureRule:
    id: str
    required_path: StructuralPath
    payload_predicate: AnyNonEmpty | ContainsToken = AnyNonEmpty()

    def __post_init__(self) -> None:
        object.__setattr__(self, "required_path", as_path(self.required_path))

    @classmethod
    def from_json(cls, raw: dict[str, Any]) -> "SignatureRule":
        pred = raw.get("predicate", "any")
        if pred == "any":
            predicate: AnyNonEmpty | ContainsToken = AnyNonEmpty()
        elif isinstance(pred, dict) and "contains" in pred:
            predicate = ContainsToken(str(pred["contains"]).encode("latin-1"))
        else:
            raise ValueError(f"unknown predicate {pred!r}")
        return cls(str(raw["id"]), as_path(raw["path"]), predicate)

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "path": str(self.required_path), "predicate": self.payload_predicate.to_json()}


def matching_rules(graph: ObjectGraph, rules: Iterable[SignatureRule], depth_limit: int = DEFAULT_DEPTH_LIMIT) -> list[str]:
    """Ids of the rules whose path is present with a satisfying value."""
    rules = list(rules)
    wanted = {r.required_path for r in rules}
    values: dict[StructuralPath, list[Any]] = {}
    for path, (owner, chain) in walk(graph, depth_limit):
        if path not in wanted:
            continue
        node: Any = graph.trailer if owner is None else graph.objects[owner]
        for step in chain:
            node = node.dict[step] if isinstance(node, Stream) else node[step]
        values.setdefault(path, []).append(node)
    hits = []
    for rule in rules:
        if any(rule.payload_predicate(v, graph) for v in values.get(rule.required_path, ())):
            hits.append(rule.id)
    return hits


class RuleOracle:
    """Malicious iff some rule's path is present and its value satisfies the predicate."""

    max_parallel: int | None = None

    def __init__(self, rules: Iterable[SignatureRule], depth_limit: int = DEFAULT_DEPTH_LIMIT):
        self.rules = tuple(rules)
        self.depth_limit = depth_limit

    def evaluate(self, pdf: bytes) -> Verdict:
        start = time.perf_counter()
        try:
            graph = parse_pdf(pdf)
        except (MalformedPdf, UnsupportedConstruct) as exc:
            raise OracleError(OracleError.PARSE_FAILURE, str(exc)) from exc
        return self.evaluate_graph(graph, time.perf_counter() - start)

    def evaluate_graph(self, graph: ObjectGraph, latency: float = 0.0) -> Verdict:
        hits = matching_rules(graph, self.rules, self.depth_limit)
        outcome = Outcome.MALICIOUS if hits else Outcome.BENIGN
        return Verdict(outcome, tuple(hits), latency)


# --------------------------------------------------------------------------


class CachedOracle:
    """Verdicts keyed by content hash.

    In strict mode a miss is a protocol violation. Otherwise the wrapped
    ``fallback`` oracle is consulted and its answer recorded.
    """

    def __init__(self, store: dict[str, Verdict] | None = None, strict: bool = True, fallback: Oracle | None = None):
        if not strict and fallback is None:
            raise ValueError("permissive mode needs a fallback oracle")
        self.store: dict[str, Verdict] = dict(store or {})
        self.strict = strict
        self.fallback = fallback
        self._lock = threading.Lock()

    @property
    def max_parallel(self) -> int | None:
        return None if self.strict else getattr(self.fallback, "max_parallel", 1)

    def evaluate(self, pdf: bytes) -> Verdict:
        key = sha256_hex(pdf)
        with self._lock:
            hit = self.store.get(key)
        if hit is not None:
            return hit
        if self.strict:
            raise OracleError(OracleError.PROTOCOL_VIOLATION, f"cache miss for {key} in strict mode")
        verdict = self.fallback.evaluate(pdf)
        with self._lock:
            # A racing caller may have recorded first; keep the first answer.
            return self.store.setdefault(key, Verdict(verdict.outcome, verdict.signatures))

    @classmethod
    def load(cls, path: str | Path, strict: bool = True, fallback: Oracle | None = None) -> "CachedOracle":
        store: dict[str, Verdict] = {}
        path = Path(path)
        if path.exists():
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    store[rec["sha256"]] = Verdict(Outcome(rec["verdict"]), tuple(rec.get("signatures", ())))
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad cache record: {exc}") from None
        return cls(store, strict, fallback)

    def dump(self, path: str | Path) -> None:
        lines = [
            json.dumps({"sha256": k, "verdict": v.outcome.value, "signatures": list(v.signatures)})
            for k, v in sorted(self.store.items())
        ]
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


# --------------------------------------------------------------------------


class CommandOracle:
    """Run ``<program> <pdf-path>`` and read a JSON verdict from stdout.

    The program must print ``{"verdict": "malicious"|"benign", "signatures": [...]}``
    and exit 0. Anything else is a protocol violation; overrunning ``timeout``
    seconds is a timeout.
    """

    def __init__(self, program: str | list[str], timeout: float = DEFAULT_TIMEOUT, max_parallel: int = 1):
        self.program = [program] if isinstance(program, str) else list(program)
        self.timeout = timeout
        self.max_parallel = max_parallel

    def evaluate(self, pdf: bytes) -> Verdict:
        fd, name = tempfile.mkstemp(suffix=".pdf")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(pdf)
            start = time.perf_counter()
            try:
                proc = subprocess.run(
                    [*self.program, name], capture_output=True, timeout=self.timeout, check=False
                )
            except subprocess.TimeoutExpired:
                raise OracleError(OracleError.TIMEOUT, f"no verdict within {self.timeout}s") from None
            except OSError as exc:
                raise OracleError(OracleError.PROTOCOL_VIOLATION, f"cannot run {self.program[0]}: {exc}") from None
            latency = time.perf_counter() - start
        finally:
            os.unlink(name)
        if proc.returncode != 0:
            raise OracleError(OracleError.PROTOCOL_VIOLATION, f"exit status {proc.returncode}")
        return parse_command_output(proc.stdout, latency)


def parse_command_output(stdout: bytes, latency: float = 0.0) -> Verdict:
    try:
        doc = json.loads(stdout)
    except (ValueError, UnicodeDecodeError):
        raise OracleError(OracleError.PROTOCOL_VIOLATION, "stdout is not a JSON object") from None
    if not isinstance(doc, dict) or doc.get("verdict") not in ("malicious", "benign"):
        raise OracleError(OracleError.PROTOCOL_VIOLATION, "missing or invalid 'verdict'")
    sigs = doc.get("signatures", [])
    if not isinstance(sigs, list) or not all(isinstance(s, str) for s in sigs):
        raise OracleError(OracleError.PROTOCOL_VIOLATION, "'signatures' must be a list of strings")
    outcome = Outcome(doc["verdict"])
    if (outcome is Outcome.MALICIOUS) != bool(sigs):
        raise OracleError(OracleError.PROTOCOL_VIOLATION, "verdict and signatures disagree")
    return Verdict(outcome, tuple(sigs), latency)
