"""In-memory PDF object model.

PDF values map onto Python values as follows::

    null        -> None
    boolean     -> bool
    number      -> int | float
    string      -> bytes
    name        -> Name (a str subclass)
    array       -> list
    dictionary  -> dict[str, value]   (keys are name tokens without the slash)
    stream      -> Stream
    reference   -> Ref

Graphs are treated as immutable values. Every mutating operation in this
package deep-copies before editing.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, NamedTuple


class Name(str):
    """A PDF name token. Distinct from text so ``/Foo`` and ``(Foo)`` never compare equal."""

    __slots__ = ()

    def __new__(cls, value: str) -> "Name":
        if not value:
            raise ValueError("name tokens must be non-empty")
        return super().__new__(cls, value)

    def __repr__(self) -> str:
        return f"Name({str.__repr__(self)})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Name):
            return str.__eq__(self, other)
        return NotImplemented if not isinstance(other, str) else False

    def __ne__(self, other: object) -> bool:
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    __hash__ = str.__hash__

    def __deepcopy__(self, memo: dict) -> "Name":
        return self


class Ref(NamedTuple):
    num: int
    gen: int = 0

    def __repr__(self) -> str:
        return f"Ref({self.num}, {self.gen})"


@dataclass(eq=True)
class Stream:
    """Stream dictionary plus raw payload; ``/Length`` always matches the payload."""

    dict: dict[str, Any]
    data: bytes = b""

    def __post_init__(self) -> None:
        self.dict["Length"] = len(self.data)


class Provenance(str, enum.Enum):
    PARSED_PDF = "ParsedPdf"
    LOADED_JSON = "LoadedJson"
    MUTATED = "Mutated"


@dataclass(frozen=True)
class ObjectGraph:
    objects: Mapping[int, Any]
    trailer: dict[str, Any]
    provenance: Provenance = Provenance.PARSED_PDF
    dangling: tuple[Ref, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        root = self.trailer.get("Root")
        if not isinstance(root, Ref):
            raise ValueError("trailer must contain a Root reference")
        if not isinstance(self.resolve(root), dict):
            raise ValueError(f"trailer Root {root.num} {root.gen} R does not resolve to a dictionary")
        if not self.dangling:
            object.__setattr__(self, "dangling", tuple(find_dangling(self.objects, self.trailer)))

    def resolve(self, value: Any) -> Any:
        return resolve(self, value)

    @property
    def root(self) -> dict[str, Any]:
        return self.resolve(self.trailer["Root"])

    def copy(self, provenance: Provenance = Provenance.MUTATED) -> "ObjectGraph":
        return ObjectGraph(
            objects=copy.deepcopy(dict(self.objects)),
            trailer=copy.deepcopy(self.trailer),
            provenance=provenance,
        )

    def __repr__(self) -> str:
        return f"ObjectGraph({len(self.objects)} objects, provenance={self.provenance.value})"


def resolve(graph: ObjectGraph, value: Any) -> Any:
    """Follow references until a direct object is reached.

    Dangling references and reference cycles resolve to ``None``, which is how
    lenient viewers treat them.
    """
    seen: set[int] = set()
    while isinstance(value, Ref):
        if value.num in seen or value.num not in graph.objects:
            return None
        seen.add(value.num)
        value = graph.objects[value.num]
    return value


def iter_refs(value: Any) -> Iterator[Ref]:
    stack = [value]
    while stack:
        item = stack.pop()
        if isinstance(item, Ref):
            yield item
        elif isinstance(item, Stream):
            stack.extend(item.dict.values())
        elif isinstance(item, dict):
            stack.extend(item.values())
        elif isinstance(item, list):
            stack.extend(item)


def find_dangling(objects: Mapping[int, Any], trailer: dict[str, Any]) -> list[Ref]:
    missing = set()
    for value in [trailer, *objects.values()]:
        for ref in iter_refs(value):
            if ref.num not in objects:
                missing.add(ref)
    return sorted(missing)


def inline(graph: ObjectGraph, value: Any) -> Any:
    """Deep copy ``value`` with every reference replaced by the object it names.

    Used to lift an object out of one graph so it can be planted into another.
    References that dangle or close a cycle become ``None``.
    """

    def walk(item: Any, chain: frozenset[int]) -> Any:
        if isinstance(item, Ref):
            if item.num in chain or item.num not in graph.objects:
                return None
            return walk(graph.objects[item.num], chain | {item.num})
        if isinstance(item, Stream):
            return Stream({k: walk(v, chain) for k, v in item.dict.items()}, item.data)
        if isinstance(item, dict):
            return {k: walk(v, chain) for k, v in item.items()}
        if isinstance(item, list):
            return [walk(v, chain) for v in item]
        return item

    return walk(value, frozenset())


def type_name(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, bytes):
        return "string"
    if isinstance(value, Name):
        return "name"
    if isinstance(value, list):
        return "array"
    if isinstance(value, dict):
        return "dictionary"
    if isinstance(value, Stream):
        return "stream"
    if isinstance(value, Ref):
        return "reference"
    raise TypeError(f"not a PDF value: {value!r}")
