"""JSON interchange form of an object graph.

Encoding (one JSON value per PDF value)::

    null        null
    boolean     true / false
    number      JSON number
    string      {"text_b64": "<base64>"}
    name        {"name": "<token>"}
    array       [...]
    dictionary  {"dict": {"<key>": <value>, ...}}
    stream      {"dict": {...}, "stream_b64": "<base64>"}
    reference   {"ref": <int>, "gen": <int, default 0>}

A document is ``{"trailer": <dictionary>, "objects": {"<num>": <value>}}``.
"""

from __future__ import annotations

import base64
import binascii
import json
from typing import Any

from ..errors import SchemaViolation
from .objects import Name, ObjectGraph, Provenance, Ref, Stream


def encode_value(value: Any) -> Any:
    if value is None or isinstance(value, bool):
        return value
    if isinstance(value, Name):
        return {"name": str(value)}
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, bytes):
        return {"text_b64": base64.b64encode(value).decode("ascii")}
    if isinstance(value, Ref):
        return {"ref": value.num, "gen": value.gen}
    if isinstance(value, list):
        return [encode_value(v) for v in value]
    if isinstance(value, dict):
        return {"dict": {k: encode_value(v) for k, v in value.items()}}
    if isinstance(value, Stream):
        return {
            "dict": {k: encode_value(v) for k, v in value.dict.items()},
            "stream_b64": base64.b64encode(value.data).decode("ascii"),
        }
    raise TypeError(f"not a PDF value: {value!r}")


def graph_to_json(graph: ObjectGraph) -> dict[str, Any]:
    return {
        "trailer": encode_value(graph.trailer),
        "objects": {str(num): encode_value(graph.objects[num]) for num in sorted(graph.objects)},
    }


def dump_graph_json(graph: ObjectGraph) -> str:
    return json.dumps(graph_to_json(graph), indent=1, sort_keys=False)


def _b64(text: Any, path: str) -> bytes:
    if not isinstance(text, str):
        raise SchemaViolation("base64 payload must be a string", path)
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError):
        raise SchemaViolation("invalid base64", path) from None


def decode_value(node: Any, path: str = "$") -> Any:
    if node is None or isinstance(node, bool):
        return node
    if isinstance(node, (int, float)):
        return node
    if isinstance(node, list):
        return [decode_value(v, f"{path}[{i}]") for i, v in enumerate(node)]
    if not isinstance(node, dict):
        raise SchemaViolation(f"unexpected JSON value {node!r}", path)
    keys = set(node)
    if keys == {"name"}:
        token = node["name"]
        if not isinstance(token, str) or not token:
            raise SchemaViolation("name must be a non-empty string", f"{path}.name")
        return Name(token)
    if keys == {"text_b64"}:
        return _b64(node["text_b64"], f"{path}.text_b64")
    if "ref" in keys and keys <= {"ref", "gen"}:
        num, gen = node["ref"], node.get("gen", 0)
        for label, val in (("ref", num), ("gen", gen)):
            if not isinstance(val, int) or isinstance(val, bool) or val < 0:
                raise SchemaViolation("must be a non-negative integer", f"{path}.{label}")
        return Ref(num, gen)
    if "dict" in keys and keys <= {"dict", "stream_b64"}:
        body = node["dict"]
        if not isinstance(body, dict):
            raise SchemaViolation("dict must be a JSON object", f"{path}.dict")
        entries = {}
        for key, val in body.items():
            if not key:
                raise SchemaViolation("empty dictionary key", f"{path}.dict")
            entries[key] = decode_value(val, f"{path}.dict.{key}")
        if "stream_b64" in keys:
            data = _b64(node["stream_b64"], f"{path}.stream_b64")
            entries["Length"] = len(data)
            return Stream(entries, data)
        return entries
    raise SchemaViolation(f"unrecognised object encoding with keys {sorted(keys)}", path)


def load_graph_json(text: str | bytes | dict) -> ObjectGraph:
    """Build a graph from its JSON interchange form."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON: {exc.msg}", "$") from None
    else:
        doc = text
    if not isinstance(doc, dict):
        raise SchemaViolation("top level must be an object", "$")
    for key in ("trailer", "objects"):
        if key not in doc:
            raise SchemaViolation(f"missing {key!r}", "$")
    raw_objects = doc["objects"]
    if not isinstance(raw_objects, dict):
        raise SchemaViolation("objects must be a JSON object", "$.objects")
    objects: dict[int, Any] = {}
    for key, node in raw_objects.items():
        if not key.isdigit() or int(key) <= 0:
            raise SchemaViolation("object numbers must be positive decimal strings", f"$.objects.{key}")
        objects[int(key)] = decode_value(node, f"$.objects.{key}")
    raw_trailer = doc["trailer"]
    if isinstance(raw_trailer, dict) and set(raw_trailer) != {"dict"}:
        # Bare mapping form: {"Root": {"ref": 1}, ...}
        raw_trailer = {"dict": raw_trailer}
        where = "$.trailer"
    else:
        where = "$.trailer.dict"
    trailer = decode_value(raw_trailer, "$.trailer")
    if not isinstance(trailer, dict):
        raise SchemaViolation("trailer must be a dictionary", "$.trailer")
    root = trailer.get("Root")
    if root is None:
        raise SchemaViolation("missing 'Root'", where)
    if not isinstance(root, Ref):
        raise SchemaViolation("Root must be a reference", f"{where}.Root")
    if not isinstance(objects.get(root.num), dict):
        raise SchemaViolation(f"Root {root.num} does not resolve to a dictionary", f"{where}.Root")
    return ObjectGraph(objects=objects, trailer=trailer, provenance=Provenance.LOADED_JSON)
