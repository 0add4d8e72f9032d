"""Repack an :class:`ObjectGraph` as a self-contained single-revision PDF."""

from __future__ import annotations

import math
from typing import Any

from ..errors import SerializationFailure
from .objects import Name, ObjectGraph, Ref, Stream

HEADER = b"%PDF-1.5\n%\xe2\xe3\xcf\xd3\n"
_TRAILER_DROP = {"Size", "Prev", "XRefStm", "Root", "Encrypt"}
_NAME_SAFE = set(range(0x21, 0x7F)) - set(b"()<>[]{}/%#")
_STRING_ESCAPES = {ord("("): b"\\(", ord(")"): b"\\)", ord("\\"): b"\\\\",
                   ord("\r"): b"\\r", ord("\n"): b"\\n"}


def format_name(name: str) -> bytes:
    raw = name.encode("latin-1")
    out = bytearray(b"/")
    for c in raw:
        if c in _NAME_SAFE:
            out.append(c)
        else:
            out += b"#%02X" % c
    return bytes(out)


def format_string(value: bytes) -> bytes:
    out = bytearray(b"(")
    for c in value:
        if c in _STRING_ESCAPES:
            out += _STRING_ESCAPES[c]
        elif c < 0x20 or c > 0x7E:
            out += b"\\%03o" % c
        else:
            out.append(c)
    out += b")"
    return bytes(out)


def format_real(value: float) -> bytes:
    if not math.isfinite(value):
        raise SerializationFailure(f"non-finite number {value!r}")
    text = repr(float(value))
    if "e" in text or "E" in text:
        text = f"{value:.17f}".rstrip("0")
    if text.endswith("."):
        text += "0"
    return text.encode("ascii")


class _Writer:
    def __init__(self, graph: ObjectGraph):
        self.objects = graph.objects

    def value(self, item: Any) -> bytes:
        if item is None:
            return b"null"
        if isinstance(item, bool):
            return b"true" if item else b"false"
        if isinstance(item, Name):
            return format_name(item)
        if isinstance(item, int):
            return str(item).encode("ascii")
        if isinstance(item, float):
            return format_real(item)
        if isinstance(item, bytes):
            return format_string(item)
        if isinstance(item, Ref):
            if item.num not in self.objects:
                return b"null"
            return b"%d 0 R" % item.num
        if isinstance(item, list):
            return b"[" + b" ".join(self.value(v) for v in item) + b"]"
        if isinstance(item, dict):
            return self.dictionary(item)
        if isinstance(item, Stream):
            raise SerializationFailure("streams must be indirect objects")
        raise SerializationFailure(f"cannot serialize {type(item).__name__}: {item!r}")

    def dictionary(self, item: dict[str, Any]) -> bytes:
        parts = [b"<<"]
        for key, val in item.items():
            if not key:
                raise SerializationFailure("empty dictionary key")
            parts.append(format_name(key) + b" " + self.value(val))
        parts.append(b">>")
        return b" ".join(parts)

    def indirect(self, num: int, item: Any) -> bytes:
        head = b"%d 0 obj\n" % num
        if isinstance(item, Stream):
            sdict = dict(item.dict)
            sdict["Length"] = len(item.data)
            return head + self.dictionary(sdict) + b"\nstream\n" + item.data + b"\nendstream\nendobj\n"
        return head + self.value(item) + b"\nendobj\n"


def serialize_pdf(graph: ObjectGraph) -> bytes:
    """Write ``graph`` as one body, one classic xref table and one trailer.

    Objects are emitted in object-number order, generation numbers become 0,
    dangling references become ``null`` and every stream gets a direct
    ``/Length`` matching its payload.
    """
    writer = _Writer(graph)
    out = bytearray(HEADER)
    offsets: dict[int, int] = {}
    for num in sorted(graph.objects):
        if num <= 0:
            raise SerializationFailure(f"invalid object number {num}")
        offsets[num] = len(out)
        out += writer.indirect(num, graph.objects[num])
    size = max(offsets, default=0) + 1
    xref_at = len(out)
    out += b"xref\n0 %d\n" % size
    for num in range(size):
        if num in offsets:
            out += b"%010d 00000 n\r\n" % offsets[num]
        else:
            out += b"0000000000 65535 f\r\n"
    trailer: dict[str, Any] = {"Size": size, "Root": graph.trailer["Root"]}
    trailer.update((k, v) for k, v in graph.trailer.items() if k not in _TRAILER_DROP)
    out += b"trailer\n" + writer.dictionary(trailer) + b"\nstartxref\n%d\n%%%%EOF\n" % xref_at
    return bytes(out)
