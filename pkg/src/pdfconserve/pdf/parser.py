"""Read PDF bytes into an :class:`ObjectGraph`.

Supports classic cross-reference tables, cross-reference streams, object
streams, incremental updates (via ``/Prev``) and linearized files (hint
streams are simply never reached). When the cross-reference data cannot be
used, a linear scan for ``N G obj`` headers recovers the body.

Stream payloads are kept verbatim. The only decoding performed is for the
container streams the reader itself needs (``/XRef`` and ``/ObjStm``).
"""

from __future__ import annotations

import re
import zlib
from typing import Any

from ..errors import MalformedPdf, UnsupportedConstruct
from .objects import Name, ObjectGraph, Provenance, Ref, Stream

WHITESPACE = b"\x00\t\n\x0c\r "
DELIMITERS = b"()<>[]{}/%"
_REGULAR_END = WHITESPACE + DELIMITERS

_NUMBER_RE = re.compile(rb"[+-]?(?:\d+\.?\d*|\.\d+)")
_OBJ_HEADER_RE = re.compile(rb"(\d+)\s+(\d+)\s+obj\b")
_ESCAPES = {
    ord("n"): b"\n", ord("r"): b"\r", ord("t"): b"\t", ord("b"): b"\b",
    ord("f"): b"\f", ord("("): b"(", ord(")"): b")", ord("\\"): b"\\",
}


class _Keyword(str):
    pass


_DICT_END = _Keyword(">>")


class Lexer:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def skip_ws(self) -> None:
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos]
            if c in WHITESPACE:
                self.pos += 1
            elif c == 0x25:  # '%'
                while self.pos < n and data[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                break

    def next_token(self) -> Any:
        self.skip_ws()
        data = self.data
        if self.pos >= len(data):
            raise MalformedPdf("unexpected end of data", self.pos)
        start = self.pos
        c = data[start]
        if c == 0x2F:  # '/'
            return self._name()
        if c == 0x28:  # '('
            return self._literal_string()
        if c == 0x3C:  # '<'
            if data[start + 1:start + 2] == b"<":
                self.pos += 2
                return _Keyword("<<")
            return self._hex_string()
        if c == 0x3E:  # '>'
            if data[start + 1:start + 2] == b">":
                self.pos += 2
                return _DICT_END
            raise MalformedPdf("stray '>'", start)
        if c in b"[]{}":
            self.pos += 1
            return _Keyword(chr(c))
        if c == 0x29:
            raise MalformedPdf("unbalanced ')'", start)
        end = start
        while end < len(data) and data[end] not in _REGULAR_END:
            end += 1
        self.pos = end
        word = data[start:end]
        if _NUMBER_RE.fullmatch(word):
            if b"." in word:
                return float(word)
            return int(word)
        return _Keyword(word.decode("latin-1"))

    def _name(self) -> Name:
        data = self.data
        self.pos += 1
        out = bytearray()
        while self.pos < len(data) and data[self.pos] not in _REGULAR_END:
            c = data[self.pos]
            if c == 0x23 and self.pos + 2 < len(data):  # '#xx'
                hex_digits = data[self.pos + 1:self.pos + 3]
                try:
                    out.append(int(hex_digits, 16))
                    self.pos += 3
                    continue
                except ValueError:
                    pass
            out.append(c)
            self.pos += 1
        if not out:
            raise MalformedPdf("empty name token", self.pos)
        return Name(out.decode("latin-1"))

    def _literal_string(self) -> bytes:
        data = self.data
        start = self.pos
        self.pos += 1
        depth = 1
        out = bytearray()
        while self.pos < len(data):
            c = data[self.pos]
            if c == 0x5C:  # backslash
                self.pos += 1
                if self.pos >= len(data):
                    break
                e = data[self.pos]
                if e in _ESCAPES:
                    out += _ESCAPES[e]
                    self.pos += 1
                elif 0x30 <= e <= 0x37:
                    digits = re.match(rb"[0-7]{1,3}", data[self.pos:self.pos + 3]).group()
                    out.append(int(digits, 8) & 0xFF)
                    self.pos += len(digits)
                elif e == 0x0D:
                    self.pos += 2 if data[self.pos + 1:self.pos + 2] == b"\n" else 1
                elif e == 0x0A:
                    self.pos += 1
                else:
                    out.append(e)
                    self.pos += 1
                continue
            if c == 0x28:
                depth += 1
            elif c == 0x29:
                depth -= 1
                if depth == 0:
                    self.pos += 1
                    return bytes(out)
            out.append(c)
            self.pos += 1
        raise MalformedPdf("unterminated literal string", start)

    def _hex_string(self) -> bytes:
        start = self.pos
        end = self.data.find(b">", start)
        if end < 0:
            raise MalformedPdf("unterminated hex string", start)
        digits = bytes(b for b in self.data[start + 1:end] if b not in WHITESPACE)
        self.pos = end + 1
        if len(digits) % 2:
            digits += b"0"
        try:
            return bytes.fromhex(digits.decode("ascii"))
        except ValueError:
            raise MalformedPdf("invalid hex string", start) from None

    def parse_value(self) -> Any:
        token = self.next_token()
        return self._value_from(token)

    def _value_from(self, token: Any) -> Any:
        if isinstance(token, _Keyword):
            if token == "<<":
                return self._dict_body()
            if token == "[":
                return self._array_body()
            if token == "true":
                return True
            if token == "false":
                return False
            if token == "null":
                return None
            raise MalformedPdf(f"unexpected keyword {token!r}", self.pos - len(token))
        if isinstance(token, int) and not isinstance(token, bool) and token >= 0:
            # Look ahead for "<num> <gen> R".
            saved = self.pos
            try:
                gen = self.next_token()
                if isinstance(gen, int) and not isinstance(gen, bool) and gen >= 0:
                    r = self.next_token()
                    if r == "R" and isinstance(r, _Keyword):
                        return Ref(token, gen)
            except MalformedPdf:
                pass
            self.pos = saved
        return token

    def _dict_body(self) -> dict[str, Any]:
        result: dict[str, Any] = {}
        while True:
            token = self.next_token()
            if isinstance(token, _Keyword) and token == ">>":
                return result
            if not isinstance(token, Name):
                raise MalformedPdf(f"dictionary key must be a name, got {token!r}", self.pos)
            result[str(token)] = self.parse_value()

    def _array_body(self) -> list[Any]:
        items = []
        while True:
            token = self.next_token()
            if isinstance(token, _Keyword) and token == "]":
                return items
            items.append(self._value_from(token))


# --------------------------------------------------------------------------
# Filters needed to read xref and object streams.


def _png_unpredict(data: bytes, columns: int, colors: int = 1, bpc: int = 8) -> bytes:
    bpp = max(1, colors * bpc // 8)
    row_len = (columns * colors * bpc + 7) // 8
    out = bytearray()
    prev = bytearray(row_len)
    pos = 0
    while pos < len(data):
        ftype = data[pos]
        row = bytearray(data[pos + 1:pos + 1 + row_len])
        row.extend(b"\x00" * (row_len - len(row)))
        pos += 1 + row_len
        for i in range(row_len):
            left = row[i - bpp] if i >= bpp else 0
            up = prev[i]
            if ftype == 1:
                row[i] = (row[i] + left) & 0xFF
            elif ftype == 2:
                row[i] = (row[i] + up) & 0xFF
            elif ftype == 3:
                row[i] = (row[i] + ((left + up) >> 1)) & 0xFF
            elif ftype == 4:
                up_left = prev[i - bpp] if i >= bpp else 0
                p = left + up - up_left
                pa, pb, pc = abs(p - left), abs(p - up), abs(p - up_left)
                pred = left if pa <= pb and pa <= pc else (up if pb <= pc else up_left)
                row[i] = (row[i] + pred) & 0xFF
        out += row
        prev = row
    return bytes(out)


def decode_stream(stream: Stream, objnum: int | None = None) -> bytes:
    filters = stream.dict.get("Filter")
    params = stream.dict.get("DecodeParms")
    if filters is None:
        return stream.data
    if not isinstance(filters, list):
        filters, params = [filters], [params]
    elif not isinstance(params, list):
        params = [params] * len(filters)
    data = stream.data
    for name, parm in zip(filters, params):
        if name in (Name("FlateDecode"), Name("Fl")):
            try:
                data = zlib.decompressobj().decompress(data)
            except zlib.error as exc:
                raise MalformedPdf(f"corrupt FlateDecode stream in object {objnum}: {exc}") from None
            if isinstance(parm, dict) and int(parm.get("Predictor", 1)) >= 10:
                data = _png_unpredict(
                    data,
                    int(parm.get("Columns", 1)),
                    int(parm.get("Colors", 1)),
                    int(parm.get("BitsPerComponent", 8)),
                )
        elif name in (Name("ASCIIHexDecode"), Name("AHx")):
            digits = bytes(b for b in data.split(b">")[0] if b not in WHITESPACE)
            if len(digits) % 2:
                digits += b"0"
            data = bytes.fromhex(digits.decode("ascii"))
        else:
            raise UnsupportedConstruct(f"filter {name} on a structural stream", objnum=objnum)
    return data


# --------------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        # objnum -> ("offset", offset) | ("objstm", container, index)
        self.xref: dict[int, tuple] = {}
        self.trailer: dict[str, Any] = {}
        self.cache: dict[int, Any] = {}
        self._loading: set[int] = set()
        self.containers: set[int] = set()

    # -- cross reference -------------------------------------------------

    def read_xref_chain(self) -> None:
        tail = self.data[-2048:]
        idx = tail.rfind(b"startxref")
        if idx < 0:
            raise MalformedPdf("no startxref marker")
        lex = Lexer(self.data, len(self.data) - len(tail) + idx + len(b"startxref"))
        offset = lex.next_token()
        if not isinstance(offset, int):
            raise MalformedPdf("startxref not followed by an offset", lex.pos)
        visited: set[int] = set()
        pending = [offset]
        while pending:
            offset = pending.pop(0)
            if offset in visited:
                continue
            visited.add(offset)
            if not 0 <= offset < len(self.data):
                raise MalformedPdf("xref offset out of range", offset)
            trailer = self._read_xref_section(offset)
            for key, value in trailer.items():
                self.trailer.setdefault(key, value)
            if isinstance(trailer.get("XRefStm"), int):
                pending.insert(0, trailer["XRefStm"])
            if isinstance(trailer.get("Prev"), int):
                pending.append(trailer["Prev"])

    def _read_xref_section(self, offset: int) -> dict[str, Any]:
        lex = Lexer(self.data, offset)
        lex.skip_ws()
        if self.data.startswith(b"xref", lex.pos):
            return self._read_xref_table(lex.pos + 4)
        match = _OBJ_HEADER_RE.match(self.data, lex.pos)
        if match is None:
            raise MalformedPdf("xref offset points at neither a table nor a stream", offset)
        num = int(match.group(1))
        stream = self._parse_indirect_at(lex.pos, num)
        if not isinstance(stream, Stream) or stream.dict.get("Type") != Name("XRef"):
            raise MalformedPdf("expected an /XRef stream", offset)
        self.containers.add(num)
        self._read_xref_stream(stream, num)
        return {k: v for k, v in stream.dict.items()}

    def _read_xref_table(self, pos: int) -> dict[str, Any]:
        lex = Lexer(self.data, pos)
        while True:
            lex.skip_ws()
            if self.data.startswith(b"trailer", lex.pos):
                lex.pos += len(b"trailer")
                trailer = lex.parse_value()
                if not isinstance(trailer, dict):
                    raise MalformedPdf("trailer is not a dictionary", lex.pos)
                return trailer
            start = lex.next_token()
            count = lex.next_token()
            if not (isinstance(start, int) and isinstance(count, int)):
                raise MalformedPdf("bad xref subsection header", lex.pos)
            for i in range(count):
                off = lex.next_token()
                gen = lex.next_token()
                kind = lex.next_token()
                if not (isinstance(off, int) and isinstance(gen, int) and kind in ("n", "f")):
                    raise MalformedPdf("bad xref entry", lex.pos)
                if kind == "n":
                    self.xref.setdefault(start + i, ("offset", off))

    def _read_xref_stream(self, stream: Stream, num: int) -> None:
        widths = stream.dict.get("W")
        size = stream.dict.get("Size")
        if not isinstance(widths, list) or len(widths) != 3 or not isinstance(size, int):
            raise MalformedPdf(f"xref stream {num} lacks /W or /Size")
        index = stream.dict.get("Index", [0, size])
        data = decode_stream(stream, num)
        entry_len = sum(widths)
        pos = 0

        def field(chunk: bytes, default: int) -> int:
            return int.from_bytes(chunk, "big") if chunk else default

        for k in range(0, len(index) - 1, 2):
            first, count = index[k], index[k + 1]
            for i in range(count):
                row = data[pos:pos + entry_len]
                pos += entry_len
                if len(row) < entry_len:
                    return
                a = widths[0]
                b = a + widths[1]
                kind = field(row[:a], 1)
                f2 = field(row[a:b], 0)
                f3 = field(row[b:], 0)
                objnum = first + i
                if kind == 1:
                    self.xref.setdefault(objnum, ("offset", f2))
                elif kind == 2:
                    self.xref.setdefault(objnum, ("objstm", f2, f3))

    # -- fallback --------------------------------------------------------

    def scan_body(self) -> None:
        """Recover object offsets and trailer by a linear scan of the file."""
        self.xref = {}
        for match in _OBJ_HEADER_RE.finditer(self.data):
            # Later definitions win, as in an incremental update.
            self.xref[int(match.group(1))] = ("offset", match.start())
        trailer: dict[str, Any] = {}
        for match in re.finditer(rb"trailer\s*<<", self.data):
            lex = Lexer(self.data, match.end() - 2)
            try:
                value = lex.parse_value()
            except MalformedPdf:
                continue
            if isinstance(value, dict):
                trailer.update(value)
        self.trailer = trailer
        self.cache.clear()

    # -- objects ---------------------------------------------------------

    def _parse_indirect_at(self, offset: int, expected: int | None) -> Any:
        match = _OBJ_HEADER_RE.match(self.data, offset)
        if match is None:
            raise MalformedPdf(f"no object header for object {expected}", offset)
        lex = Lexer(self.data, match.end())
        value = lex.parse_value()
        lex.skip_ws()
        if isinstance(value, dict) and self.data.startswith(b"stream", lex.pos):
            value = self._read_stream_payload(value, lex.pos + len(b"stream"), expected)
        return value

    def _read_stream_payload(self, sdict: dict[str, Any], pos: int, objnum: int | None) -> Stream:
        data = self.data
        if data[pos:pos + 2] == b"\r\n":
            pos += 2
        elif data[pos:pos + 1] in (b"\n", b"\r"):
            pos += 1
        length = sdict.get("Length")
        if isinstance(length, Ref):
            length = self.get(length.num) if length.num != objnum else None
        payload = None
        if isinstance(length, int) and length >= 0:
            end = pos + length
            probe = Lexer(data, end)
            probe.skip_ws()
            if data.startswith(b"endstream", probe.pos):
                payload = data[pos:end]
        if payload is None:
            end = data.find(b"endstream", pos)
            if end < 0:
                raise MalformedPdf(f"unterminated stream in object {objnum}", pos)
            payload = data[pos:end]
            if payload.endswith(b"\r\n"):
                payload = payload[:-2]
            elif payload.endswith((b"\n", b"\r")):
                payload = payload[:-1]
        sdict = dict(sdict)
        sdict["Length"] = len(payload)
        return Stream(sdict, payload)

    def get(self, num: int) -> Any:
        if num in self.cache:
            return self.cache[num]
        entry = self.xref.get(num)
        if entry is None or num in self._loading:
            return None
        self._loading.add(num)
        try:
            if entry[0] == "offset":
                value = self._parse_indirect_at(entry[1], num)
            else:
                value = self._from_object_stream(entry[1], entry[2], num)
        finally:
            self._loading.discard(num)
        self.cache[num] = value
        return value

    def _from_object_stream(self, container: int, index: int, num: int) -> Any:
        stream = self.get(container)
        if not isinstance(stream, Stream):
            raise MalformedPdf(f"object {num} lives in missing object stream {container}")
        self.containers.add(container)
        data = decode_stream(stream, container)
        first = stream.dict.get("First")
        count = stream.dict.get("N")
        if not isinstance(first, int) or not isinstance(count, int):
            raise MalformedPdf(f"object stream {container} lacks /First or /N")
        header = Lexer(data[:first])
        pairs = []
        for _ in range(count):
            pairs.append((header.next_token(), header.next_token()))
        for objnum, off in pairs:
            if objnum == num:
                return Lexer(data, first + off).parse_value()
        if 0 <= index < len(pairs):
            return Lexer(data, first + pairs[index][1]).parse_value()
        raise MalformedPdf(f"object {num} not found in object stream {container}")

    def load_all(self) -> dict[int, Any]:
        objects: dict[int, Any] = {}
        for num in sorted(self.xref):
            value = self.get(num)
            if value is not None:
                objects[num] = value
        for num in sorted(self.containers):
            objects.pop(num, None)
        for num, value in list(objects.items()):
            if isinstance(value, Stream) and value.dict.get("Type") in (Name("XRef"), Name("ObjStm")):
                del objects[num]
        return objects


def parse_pdf(data: bytes) -> ObjectGraph:
    """Parse a PDF file into an object graph."""
    if not data:
        raise MalformedPdf("empty input", 0)
    header = data.find(b"%PDF-")
    if header > 0:
        # Bytes before the header shift every offset; strip them.
        data = data[header:]
    reader = _Reader(data)
    try:
        reader.read_xref_chain()
        objects = reader.load_all()
        usable = "Root" in reader.trailer and objects
    except (MalformedPdf, IndexError, ValueError):
        usable = False
    if not usable:
        reader.scan_body()
        objects = reader.load_all()
    trailer = reader.trailer
    if "Encrypt" in trailer:
        raise UnsupportedConstruct("encrypted documents are not supported", offset=data.rfind(b"/Encrypt"))
    if "Root" not in trailer:
        catalogs = [n for n, v in objects.items() if isinstance(v, dict) and v.get("Type") == Name("Catalog")]
        if not catalogs:
            raise MalformedPdf("no trailer with a /Root entry")
        trailer = dict(trailer, Root=Ref(catalogs[0], 0))
    root = trailer["Root"]
    if not isinstance(root, Ref) or not isinstance(objects.get(root.num), dict):
        raise MalformedPdf(f"/Root {root!r} does not resolve to a dictionary")
    trailer = {k: v for k, v in trailer.items() if k not in ("Prev", "XRefStm", "Type", "W", "Index",
                                                            "Filter", "DecodeParms", "Length")}
    return ObjectGraph(objects=objects, trailer=trailer, provenance=Provenance.PARSED_PDF)
