"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PdfConserveError(Exception):
    """Base class for every error raised by this package."""


class MalformedPdf(PdfConserveError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class UnsupportedConstruct(PdfConserveError):
    def __init__(self, message: str, offset: int | None = None, objnum: int | None = None):
        self.offset = offset
        self.objnum = objnum
        where = []
        if offset is not None:
            where.append(f"byte offset {offset}")
        if objnum is not None:
            where.append(f"object {objnum}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class SchemaViolation(PdfConserveError):
    def __init__(self, message: str, path: str = "$"):
        self.path = path
        super().__init__(f"{path}: {message}")


class SerializationFailure(PdfConserveError):
    pass


class PathAbsent(PdfConserveError):
    pass


class OracleError(PdfConserveError):
    TIMEOUT = "Timeout"
    PROTOCOL_VIOLATION = "ProtocolViolation"
    PARSE_FAILURE = "ParseFailure"

    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}" if detail else kind)


class SeedNotMalicious(PdfConserveError):
    pass


class DegenerateData(PdfConserveError):
    pass


class SpaceMismatch(PdfConserveError):
    pass


class ConfigError(PdfConserveError):
    pass
