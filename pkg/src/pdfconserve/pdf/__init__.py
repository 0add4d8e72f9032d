"""PDF object model: parsing, JSON interchange and single-revision repacking."""

from .jsonio import dump_graph_json, graph_to_json, load_graph_json
from .objects import Name, ObjectGraph, Provenance, Ref, Stream, inline, resolve
from .parser import parse_pdf
from .writer import serialize_pdf

__all__ = [
    "Name",
    "ObjectGraph",
    "Provenance",
    "Ref",
    "Stream",
    "dump_graph_json",
    "graph_to_json",
    "inline",
    "load_graph_json",
    "parse_pdf",
    "resolve",
    "serialize_pdf",
]
