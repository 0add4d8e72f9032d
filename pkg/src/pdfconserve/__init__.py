"""Conserved-feature analysis for PDF malware classifiers.

Find the structural features a malicious PDF cannot lose without losing its
payload, and use them to harden linear detectors against evasion.
"""

from .errors import PdfConserveError
from .features import FeatureKind, FeatureSpace, FeatureVector, StructuralPath
from .pdf import ObjectGraph, load_graph_json, parse_pdf, serialize_pdf

__version__ = "0.1.0"

__all__ = [
    "FeatureKind",
    "FeatureSpace",
    "FeatureVector",
    "ObjectGraph",
    "PdfConserveError",
    "StructuralPath",
    "load_graph_json",
    "parse_pdf",
    "serialize_pdf",
]
