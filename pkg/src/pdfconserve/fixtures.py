"""Synthetic PDF corpus with known conserved features.

Malicious seeds carry JavaScript payloads under ``/OpenAction/JS`` or
``/Names/JavaScript/Names/JS`` (plus one XFA form payload), surrounded by
decoy structure that a classifier might latch onto. With
:func:`default_rules` as the oracle, running the pipeline at beta = 3 over
:func:`malicious_seeds` yields exactly :data:`EXPECTED_UNIFORM_SL2013`.
"""

from __future__ import annotations

from typing import Any

from .oracle import ContainsToken, RuleOracle, SignatureRule
from .pdf.objects import Name, ObjectGraph, Provenance, Ref, Stream
from .pipeline import SeedRecord

N = Name
PAYLOAD_TOKEN = b"app."

EXPECTED_UNIFORM_SL2013 = frozenset({
    "/Names",
    "/Names/JavaScript",
    "/Names/JavaScript/Names",
    "/Names/JavaScript/Names/JS",
    "/OpenAction",
    "/OpenAction/JS",
})

# Present in the corpus but never conserved.
DECOY_PATHS = frozenset({
    "/AcroForm",
    "/AcroForm/Fields",
    "/AcroForm/XFA",
    "/Metadata",
    "/Names/Dests",
    "/Names/JavaScript/Names/S",
    "/OpenAction/S",
    "/Outlines",
    "/Outlines/Count",
    "/PageMode",
    "/Pages",
    "/Pages/Kids",
    "/Type",
})

# Which conserved features touch JavaScript, mirroring the relevance column of
# the published table.
JAVASCRIPT_RELEVANT = {
    "/Names": False,
    "/Names/JavaScript": True,
    "/Names/JavaScript/Names": True,
    "/Names/JavaScript/Names/JS": True,
    "/OpenAction": False,
    "/OpenAction/JS": True,
}

EXPECTED_PDFRATE_B_SUBSET = frozenset({"count_javascript", "count_js"})


def build(objects: dict[int, Any], root: int = 1, **trailer: Any) -> ObjectGraph:
    return ObjectGraph(objects=objects, trailer={"Root": Ref(root, 0), **trailer}, provenance=Provenance.LOADED_JSON)


def _page_tree(first: int, n_pages: int = 1, boxes: bool = False) -> dict[int, Any]:
    """Pages object at ``first``; pages follow."""
    kids = [Ref(first + 1 + i, 0) for i in range(n_pages)]
    out: dict[int, Any] = {first: {"Type": N("Pages"), "Kids": kids, "Count": n_pages}}
    for i, ref in enumerate(kids):
        page = {"Type": N("Page"), "Parent": Ref(first, 0), "MediaBox": [0, 0, 612, 792]}
        if boxes:
            page["CropBox"] = [0, 0, 600, 780]
        out[ref.num] = page
    return out


def js_action(code: bytes) -> dict[str, Any]:
    return {"S": N("JavaScript"), "JS": code}


def minimal() -> ObjectGraph:
    """Catalog -> Pages -> Page."""
    return build({1: {"Type": N("Catalog"), "Pages": Ref(2, 0)}, **_page_tree(2)})


def openaction_js(code: bytes = b"app.alert(1)") -> ObjectGraph:
    """Payload reachable only via /OpenAction/JS (direct action dictionary)."""
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "OpenAction": js_action(code)},
        **_page_tree(2),
    })


def names_js(code: bytes = b"app.launchURL('http://x.test')") -> ObjectGraph:
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0),
            "Names": {"JavaScript": {"Names": [b"init", Ref(4, 0)]}}},
        **_page_tree(2),
        4: js_action(code),
    })


def empty_catalog() -> ObjectGraph:
    return build({1: {}})


def pages_loop() -> ObjectGraph:
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0)},
        2: {"Type": N("Pages"), "Kids": [Ref(2, 0)], "Count": 1},
    })


def three_pages() -> ObjectGraph:
    return build({1: {"Type": N("Catalog"), "Pages": Ref(2, 0)}, **_page_tree(2, 3)})


def duplicated_payload() -> ObjectGraph:
    """/OpenAction/JS realized at two sites; both must go for the payload to die."""
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0),
            "OpenAction": [js_action(b"app.alert('one')"), Ref(4, 0)]},
        **_page_tree(2),
        4: js_action(b"app.alert('two')"),
    })


def duplicated_kids() -> ObjectGraph:
    """/Pages/Kids realized by two Pages objects reached through one array."""
    return build({
        1: {"Type": N("Catalog"), "Pages": [Ref(2, 0), Ref(4, 0)]},
        2: {"Type": N("Pages"), "Kids": [Ref(3, 0)], "Count": 1},
        3: {"Type": N("Page"), "Parent": Ref(2, 0)},
        4: {"Type": N("Pages"), "Kids": [Ref(5, 0)], "Count": 1},
        5: {"Type": N("Page"), "Parent": Ref(4, 0)},
    })


def dangling_reference() -> ObjectGraph:
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "Outlines": Ref(99, 0)},
        **_page_tree(2),
    })


def reference_chain() -> ObjectGraph:
    """Object 4 holds only a reference to object 5."""
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "Metadata": Ref(4, 0)},
        **_page_tree(2),
        4: Ref(5, 0),
        5: Stream({"Type": N("Metadata"), "Subtype": N("XML")}, b"<x:xmpmeta/>"),
    })


# --------------------------------------------------------------------------
# The corpus used for the end-to-end reproduction.


def _acroform() -> dict[str, Any]:
    return {"Fields": []}


def seed_a1() -> ObjectGraph:
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "PageMode": N("UseOutlines"),
            "Outlines": Ref(4, 0), "AcroForm": _acroform(),
            "OpenAction": js_action(b"app.alert('a1')")},
        **_page_tree(2, boxes=True),
        4: {"Type": N("Outlines"), "Count": 0},
    })


def seed_a2() -> ObjectGraph:
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "OpenAction": Ref(4, 0),
            "AcroForm": _acroform(), "Metadata": Ref(6, 0)},
        **_page_tree(2),
        4: {"S": N("JavaScript"), "JS": Ref(5, 0)},
        5: Stream({}, b"var x = 1; app.alert(x);"),
        6: Stream({"Type": N("Metadata"), "Subtype": N("XML")}, b"<x:xmpmeta/>"),
    })


def seed_a3() -> ObjectGraph:
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "AcroForm": _acroform(),
            "OpenAction": {"S": N("JavaScript"), "JS": Ref(4, 0)},
            "Names": {"Dests": Ref(5, 0)}},
        **_page_tree(2, n_pages=2),
        4: Stream({}, b"app.setTimeOut('go()', 10);"),
        5: {"Names": [b"intro", [Ref(3, 0), N("Fit")]]},
    })


def seed_b1() -> ObjectGraph:
    return names_js(b"app.launchURL('http://b1.test')")


def seed_b2() -> ObjectGraph:
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "Names": Ref(4, 0), "Outlines": Ref(7, 0)},
        **_page_tree(2),
        4: {"JavaScript": Ref(5, 0)},
        5: {"Names": [b"a", Ref(6, 0)]},
        6: {"S": N("JavaScript"), "JS": Ref(8, 0)},
        7: {"Type": N("Outlines"), "Count": 0},
        8: Stream({}, b"app.alert('b2')"),
    })


def seed_x1() -> ObjectGraph:
    """Payload in an XFA form rather than JavaScript actions."""
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0),
            "AcroForm": {"Fields": [], "XFA": Ref(4, 0)}},
        **_page_tree(2),
        4: Stream({}, b"<xdp><script>app.alert('xfa')</script></xdp>"),
    })


def seed_c1() -> ObjectGraph:
    """Both JavaScript routes at once: no single deletion disarms it."""
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "AcroForm": _acroform(),
            "OpenAction": js_action(b"app.alert('c1')"),
            "Names": {"JavaScript": {"Names": [b"c", Ref(4, 0)]}}},
        **_page_tree(2),
        4: js_action(b"app.alert('c1 again')"),
    })


def benign_donor() -> ObjectGraph:
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0), "Outlines": Ref(4, 0),
            "OpenAction": {"S": N("GoTo"), "D": [Ref(3, 0), N("Fit")]}},
        **_page_tree(2),
        4: {"Type": N("Outlines"), "Count": 0},
    })


def poisoned_donor() -> ObjectGraph:
    """A "benign" donor whose /OpenAction carries a live payload."""
    return build({
        1: {"Type": N("Catalog"), "Pages": Ref(2, 0),
            "OpenAction": js_action(b"app.alert('donor')")},
        **_page_tree(2),
    })


def clean_documents() -> list[ObjectGraph]:
    return [minimal(), three_pages(), benign_donor(), reference_chain()]


SEED_BUILDERS = {
    "a1": seed_a1,
    "a2": seed_a2,
    "a3": seed_a3,
    "b1": seed_b1,
    "b2": seed_b2,
    "c1": seed_c1,
    "x1": seed_x1,
}


def malicious_seeds() -> list[SeedRecord]:
    return [SeedRecord(name, build_fn()) for name, build_fn in SEED_BUILDERS.items()]


def default_rules() -> list[SignatureRule]:
    token = ContainsToken(PAYLOAD_TOKEN)
    return [
        SignatureRule("js-openaction", "/OpenAction/JS", token),
        SignatureRule("js-names", "/Names/JavaScript/Names/JS", token),
        SignatureRule("xfa-script", "/AcroForm/XFA", token),
    ]


def default_oracle() -> RuleOracle:
    return RuleOracle(default_rules())


def all_fixtures() -> dict[str, ObjectGraph]:
    """Every shipped document, keyed by name."""
    named = {
        "minimal": minimal(),
        "openaction_js": openaction_js(),
        "names_js": names_js(),
        "empty_catalog": empty_catalog(),
        "pages_loop": pages_loop(),
        "three_pages": three_pages(),
        "duplicated_payload": duplicated_payload(),
        "duplicated_kids": duplicated_kids(),
        "dangling_reference": dangling_reference(),
        "reference_chain": reference_chain(),
        "benign_donor": benign_donor(),
        "poisoned_donor": poisoned_donor(),
    }
    named.update({f"seed_{k}": fn() for k, fn in SEED_BUILDERS.items()})
    return named
