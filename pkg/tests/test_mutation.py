from __future__ import annotations

import pytest

from pdfconserve import fixtures
from pdfconserve.errors import PathAbsent
from pdfconserve.features import path_strings
from pdfconserve.mutation import (
    DEFAULT_DONOR_TEXT,
    delete_path,
    locate_sites,
    probe_dependents,
    replace_path,
    select_donor,
)
from pdfconserve.pdf import Name, Stream, serialize_pdf


def names(paths):
    return {str(p) for p in paths}


def test_locate_sites_examples():
    assert locate_sites(fixtures.openaction_js(), "/OpenAction") == [(1, ("OpenAction",))]
    assert len(locate_sites(fixtures.duplicated_kids(), "/Pages/Kids")) == 2
    assert locate_sites(fixtures.minimal(), "/OpenAction") == []


def test_delete_examples():
    out = delete_path(fixtures.openaction_js(), "/OpenAction")
    assert {"/OpenAction", "/OpenAction/S", "/OpenAction/JS"} <= names(out.flipped)
    assert names(delete_path(fixtures.minimal(), "/Pages").flipped) >= {"/Pages"}
    with pytest.raises(PathAbsent):
        delete_path(fixtures.minimal(), "/OpenAction")


def test_delete_pages_on_minimal_flips_subtree():
    # Pages is an interior node here, so its whole subtree goes with it.
    flipped = names(delete_path(fixtures.minimal(), "/Pages").flipped)
    assert flipped == {p for p in path_strings(fixtures.minimal()) if p.startswith("/Pages")}


def test_delete_does_not_touch_input():
    g = fixtures.duplicated_payload()
    before = serialize_pdf(g)
    delete_path(g, "/OpenAction/JS")
    assert serialize_pdf(g) == before


def test_delete_removes_every_site():
    out = delete_path(fixtures.duplicated_payload(), "/OpenAction/JS")
    assert len(out.removed_sites) == 2
    assert locate_sites(out.graph, "/OpenAction/JS") == []


def test_replace_examples():
    g = fixtures.openaction_js()
    out = replace_path(g, "/OpenAction/JS", b"(benign)")
    assert "/OpenAction/JS" in path_strings(out.graph)
    assert out.graph.root["OpenAction"]["JS"] == b"(benign)"
    assert serialize_pdf(out.graph) != serialize_pdf(g)
    same = replace_path(g, "/OpenAction", g.root["OpenAction"])
    assert same.flipped == frozenset()
    assert path_strings(same.graph) == path_strings(g)
    with pytest.raises(PathAbsent):
        replace_path(g, "/Names", b"x")


def test_replacement_hoists_donor_streams():
    donor = fixtures.seed_a2()
    value = select_donor(donor, "/OpenAction")
    assert isinstance(value["JS"], Stream)
    out = replace_path(fixtures.openaction_js(), "/OpenAction", value)
    serialize_pdf(out.graph)  # a direct stream would raise here
    assert "/OpenAction/JS" in path_strings(out.graph)


def test_select_donor_fallback_chain():
    assert select_donor(fixtures.benign_donor(), "/OpenAction")["S"] == Name("GoTo")
    fallback = select_donor(fixtures.benign_donor(), "/Names/JavaScript")
    assert isinstance(fallback, dict)
    assert select_donor(fixtures.empty_catalog(), "/Anything") == DEFAULT_DONOR_TEXT


def test_probe_dependents_examples():
    assert names(probe_dependents(fixtures.openaction_js(), "/OpenAction")) == {"/OpenAction/S", "/OpenAction/JS"}
    assert probe_dependents(fixtures.openaction_js(), "/OpenAction/JS") == frozenset()
    deps = names(probe_dependents(fixtures.names_js(), "/Names"))
    assert {"/Names/JavaScript", "/Names/JavaScript/Names", "/Names/JavaScript/Names/JS"} <= deps
    assert "/Names" not in deps


def test_shared_subtree_survives_partial_delete():
    # /Pages/Kids/Type is realized by both Pages objects; deleting one chain's Kids
    # would not remove it, but deleting the path removes every site.
    g = fixtures.duplicated_kids()
    out = delete_path(g, "/Pages/Kids")
    assert "/Pages/Kids" in names(out.flipped)
    assert "/Pages/Type" not in names(out.flipped)
