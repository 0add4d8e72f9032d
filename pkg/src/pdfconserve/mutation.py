"""Delete or replace every object realizing a structural path."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any

from .errors import PathAbsent
from .features import DEFAULT_DEPTH_LIMIT, Site, StructuralPath, as_path, extract_paths, walk
from .pdf.objects import ObjectGraph, Provenance, Ref, Stream, inline

DEFAULT_DONOR_TEXT = b"benign"


@dataclass(frozen=True)
class MutationOutcome:
    graph: ObjectGraph
    removed_sites: tuple[Site, ...]
    flipped: frozenset[StructuralPath]


def locate_sites(graph: ObjectGraph, path, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> list[Site]:
    """Distinct ``(object number, key chain)`` pairs whose key realizes ``path``."""
    target = as_path(path)
    sites: list[Site] = []
    seen: set[Site] = set()
    for found, site in walk(graph, depth_limit):
        if found == target and site not in seen:
            seen.add(site)
            sites.append(site)
    return sites


def _container(objects: dict[int, Any], trailer: dict[str, Any], site: Site) -> tuple[Any, str]:
    owner, chain = site
    node: Any = trailer if owner is None else objects[owner]
    for step in chain[:-1]:
        if isinstance(node, Stream):
            node = node.dict
        node = node[step]
    if isinstance(node, Stream):
        node = node.dict
    return node, chain[-1]


def _hoist_streams(value: Any, objects: dict[int, Any]) -> Any:
    """Move streams nested in a direct value into new indirect objects."""
    if isinstance(value, Stream):
        num = max(objects, default=0) + 1
        objects[num] = Stream({k: _hoist_streams(v, objects) for k, v in value.dict.items()}, value.data)
        return Ref(num, 0)
    if isinstance(value, dict):
        return {k: _hoist_streams(v, objects) for k, v in value.items()}
    if isinstance(value, list):
        return [_hoist_streams(v, objects) for v in value]
    return value


def _apply(graph: ObjectGraph, path, depth_limit: int, make_edit) -> MutationOutcome:
    target = as_path(path)
    sites = locate_sites(graph, target, depth_limit)
    if not sites:
        raise PathAbsent(f"{target} is not present in the document")
    before = extract_paths(graph, depth_limit)
    objects = copy.deepcopy(dict(graph.objects))
    trailer = copy.deepcopy(graph.trailer)
    edit = make_edit(objects)
    for site in sites:
        container, key = _container(objects, trailer, site)
        edit(container, key)
    mutated = ObjectGraph(objects=objects, trailer=trailer, provenance=Provenance.MUTATED)
    after = extract_paths(mutated, depth_limit)
    return MutationOutcome(mutated, tuple(sites), frozenset(before - after))


def delete_path(graph: ObjectGraph, path, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> MutationOutcome:
    """Remove the key at every site of ``path`` in one mutation.

    The key is dropped from its container; objects it referenced stay in the
    body as orphans.
    """

    def make_edit(objects):
        def drop(container: dict, key: str) -> None:
            del container[key]

        return drop

    return _apply(graph, path, depth_limit, make_edit)


def replace_path(graph: ObjectGraph, path, donor: Any, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> MutationOutcome:
    """Set the value at every site of ``path`` to a copy of ``donor``.

    ``donor`` should be self-contained (see :func:`select_donor`); references
    inside it are interpreted in ``graph``. Streams inside the donor are
    written once as new objects and shared by all sites.
    """

    def make_edit(objects):
        planted = _hoist_streams(copy.deepcopy(donor), objects)

        def put(container: dict, key: str) -> None:
            container[key] = copy.deepcopy(planted)

        return put

    return _apply(graph, path, depth_limit, make_edit)


def probe_dependents(graph: ObjectGraph, path, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> frozenset[StructuralPath]:
    target = as_path(path)
    return delete_path(graph, target, depth_limit).flipped - {target}


def select_donor(donor_graph: ObjectGraph, path, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> Any:
    """Pick the benign object used to replace ``path``.

    In order: the donor's own object at the same path, the first catalog
    entry (by key) that resolves to a dictionary, and finally a short benign
    text string. The result has all references inlined.
    """
    target = as_path(path)
    sites = locate_sites(donor_graph, target, depth_limit)
    if sites:
        container, key = _container(dict(donor_graph.objects), donor_graph.trailer, sites[0])
        return inline(donor_graph, container[key])
    root = donor_graph.root
    for key in sorted(root):
        value = donor_graph.resolve(root[key])
        if isinstance(value, dict) and not isinstance(value, Stream):
            return inline(donor_graph, root[key])
    return DEFAULT_DONOR_TEXT


__all__ = [
    "MutationOutcome",
    "delete_path",
    "locate_sites",
    "probe_dependents",
    "replace_path",
    "select_donor",
]
