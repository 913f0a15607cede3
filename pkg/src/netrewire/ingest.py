"""Turn host-to-host event logs into an undirected communication graph."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

from .graph import Graph, GraphError, connected_components, diameter


@dataclass(frozen=True)
class LeafFilter:
    """Drop hubs whose neighbourhood is mostly degree-1 hosts (mail servers and the like).

    A node is dropped when it has at least ``min_neighbors`` neighbours and the
    fraction of them with degree 1 is at least ``leaf_fraction``.
    """

    leaf_fraction: float = 0.5
    min_neighbors: int = 5


@dataclass
class IngestReport:
    graph: Graph
    hosts: list[str]
    n: int
    m: int
    diameter: int


def _largest_component(n: int, edges: set[tuple[int, int]]) -> list[int]:
    comps = connected_components(Graph(n, edges))
    sizes = [0] * comps.count
    for c in comps.label:
        sizes[c] += 1
    # ties go to the component holding the lowest node id
    best = max(range(comps.count), key=lambda c: (sizes[c], -comps.label.index(c)))
    return [v for v in range(n) if comps.label[v] == best]


def _induced(keep: list[int], edges: set[tuple[int, int]]) -> set[tuple[int, int]]:
    idx = {v: k for k, v in enumerate(keep)}
    return {(idx[i], idx[j]) for i, j in edges if i in idx and j in idx}


def ingest_host_events(
    records: Iterable[tuple[str, str]],
    degree_cap: int = 80,
    leaf_filter: LeafFilter = LeafFilter(),
) -> IngestReport:
    """Build the reciprocated-link graph from ``(source, destination)`` records.

    Pipeline: directed host graph, keep reciprocated links as undirected edges,
    largest component, leaf-hub filter, degree cap, largest component again.
    """
    ids: dict[str, int] = {}
    directed: set[tuple[int, int]] = set()
    for src, dst in records:
        if src == dst:
            continue
        a = ids.setdefault(src, len(ids))
        b = ids.setdefault(dst, len(ids))
        directed.add((a, b))
    names = list(ids)
    edges = {(min(a, b), max(a, b)) for a, b in directed if (b, a) in directed}
    used = sorted({v for e in edges for v in e})
    if not used:
        raise GraphError("no reciprocated links in the event log")
    edges = _induced(used, edges)
    names = [names[v] for v in used]

    keep = _largest_component(len(names), edges)
    edges = _induced(keep, edges)
    names = [names[v] for v in keep]

    g = Graph(len(names), edges)
    deg = g.degrees()
    keep = []
    for v in range(g.n):
        nbrs = g.neighbors(v)
        if len(nbrs) >= leaf_filter.min_neighbors:
            leaves = sum(1 for w in nbrs if deg[w] == 1)
            if leaves / len(nbrs) >= leaf_filter.leaf_fraction:
                continue
        keep.append(v)
    edges = _induced(keep, edges)
    names = [names[v] for v in keep]

    deg = Graph(len(names), edges).degrees()
    keep = [v for v in range(len(names)) if deg[v] <= degree_cap]
    if not keep:
        raise GraphError("filters removed every host")
    edges = _induced(keep, edges)
    names = [names[v] for v in keep]

    keep = _largest_component(len(names), edges)
    edges = _induced(keep, edges)
    names = [names[v] for v in keep]
    g = Graph(len(names), edges)
    if g.m == 0:
        raise GraphError("ingested graph has no edges")
    return IngestReport(g, names, g.n, g.m, diameter(g))


def read_event_csv(path, src_col: str = "SrcDevice", dst_col: str = "DstDevice") -> Iterable[tuple[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {src_col, dst_col} - set(reader.fieldnames or ())
        if missing:
            raise GraphError(f"event log lacks columns {sorted(missing)}")
        for row in reader:
            yield row[src_col], row[dst_col]
