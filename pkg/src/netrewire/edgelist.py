"""Plain-text edge lists: an ``n <count>`` header, then one ``i j`` pair per line."""
from __future__ import annotations

from pathlib import Path

from .graph import Graph, GraphError


def serialize_edge_list(g: Graph) -> str:
    lines = [f"n {g.n}"]
    lines.extend(f"{i} {j}" for i, j in g.sorted_edges())
    return "\n".join(lines)


def parse_edge_list(text: str) -> Graph:
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise GraphError(f"line {lineno}: expected 'n <count>' header, got {raw!r}")
            try:
                n = int(parts[1])
            except ValueError:
                raise GraphError(f"line {lineno}: bad node count {parts[1]!r}") from None
            continue
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: non-integer node id in {raw!r}") from None
        edges.append((i, j))
    if n is None:
        raise GraphError("missing 'n <count>' header")
    return Graph(n, edges)


def write_graph(g: Graph, path) -> None:
    Path(path).write_text(serialize_edge_list(g) + "\n")


def read_graph(path) -> Graph:
    return parse_edge_list(Path(path).read_text())
