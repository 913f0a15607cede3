import pytest

from netrewire.graph import GraphError, is_connected
from netrewire.ingest import LeafFilter, ingest_host_events, read_event_csv


def both_ways(pairs):
    out = []
    for a, b in pairs:
        out += [(a, b), (b, a)]
    return out


def test_only_reciprocated_links_survive():
    records = both_ways([("a", "b"), ("b", "c"), ("c", "a")]) + [("a", "d"), ("d", "e")]
    rep = ingest_host_events(records)
    assert sorted(rep.hosts) == ["a", "b", "c"]
    assert rep.m == 3 and rep.diameter == 1


def test_self_loops_and_duplicates_ignored():
    records = both_ways([("a", "b"), ("b", "c")]) * 3 + [("a", "a")]
    rep = ingest_host_events(records)
    assert rep.n == 3 and rep.m == 2


def test_largest_component_kept():
    records = both_ways([("a", "b"), ("b", "c"), ("x", "y")])
    rep = ingest_host_events(records)
    assert set(rep.hosts) == {"a", "b", "c"}


def test_leaf_hub_dropped():
    # hub h serves six single-use clients and also joins a ring
    ring = [("r0", "r1"), ("r1", "r2"), ("r2", "r3"), ("r3", "r0"), ("h", "r0")]
    clients = [("h", f"c{i}") for i in range(6)]
    rep = ingest_host_events(both_ways(ring + clients))
    assert "h" not in rep.hosts and rep.n == 4
    kept = ingest_host_events(both_ways(ring + clients), leaf_filter=LeafFilter(min_neighbors=50))
    assert "h" in kept.hosts and kept.n == 11


def test_degree_cap():
    star = [("s", f"v{i}") for i in range(10)]
    ring = [(f"v{i}", f"v{(i + 1) % 10}") for i in range(10)]
    rep = ingest_host_events(both_ways(star + ring), degree_cap=9)
    assert "s" not in rep.hosts and rep.n == 10 and is_connected(rep.graph)
    assert max(rep.graph.degrees()) <= 9


def test_empty_log_rejected():
    with pytest.raises(GraphError):
        ingest_host_events([("a", "b")])


def test_read_event_csv(tmp_path):
    p = tmp_path / "events.csv"
    p.write_text("Time,SrcDevice,DstDevice\n1,a,b\n2,b,a\n3,b,c\n4,c,b\n")
    rep = ingest_host_events(read_event_csv(p))
    assert rep.n == 3 and rep.m == 2 and rep.diameter == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(GraphError):
        list(read_event_csv(bad))
