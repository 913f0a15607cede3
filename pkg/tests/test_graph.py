import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import complete, cycle, dense_lambda, path, star
from netrewire.edgelist import parse_edge_list, serialize_edge_list
from netrewire.generators import GeneratorSpec, generate, generate_many
from netrewire.graph import (
    Graph, GraphError, bridge_sides, connected_components, degree_distribution, diameter,
    is_connected, largest_eigenvalue, largest_eigenvalues,
)


def test_add_edge_basics():
    g = Graph(3).add_edge(0, 1)
    assert g.m == 1 and g.degree(0) == g.degree(1) == 1 and g.degree(2) == 0


def test_add_edge_closes_triangle():
    g = path(3).add_edge(0, 2)
    assert list(g.degrees()) == [2, 2, 2]


def test_add_edge_rejects_reverse_duplicate_and_self_loop():
    g = Graph(2, [(1, 0)])
    with pytest.raises(GraphError):
        g.add_edge(0, 1)
    with pytest.raises(GraphError):
        g.add_edge(1, 1)


def test_add_edge_leaves_original_untouched():
    g = path(3)
    g.add_edge(0, 2)
    assert g.m == 2 and not g.has_edge(0, 2)


def test_remove_edge():
    tri = complete(3)
    assert list(tri.remove_edge(0, 1).degrees()) == [1, 1, 2]
    assert connected_components(path(3).remove_edge(0, 1)).count == 2
    with pytest.raises(GraphError):
        path(3).remove_edge(0, 2)


def test_components_examples():
    assert connected_components(cycle(5)).count == 1
    two = Graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    lab = connected_components(two)
    assert lab.count == 2 and lab.label == (0, 0, 0, 1, 1, 1)
    assert connected_components(Graph(1)).count == 1


def _union_find_count(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(v) for v in range(n)})


def test_components_match_union_find_on_1000_graphs():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 25))
        p = rng.random() * 0.3
        iu, ju = np.triu_indices(n, 1)
        keep = rng.random(iu.size) < p
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
        g = Graph(n, edges)
        lab = connected_components(g)
        assert lab.count == _union_find_count(n, edges)
        assert sorted(set(lab.label)) == list(range(lab.count))
        assert is_connected(g) == (lab.count == 1)


def test_degree_distribution_examples():
    q = degree_distribution(cycle(6))
    assert q[2] == 1.0 and q.sum() == 1.0
    q = degree_distribution(star(4))
    assert q[1] == 0.75 and q[3] == 0.25
    g = generate(GeneratorSpec("BA", 30, {"M": 2}, seed=3))
    assert abs(degree_distribution(g).sum() - 1.0) < 1e-12


@pytest.mark.parametrize("n", [3, 4, 7, 30])
def test_lambda_cycle(n):
    assert abs(largest_eigenvalue(cycle(n)) - 2.0) < 1e-8


def test_lambda_complete():
    assert abs(largest_eigenvalue(complete(5)) - 4.0) < 1e-8


def test_lambda_er_matches_dense():
    g = generate(GeneratorSpec("ER", 20, {"p": 0.3}, seed=1))
    assert abs(largest_eigenvalue(g) - dense_lambda(g)) < 1e-6


def test_lambda_bipartite_converges():
    # plain power iteration oscillates on trees; the shifted iteration must not
    for g in [path(6), star(9), generate(GeneratorSpec("BA", 30, {"M": 1}, seed=4))]:
        assert abs(largest_eigenvalue(g) - dense_lambda(g)) < 1e-6


def test_lambda_batch_matches_single():
    gs = generate_many("ER", 15, 20, seed=5)
    batch = largest_eigenvalues(np.stack([g.adjacency() for g in gs]))
    single = [largest_eigenvalue(g) for g in gs]
    assert np.array_equal(batch, np.array(single))


def test_lambda_regular_and_permutation_invariant():
    rng = np.random.default_rng(0)
    ws = generate(GeneratorSpec("WS", 30, {"k": 4, "p": 0.0}))
    assert abs(largest_eigenvalue(ws) - 4.0) < 1e-8
    for g in generate_many("BA-2", 25, 5, seed=9):
        perm = rng.permutation(g.n)
        h = g.relabel(perm)
        assert abs(largest_eigenvalue(g) - largest_eigenvalue(h)) < 1e-8
        assert np.array_equal(degree_distribution(g), degree_distribution(h))


def test_generator_examples():
    ba = generate(GeneratorSpec("BA", 30, {"M": 1}, seed=11))
    assert ba.m == 29 and is_connected(ba)
    assert generate(GeneratorSpec("BA", 30, {"M": 2}, seed=0)).m == 57
    ws = generate(GeneratorSpec("WS", 30, {"k": 4, "p": 0.0}, seed=2))
    assert ws.m == 60 and set(ws.degrees()) == {4}
    er = generate(GeneratorSpec("ER", 30, {"p": 0.15}, seed=7))
    assert is_connected(er) and 30 <= er.m <= 100


def test_er_edge_count_range_over_seeds():
    # empirical range of connected G(30, 0.15) edge counts, sampled directly
    ms = [generate(GeneratorSpec("ER", 30, {"p": 0.15}, seed=s)).m for s in range(1000)]
    assert 30 <= min(ms) and max(ms) <= 100


@pytest.mark.parametrize("model", ["BA-1", "BA-2", "WS", "ER"])
def test_generators_connected_simple_deterministic(model):
    a = generate_many(model, 30, 10, seed=21)
    b = generate_many(model, 30, 10, seed=21)
    assert a == b
    for g in a:
        assert g.n == 30 and is_connected(g)


def test_generator_spec_validation():
    with pytest.raises(GraphError):
        GeneratorSpec("WS", 10, {"k": 3, "p": 0.1})
    with pytest.raises(GraphError):
        GeneratorSpec("WS", 4, {"k": 4, "p": 0.1})
    with pytest.raises(GraphError):
        GeneratorSpec("ER", 10, {"p": 1.5})


def test_generator_gives_up():
    with pytest.raises(GraphError):
        generate(GeneratorSpec("ER", 30, {"p": 0.0}, seed=0))


def test_edge_list_format():
    assert serialize_edge_list(complete(3)) == "n 3\n0 1\n0 2\n1 2"
    for g in generate_many("ER", 20, 5, seed=3):
        assert parse_edge_list(serialize_edge_list(g)) == g
    for bad in ["n 2\n0 0", "n 2\n0 2", "n 3\n0", "0 1", "n 3\n0 x"]:
        with pytest.raises(GraphError):
            parse_edge_list(bad)


def test_bridge_sides_match_bruteforce():
    for g in generate_many("BA-1", 12, 3, seed=1) + generate_many("BA-2", 12, 3, seed=1):
        sides = bridge_sides(g)
        for u, v in g.edges:
            h = g.remove_edge(u, v)
            assert ((u, v) in sides) == (not is_connected(h))


def test_diameter():
    assert diameter(path(5)) == 4
    assert diameter(cycle(6)) == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 12), st.data())
def test_relabel_invariance_property(n, data):
    edges = data.draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                              .filter(lambda e: e[0] < e[1]), min_size=1))
    g = Graph(n, edges)
    perm = data.draw(st.permutations(range(n)))
    h = g.relabel(perm)
    assert int(g.degrees().sum()) == 2 * g.m
    assert np.array_equal(degree_distribution(g), degree_distribution(h))
    if is_connected(g):
        assert abs(largest_eigenvalue(g) - largest_eigenvalue(h)) < 1e-8
