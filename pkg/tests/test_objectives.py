import math

import numpy as np
import pytest

from conftest import complete, cycle, dense_lambda, path, star
from netrewire.generators import GeneratorSpec, generate, generate_many
from netrewire.graph import Graph, GraphError
from netrewire.objectives import (
    ObjectiveConfig, ObjectiveKind, evaluate, evaluate_many, merw_entropy, shannon_entropy,
)


def test_shannon_examples():
    assert shannon_entropy(cycle(8)) == 0.0
    expected_star = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
    assert abs(shannon_entropy(star(4)) - expected_star) < 1e-12
    assert abs(shannon_entropy(star(4)) - 0.811278) < 1e-6
    expected_path = -(2 / 3 * math.log2(2 / 3) + 1 / 3 * math.log2(1 / 3))
    assert abs(shannon_entropy(path(3)) - expected_path) < 1e-12
    assert abs(shannon_entropy(path(3)) - 0.918295) < 1e-6


def test_shannon_ignores_isolated_bin():
    g = Graph(4, [(0, 1), (1, 2), (0, 2)])
    assert shannon_entropy(g) == pytest.approx(-(0.75 * math.log2(0.75)))


def test_shannon_zero_iff_regular():
    for g in generate_many("ER", 20, 10, seed=1):
        regular = len(set(g.degrees())) == 1
        assert (shannon_entropy(g) == 0.0) == regular
        assert 0.0 <= shannon_entropy(g) <= math.log2(g.n)


def test_merw_examples():
    assert abs(merw_entropy(cycle(9)) - math.log(2)) < 1e-9
    assert abs(merw_entropy(complete(31)) - math.log(30)) < 1e-9
    g = generate(GeneratorSpec("BA", 30, {"M": 2}, seed=3))
    assert abs(merw_entropy(g) - math.log(dense_lambda(g))) < 1e-6


def test_merw_rejects_disconnected():
    with pytest.raises(GraphError):
        merw_entropy(Graph(4, [(0, 1), (2, 3)]))
    with pytest.raises(GraphError):
        evaluate(ObjectiveConfig("merw"), Graph(4, [(0, 1), (2, 3)]))


def test_evaluate_dispatch_and_scales():
    assert evaluate(ObjectiveConfig("shannon"), cycle(8)) == 0.0
    assert abs(evaluate(ObjectiveConfig(ObjectiveKind.MERW), cycle(8)) - math.log(2)) < 1e-9
    assert ObjectiveConfig("merw").reward_scale == 10.0
    assert ObjectiveConfig("shannon").reward_scale == 100.0
    with pytest.raises(ValueError):
        ObjectiveConfig("merw", reward_scale=0.0)


@pytest.mark.parametrize("model", ["BA-1", "BA-2", "WS", "ER"])
def test_merw_bounds(model):
    for g in generate_many(model, 30, 10, seed=2):
        f = merw_entropy(g)
        assert f >= math.log(2 * g.m / g.n) - 1e-8
        assert f <= math.log(g.degrees().max()) + 1e-8


def test_objectives_permutation_invariant():
    rng = np.random.default_rng(3)
    for g in generate_many("BA-2", 30, 10, seed=5):
        h = g.relabel(rng.permutation(g.n))
        assert shannon_entropy(g) == shannon_entropy(h)
        assert abs(merw_entropy(g) - merw_entropy(h)) < 1e-8


@pytest.mark.parametrize("kind", ["merw", "shannon"])
def test_evaluate_many_matches_scalar(kind):
    cfg = ObjectiveConfig(kind)
    gs = generate_many("ER", 20, 8, seed=4)
    batch = evaluate_many(cfg, np.stack([g.adjacency() for g in gs]))
    assert np.array_equal(batch, [evaluate(cfg, g) for g in gs])
    assert np.array_equal(evaluate_many(cfg, gs), batch)
