import numpy as np
import pytest

from gdpref.graphs import Graph
from gdpref.labels import LabelRecord, LabelStore
from gdpref.layouts import ALGORITHMS
from gdpref.rng import child_rng

IDENTITY = tuple(range(8))


def make_record(graph_id, annotator_id, choice, display_order=IDENTITY, duration_ms=1000, hard=False, timestamp="2026-01-01T00:00:00Z"):
    return LabelRecord(
        graph_id=graph_id,
        annotator_id=annotator_id,
        choice=choice,
        display_order=display_order,
        duration_ms=duration_ms,
        hard=hard,
        timestamp=timestamp,
    )


def make_store(choices):
    """choices: {annotator_id: {graph_id: algorithm}}."""
    store = LabelStore()
    for aid, by_graph in choices.items():
        for gid, alg in by_graph.items():
            store.add(make_record(gid, aid, alg))
    return store


def random_store(seed, n_annotators, n_graphs):
    rng = child_rng(seed, "test-store")
    choices = {}
    for a in range(n_annotators):
        aid = f"a{a}"
        choices[aid] = {}
        for g in range(n_graphs):
            if rng.random() < 0.8:  # not every annotator labels every graph
                choices[aid][f"g{g}"] = ALGORITHMS[int(rng.integers(8))]
    return make_store(choices)


def random_connected_graph(rng, n_min=4, n_max=8, graph_id="g"):
    n = int(rng.integers(n_min, n_max + 1))
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.add((u, v))
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        u, v = int(rng.integers(n)), int(rng.integers(n))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return Graph(id=graph_id, n=n, edges=tuple(sorted(edges)))


@pytest.fixture
def p3():
    return Graph(id="p3", n=3, edges=((0, 1), (1, 2)))


@pytest.fixture
def k3():
    return Graph(id="k3", n=3, edges=((0, 1), (0, 2), (1, 2)))


@pytest.fixture
def c4():
    return Graph(id="c4", n=4, edges=((0, 1), (0, 3), (1, 2), (2, 3)))


@pytest.fixture
def k4():
    return Graph(id="k4", n=4, edges=((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)))


def assert_simplex(q):
    assert np.all(q >= 0)
    assert abs(q.sum() - 1.0) < 1e-12
