import numpy as np
import pytest
from hypothesis import given, strategies as st

from sandpile_tcl.errors import BadSink, DisconnectedGraph, GraphError, NotIntegerNetwork, SelfLoop
from sandpile_tcl.generators import random_sandpile
from sandpile_tcl.graph import (bipartition, build_graph, check_embedding, grid, grid_label,
                                grid_vertex, grounded_laplacian, honeycomb, laplacian, line,
                                ordinary_connected, ordinary_component, triangular)


def test_build_rejects_bad_input():
    with pytest.raises(SelfLoop):
        build_graph([(0, 0)], 1, vertex_count=2)
    with pytest.raises(BadSink):
        build_graph([(0, 1)], 5)
    with pytest.raises(DisconnectedGraph):
        build_graph([(0, 1)], 1, vertex_count=3)
    with pytest.raises(GraphError):
        build_graph([(0, 1, 0)], 1)


def test_multiplicities_accumulate():
    g = build_graph([(0, 1), (1, 0, 2), (1, 2)], 2)
    assert g.adjacency[(0, 1)] == 3
    assert list(g.degree) == [3, 4, 1]
    assert g.edge_count == 4


def test_ordinary_connected_examples():
    assert ordinary_connected(grid(4))
    # two triangles glued only at the sink
    g = build_graph([(0, 1), (0, 4), (1, 4), (2, 3), (2, 4), (3, 4)], 4)
    assert not ordinary_connected(g)
    assert ordinary_component(g, 0) == {0, 1}


@pytest.mark.parametrize("n", [2, 3, 4, 7, 16, 32])
def test_grid_degrees(n):
    g = grid(n)
    assert g.n_ordinary == n * n
    assert g.sink == n * n
    assert (g.ordinary_degree == 4).all()
    assert g.degree[g.sink] == 4 * n
    assert g.edge_count == 2 * n * (n - 1) + 4 * n


def test_grid_small_cases():
    g2 = grid(2)
    assert g2.degree[g2.sink] == 8
    g3 = grid(3)
    assert not g3.is_sink_adjacent(grid_vertex(3, 2, 2))
    assert grid_label(5, grid_vertex(5, 3, 4)) == (3, 4)


def test_lattice_patches():
    h1 = honeycomb(1)
    assert h1.n_ordinary == 6 and (h1.ordinary_degree == 3).all()
    h2 = honeycomb(2)
    assert (h2.ordinary_degree == 3).all()
    assert any(not h2.is_sink_adjacent(int(v)) for v in h2.ordinary)
    t1 = triangular(1)
    assert t1.n_ordinary == 7 and (t1.ordinary_degree == 6).all()
    centre = [int(v) for v in t1.ordinary if not t1.is_sink_adjacent(int(v))]
    assert len(centre) == 1 and len(t1.neighbors[centre[0]]) == 6


def test_laplacian_small():
    g = build_graph([(0, 1)], 1)
    assert grounded_laplacian(g).toarray().tolist() == [[1.0]]
    p = build_graph([(0, 1), (1, 2)], 2)
    assert grounded_laplacian(p).toarray().tolist() == [[1, -1], [-1, 2]]
    assert np.allclose(np.diag(grounded_laplacian(grid(2)).toarray()), 4)
    L = laplacian(grid(3)).toarray()
    assert np.allclose(L, L.T) and np.allclose(L.sum(axis=1), 0)


BUILDERS = [grid(2), grid(5), grid(16), honeycomb(1), honeycomb(3), triangular(1), triangular(3),
            line(1), line(6)]


@pytest.mark.parametrize("g", BUILDERS)
def test_builder_invariants(g):
    assert int(g.degree.sum()) == 2 * g.edge_count
    lam = np.linalg.eigvalsh(grounded_laplacian(g).toarray())
    assert lam.min() > 0
    if g.embedding is not None:
        faces = check_embedding(g, g.embedding)
        assert g.vertex_count - g.edge_count + faces == 2


def test_bipartition_honeycomb():
    g = honeycomb(2)
    col = bipartition(g)
    for (u, v) in g.adjacency:
        if g.sink not in (u, v):
            assert col[u] != col[v]


def test_conductance_network_rejected_for_dynamics():
    g = build_graph([(0, 1), (1, 2)], 2, conductances={(0, 1): 0.5})
    assert not g.is_integer_network
    with pytest.raises(NotIntegerNetwork):
        g.require_integer()


@given(st.integers(0, 10**6))
def test_random_generator_valid(seed):
    g = random_sandpile(seed)
    assert ordinary_connected(g)
    assert len(g.boundary) >= 1
    assert int(g.degree.sum()) == 2 * g.edge_count


@given(st.integers(0, 10**6), st.integers(2, 5))
def test_random_generator_degree_cap(seed, cap):
    g = random_sandpile(seed, max_degree=cap)
    assert g.max_degree <= cap
