import numpy as np
import pytest

from sandpile_tcl import harmonic, planar as P
from sandpile_tcl.errors import Disconnecting, NonPlanarEmbedding
from sandpile_tcl.graph import PlanarEmbedding, build_graph, grid, grid_vertex, line


def triangle():
    return P.from_points([(0, 0), (1, 0), (0, 1)], [(0, 1), (1, 2), (0, 2)])


def bond(k):
    """Two vertices joined by ``k`` parallel unit edges."""
    edges = tuple(P.Edge(0, 1) for _ in range(k))
    rot = (tuple((e, 0) for e in range(k)), tuple((e, 1) for e in reversed(range(k))))
    net = P.PlanarNetwork(2, edges, rot)
    net.validate()
    return net


def cycle(k):
    pts = [(np.cos(2 * np.pi * i / k), np.sin(2 * np.pi * i / k)) for i in range(k)]
    return P.from_points(pts, [(i, (i + 1) % k) if i + 1 < k else (0, k - 1) for i in range(k)])


def test_triangle_dual():
    d = P.dualize(triangle()).network
    assert d.vertex_count == 2 and len(d.edges) == 3
    assert all({e.a, e.b} == {0, 1} for e in d.edges)
    rd = P.restricted_dual(triangle(), 0)
    assert rd.network.vertex_count == 2 and len(rd.network.edges) == 2


def test_grid_dual_counts_and_involution():
    for n in (2, 3, 5):
        net = P.from_sandpile(grid(n))
        d = P.dualize(net)
        assert len(d.network.edges) == len(net.edges)
        assert net.vertex_count - len(net.edges) + d.network.vertex_count == 2
        dd = P.dualize(d.network)
        assert dd.network.vertex_count == net.vertex_count


def test_bad_rotation_rejected():
    edges = (P.Edge(0, 1), P.Edge(1, 2))
    with pytest.raises(NonPlanarEmbedding):
        P.PlanarNetwork(3, edges, (((0, 0),), ((0, 1),), ((1, 1),))).validate()


def test_loop_dual_is_rejected():
    # a primal bridge dualizes to a loop
    net = P.from_points([(0, 0), (1, 0)], [(0, 1)])
    with pytest.raises(ValueError):
        P.restricted_dual(net, 0)


def test_dual_bridge_is_disconnecting():
    # a primal loop's dual edge separates the loop's inside from the rest
    edges = (P.Edge(0, 1), P.Edge(0, 0), P.Edge(0, 1))
    rot = (((0, 0), (1, 0), (1, 1), (2, 0)), ((2, 1), (0, 1)))
    net = P.PlanarNetwork(2, edges, rot)
    net.validate()
    with pytest.raises(Disconnecting):
        P.restricted_dual(net, 1)


def test_spectral_decomposition_invariants():
    rd = P.restricted_dual(P.from_sandpile(grid(3)), P.sink_edge_ids(grid(3))[0])
    sd = P.SpectralDecomposition.of(rd.network)
    L = rd.network.laplacian().toarray()
    psi, lam = sd.eigenvectors, sd.eigenvalues
    assert np.allclose(L @ psi, psi * lam, atol=1e-9)
    assert np.allclose(psi.T @ psi, np.eye(len(lam)), atol=1e-10)
    assert abs(lam[0]) < 1e-9 and lam[1] > 1e-9
    assert np.allclose(np.abs(psi[:, 0]), 1 / np.sqrt(len(lam)))


def test_series_and_parallel_currents():
    rd = P.restricted_dual(bond(5), 0)
    cur = P.edge_currents(rd, "direct")
    assert np.allclose(np.abs(cur), 1.0)
    # the dual of a 5-cycle is a 5-bond; four parallel edges remain
    rd = P.restricted_dual(cycle(5), 0)
    for k, e in enumerate(rd.network.edges):
        assert P.eigen_current(rd, e.a, e.b) == pytest.approx(0.25, rel=1e-10)
    assert P.eigen_current(rd, 0, 0) == 0.0


@pytest.mark.parametrize("n", [2, 3, 5])
def test_eigen_matches_direct_on_grid_duals(n):
    g = grid(n)
    net = P.from_sandpile(g)
    dual = P.dualize(net)
    for e in P.sink_edge_ids(g):
        rd = P.restricted_dual(net, e, dual)
        a, b = P.edge_currents(rd, "eigen"), P.edge_currents(rd, "direct")
        assert np.allclose(a, b, rtol=1e-8, atol=1e-12 * np.abs(b).max())


@pytest.mark.parametrize("seed", range(5))
def test_kirchhoff_laws_random(seed):
    net = P.random_planar_network(seed)
    rd = P.restricted_dual(net, seed)
    assert P.loop_law_residual(rd) <= 1e-9
    assert np.allclose(P.cut_flows(rd), 1.0, atol=1e-9)
    assert P.loop_law_residual(rd, "eigen") <= 1e-9


def test_dual_current_equals_primal_potential():
    g = grid(3)
    net = P.from_sandpile(g)
    dual = P.dualize(net)
    slots = g.edge_slots()
    for e in P.sink_edge_ids(g):
        w = slots[e][0]
        pot = harmonic.solve_potential(g, w)
        for k, i in P.dual_sink_currents(g, net, dual, e, "direct").items():
            assert i == pytest.approx(pot.at(slots[k][0]), rel=1e-8)


def test_planar_bound_triangle_sandpile():
    g = build_graph([(0, 1), (0, 2), (1, 2)], 2, embedding=PlanarEmbedding(((0, 1), (2, 0), (1, 2))))
    b = P.planar_tcl_bound(g)
    assert b.value == pytest.approx(harmonic.tcl_upper_estimate(g).relaxed, rel=1e-10)


def test_planar_bound_grid4():
    g = grid(4)
    b = P.planar_tcl_bound(g)
    assert b.relative_gap <= 1e-6
    assert b.value == pytest.approx(harmonic.tcl_upper_estimate(g).relaxed, rel=1e-6)


def test_planar_bound_single_face():
    g = line(2)
    b = P.planar_tcl_bound(g)
    assert b.value == pytest.approx(harmonic.tcl_upper_estimate(g).relaxed)


def test_boundary_current_direction():
    net = cycle(6)
    assert P.boundary_current_direction_check(net, 0, 3)
    for n in (3, 8, 16):
        lat = P.lattice_network(n)
        assert P.boundary_current_direction_check(lat, 0, n * n - 1)
        assert P.boundary_current_direction_check(lat, 0, n - 1)


def test_boundary_current_zero_edge():
    # pendant vertex 4 hangs off vertex 1: its outer edge carries no current
    pts = [(0, 0), (1, 1), (2, 0), (1, -1), (1, 2)]
    net = P.from_points(pts, [(0, 1), (1, 2), (2, 3), (0, 3), (1, 4)])
    assert P.boundary_current_direction_check(net, 0, 2)


def test_variation_on_cycle():
    net = cycle(5)
    pe = next(k for k, e in enumerate(net.edges) if {e.a, e.b} == {0, 4})
    e = next(k for k, e in enumerate(net.edges) if {e.a, e.b} == {2, 3})
    r = P.boundary_resistance_variation_check(net, pe, e, 0.7)
    assert r.ok
    assert (r.downstream_change < 0).any() or (r.upstream_change > 0).any()
    z = P.boundary_resistance_variation_check(net, pe, e, 0.0)
    assert np.allclose(z.upstream_change, 0) and np.allclose(z.downstream_change, 0)


def test_variation_on_grid_and_compensation():
    net = P.lattice_network(4)
    walk = net.outer_walk()
    pe = walk[0][0]
    for d in walk[2:-2]:
        r = P.boundary_resistance_variation_check(net, pe, d[0], 0.5)
        assert r.ok
        small = P.boundary_resistance_variation_check(net, pe, d[0], 1e-6)
        assert small.compensation_error <= 1e-10


def test_corner_current_methods_agree():
    for n in (3, 6):
        assert P.corner_current(n, "eigen") == pytest.approx(P.corner_current(n, "direct"), rel=1e-8)
    g = grid(5)
    pot = harmonic.solve_potential(g, grid_vertex(5, 5, 5))
    assert P.corner_current(5) == pytest.approx(pot.at(grid_vertex(5, 1, 1)), rel=1e-10)
