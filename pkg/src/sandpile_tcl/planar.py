"""Planar duals, restricted duals and currents computed from the Laplacian
spectrum.

A :class:`PlanarNetwork` is a multigraph with one entry per edge (loops
allowed) and a rotation system over darts. Dart ``(k, 0)`` runs from
``edges[k].a`` to ``edges[k].b`` and ``(k, 1)`` runs back. Faces are the
orbits of "reverse the dart, then step to the next dart in the rotation at
its tail".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.spatial import Delaunay

from .errors import Disconnecting, NonPlanarEmbedding
from .graph import SandpileGraph, check_embedding

Dart = tuple[int, int]


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    conductance: float = 1.0


@dataclass(frozen=True, eq=False)
class PlanarNetwork:
    vertex_count: int
    edges: tuple[Edge, ...]
    rotation: tuple[tuple[Dart, ...], ...]
    outer_face: int | None = None

    def tail(self, d: Dart) -> int:
        e = self.edges[d[0]]
        return e.a if d[1] == 0 else e.b

    def head(self, d: Dart) -> int:
        e = self.edges[d[0]]
        return e.b if d[1] == 0 else e.a

    @cached_property
    def _pos(self) -> dict[Dart, tuple[int, int]]:
        return {d: (v, i) for v, rot in enumerate(self.rotation) for i, d in enumerate(rot)}

    def next_in_face(self, d: Dart) -> Dart:
        rev = (d[0], 1 - d[1])
        v, i = self._pos[rev]
        rot = self.rotation[v]
        return rot[(i + 1) % len(rot)]

    @cached_property
    def faces(self) -> list[list[Dart]]:
        seen: set[Dart] = set()
        out = []
        for rot in self.rotation:
            for d in rot:
                if d in seen:
                    continue
                face = []
                while d not in seen:
                    seen.add(d)
                    face.append(d)
                    d = self.next_in_face(d)
                out.append(face)
        return out

    @cached_property
    def face_of(self) -> dict[Dart, int]:
        return {d: f for f, face in enumerate(self.faces) for d in face}

    def validate(self) -> int:
        """Check the rotation covers every dart once and Euler's formula
        holds; returns the face count."""
        darts = [d for rot in self.rotation for d in rot]
        expect = {(k, s) for k in range(len(self.edges)) for s in (0, 1)}
        if len(darts) != len(expect) or set(darts) != expect:
            raise NonPlanarEmbedding("rotation system does not list every dart exactly once")
        for v, rot in enumerate(self.rotation):
            if any(self.tail(d) != v for d in rot):
                raise NonPlanarEmbedding(f"rotation at {v} lists a dart leaving another vertex")
        comps = _component_count(self.vertex_count, [(e.a, e.b) for e in self.edges])
        f = len(self.faces)
        if self.vertex_count - len(self.edges) + f != 1 + comps:
            raise NonPlanarEmbedding(f"Euler check failed: V={self.vertex_count} E={len(self.edges)} F={f}")
        return f

    def laplacian(self) -> sp.csr_matrix:
        n = self.vertex_count
        rows, cols, vals = [], [], []
        for e in self.edges:
            if e.a == e.b:
                continue
            c = e.conductance
            rows += [e.a, e.b, e.a, e.b]
            cols += [e.b, e.a, e.a, e.b]
            vals += [-c, -c, c, c]
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def outer_walk(self) -> list[Dart]:
        if self.outer_face is None:
            raise ValueError("no outer face recorded")
        return self.faces[self.outer_face]


def _component_count(n: int, pairs) -> int:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(x) for x in range(n)})


def from_sandpile(g: SandpileGraph) -> PlanarNetwork:
    """Network over all vertices (sink included) from an embedded sandpile.

    Parallel edges become separate entries sharing the pair's conductance.
    """
    if g.embedding is None:
        raise NonPlanarEmbedding("graph carries no embedding")
    check_embedding(g, g.embedding)
    slots = g.edge_slots()
    edges = tuple(Edge(a, b, g.conductance(a, b) / g.adjacency[(a, b)]) for a, b in slots)
    rot = tuple(tuple((k, 0 if slots[k][0] == v else 1) for k in g.embedding.rotation[v])
                for v in range(g.vertex_count))
    outer = None
    if g.embedding.outer_face is not None:
        # translate the stored outer-face index through a dart it contains
        ref = g.embedding.faces(slots)[g.embedding.outer_face][0]
        net = PlanarNetwork(g.vertex_count, edges, rot)
        k, tail = ref
        outer = net.face_of[(k, 0 if slots[k][0] == tail else 1)]
        return PlanarNetwork(g.vertex_count, edges, rot, outer)
    return PlanarNetwork(g.vertex_count, edges, rot)


def from_points(points, pairs, conductances=None) -> PlanarNetwork:
    """Straight-line embedding: darts at each vertex sorted by angle."""
    pts = np.asarray(points, dtype=float)
    cond = conductances if conductances is not None else [1.0] * len(pairs)
    edges = tuple(Edge(int(a), int(b), float(c)) for (a, b), c in zip(pairs, cond))
    out: list[list[tuple[float, Dart]]] = [[] for _ in range(len(pts))]
    for k, e in enumerate(edges):
        for side, (x, y) in ((0, (e.a, e.b)), (1, (e.b, e.a))):
            d = pts[y] - pts[x]
            out[x].append((math.atan2(d[1], d[0]), (k, side)))
    rot = tuple(tuple(d for _, d in sorted(lst)) for lst in out)
    net = PlanarNetwork(len(pts), edges, rot)
    # bounded faces are walked clockwise; the outer walk has the largest signed area
    best, arg = -math.inf, None
    for f, face in enumerate(net.faces):
        area = 0.0
        for d in face:
            p, q = pts[net.tail(d)], pts[net.head(d)]
            area += p[0] * q[1] - p[1] * q[0]
        if area > best:
            best, arg = area, f
    net = PlanarNetwork(len(pts), edges, rot, arg)
    net.validate()
    return net


def lattice_network(n: int) -> PlanarNetwork:
    """Plain ``n x n`` lattice (no sink), vertex ``(i, j)`` -> ``(i-1) n + j-1``."""
    pts = [(j, -i) for i in range(n) for j in range(n)]
    pairs = []
    for i in range(n):
        for j in range(n):
            v = i * n + j
            if j + 1 < n:
                pairs.append((v, v + 1))
            if i + 1 < n:
                pairs.append((v, v + n))
    return from_points(pts, pairs)


def random_planar_network(seed, n_points: int = 20) -> PlanarNetwork:
    """Delaunay triangulation of random points with random conductances in [0.5, 2]."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n_points, 2))
    tri = Delaunay(pts)
    pairs = set()
    for s in tri.simplices:
        for a, b in ((s[0], s[1]), (s[1], s[2]), (s[0], s[2])):
            pairs.add((int(min(a, b)), int(max(a, b))))
    pairs = sorted(pairs)
    cond = rng.uniform(0.5, 2.0, len(pairs))
    return from_points(pts, pairs, cond)


# --- duality -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DualGraph:
    network: PlanarNetwork
    primal: PlanarNetwork
    edge_map: tuple[int, ...]  # primal edge k -> dual edge edge_map[k] (identity numbering)


def dualize(net: PlanarNetwork) -> DualGraph:
    """Faces become vertices; edge ``k`` joins the faces on its two sides with
    conductance ``1 / c_k``."""
    net.validate()
    fo = net.face_of
    edges = tuple(Edge(fo[(k, 0)], fo[(k, 1)], 1.0 / e.conductance) for k, e in enumerate(net.edges))
    # dual dart (k, s) leaves the face containing primal dart (k, s)
    rot = tuple(tuple(face) for face in net.faces)
    dual = PlanarNetwork(len(net.faces), edges, rot)
    dual.validate()
    return DualGraph(dual, net, tuple(range(len(edges))))


@dataclass(frozen=True, eq=False)
class RestrictedDual:
    """Dual without the edge crossing the power edge; unit current enters at
    ``u`` and leaves at ``v``."""

    network: PlanarNetwork
    removed: int
    u: int
    v: int
    kept: tuple[int, ...]  # kept[i] = original dual edge id of edge i

    @cached_property
    def edge_index(self) -> dict[int, int]:
        return {k: i for i, k in enumerate(self.kept)}


def restricted_dual(net: PlanarNetwork, e: int, dual: DualGraph | None = None) -> RestrictedDual:
    dual = dual or dualize(net)
    d = dual.network
    de = d.edges[e]
    if de.a == de.b:
        raise ValueError(f"edge {e} is a bridge; its dual is a loop")
    kept = tuple(k for k in range(len(d.edges)) if k != e)
    ren = {k: i for i, k in enumerate(kept)}
    edges = tuple(d.edges[k] for k in kept)
    rot = tuple(tuple((ren[k], s) for k, s in r if k != e) for r in d.rotation)
    rn = PlanarNetwork(d.vertex_count, edges, rot)
    if _component_count(rn.vertex_count, [(x.a, x.b) for x in edges]) != 1:
        raise Disconnecting(f"dual of edge {e} is a bridge")
    return RestrictedDual(rn, e, de.a, de.b, kept)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def of(cls, net: PlanarNetwork) -> "SpectralDecomposition":
        lam, psi = np.linalg.eigh(net.laplacian().toarray())
        return cls(lam, psi)


def _spectrum(rd: RestrictedDual) -> SpectralDecomposition:
    s = rd.__dict__.get("_spectrum")
    if s is None:
        s = SpectralDecomposition.of(rd.network)
        rd.__dict__["_spectrum"] = s
    return s


def eigen_potentials(rd: RestrictedDual) -> np.ndarray:
    """``Z = sum_{k>0} psi_k (psi_k(u) - psi_k(v)) / lambda_k``."""
    sd = _spectrum(rd)
    lam, psi = sd.eigenvalues[1:], sd.eigenvectors[:, 1:]
    return psi @ ((psi[rd.u] - psi[rd.v]) / lam)


def direct_potentials(rd: RestrictedDual) -> np.ndarray:
    """Ground ``v`` and solve ``L Z = e_u - e_v``."""
    L = rd.network.laplacian().tocsc()
    n = rd.network.vertex_count
    keep = np.array([i for i in range(n) if i != rd.v])
    b = np.zeros(n)
    b[rd.u] = 1.0
    z = np.zeros(n)
    z[keep] = np.atleast_1d(spsolve(L[keep][:, keep].tocsc(), b[keep]))
    return z


def edge_currents(rd: RestrictedDual, method: str = "eigen") -> np.ndarray:
    """Signed current ``c (Z(a) - Z(b))`` in every edge of ``rd`` (loops give 0)."""
    Z = eigen_potentials(rd) if method == "eigen" else direct_potentials(rd)
    a = np.array([e.a for e in rd.network.edges])
    b = np.array([e.b for e in rd.network.edges])
    c = np.array([e.conductance for e in rd.network.edges])
    return c * (Z[a] - Z[b])


def _pair_current(rd: RestrictedDual, p: int, q: int, Z: np.ndarray) -> float:
    if p == q:
        return 0.0
    cs = {e.conductance for e in rd.network.edges if {e.a, e.b} == {p, q}}
    if not cs:
        raise ValueError(f"{p} and {q} are not adjacent")
    if len(cs) > 1:
        raise ValueError(f"parallel edges between {p} and {q} differ in conductance")
    return abs(Z[p] - Z[q]) * cs.pop()


def eigen_current(rd: RestrictedDual, p: int, q: int) -> float:
    """Current in one edge ``pq`` from the spectral formula."""
    return _pair_current(rd, p, q, eigen_potentials(rd))


def direct_current(rd: RestrictedDual, p: int, q: int) -> float:
    return _pair_current(rd, p, q, direct_potentials(rd))


def loop_law_residual(rd: RestrictedDual, method: str = "direct") -> float:
    """Largest |sum of current x resistance| around a face of ``rd``."""
    cur = edge_currents(rd, method)
    worst = 0.0
    for face in rd.network.faces:
        tot = 0.0
        for k, s in face:
            e = rd.network.edges[k]
            if e.a == e.b:
                continue
            tot += (cur[k] if s == 0 else -cur[k]) / e.conductance
        worst = max(worst, abs(tot))
    return worst


def cut_flows(rd: RestrictedDual, method: str = "direct") -> list[float]:
    """Net flow out of each potential level set containing ``u`` but not ``v``."""
    Z = eigen_potentials(rd) if method == "eigen" else direct_potentials(rd)
    cur = edge_currents(rd, method)
    order = np.argsort(-Z, kind="stable")
    inside = np.zeros(len(Z), dtype=bool)
    flows = []
    for x in order:
        inside[x] = True
        if not inside[rd.u] or inside[rd.v]:
            continue
        f = 0.0
        for k, e in enumerate(rd.network.edges):
            if inside[e.a] and not inside[e.b]:
                f += cur[k]
            elif inside[e.b] and not inside[e.a]:
                f -= cur[k]
        flows.append(f)
    return flows


# --- sandpile bounds through the dual --------------------------------------------------


@dataclass(frozen=True)
class PlanarBound:
    value: float
    min_current: float
    power_edge: int
    target_edge: int
    primal_min_potential: float
    relative_gap: float


def sink_edge_ids(g: SandpileGraph) -> list[int]:
    return [k for k, (a, b) in enumerate(g.edge_slots()) if g.sink in (a, b)]


def dual_sink_currents(g: SandpileGraph, net: PlanarNetwork, dual: DualGraph, e: int,
                       method: str = "eigen") -> dict[int, float]:
    """Current magnitude in the dual of every other sink edge when the power
    edge is sink edge ``e``."""
    rd = restricted_dual(net, e, dual)
    cur = edge_currents(rd, method)
    return {k: abs(cur[rd.edge_index[k]]) for k in sink_edge_ids(g) if k != e}


def planar_tcl_bound(g: SandpileGraph, method: str = "eigen", rtol: float = 1e-6) -> PlanarBound:
    """``|E| * max 1/i`` over sink power edges and sink target edges, checked
    against ``max 1/pi_w(v)`` over sink-adjacent pairs on the primal side."""
    from . import harmonic

    net = from_sandpile(g)
    dual = dualize(net)
    sink_ids = sink_edge_ids(g)
    slots = g.edge_slots()
    bnd = list(g.boundary)
    P, _ = harmonic.potential_matrix(g, bnd)
    bidx = [g.index[x] for x in bnd]
    primal_min = float(P[:, bidx].min())
    if len(sink_ids) < 2:
        return PlanarBound(g.edge_count / primal_min, primal_min, sink_ids[0], sink_ids[0], primal_min, 0.0)
    best, arg = math.inf, (sink_ids[0], sink_ids[0])
    for e in sink_ids:
        for k, i in dual_sink_currents(g, net, dual, e, method).items():
            if i < best:
                best, arg = i, (e, k)
    # a sink-adjacent source with one sink edge still sees pi_w(w) = 1 through no other slot
    best_all = best
    gap = abs(best_all - primal_min) / primal_min
    if gap > rtol:
        raise AssertionError(f"dual route {best_all} disagrees with primal {primal_min}")
    return PlanarBound(g.edge_count / best_all, best_all, arg[0], arg[1], primal_min, gap)


def corner_current(n: int, method: str = "direct") -> float:
    """Current in the dual of a sink edge at ``(1, 1)`` when the power edge is
    a sink edge at ``(n, n)`` on GRID_n."""
    from .graph import grid, grid_vertex

    g = grid(n)
    net = from_sandpile(g)
    dual = dualize(net)
    slots = g.edge_slots()
    a, b = grid_vertex(n, n, n), grid_vertex(n, 1, 1)
    e = next(k for k, p in enumerate(slots) if p == (a, g.sink))
    t = next(k for k, p in enumerate(slots) if p == (b, g.sink))
    rd = restricted_dual(net, e, dual)
    return float(abs(edge_currents(rd, method)[rd.edge_index[t]]))


# --- boundary lemmas ------------------------------------------------------------------------


def _dirichlet(net: PlanarNetwork, fixed: dict[int, float], conductances=None) -> np.ndarray:
    L = net.laplacian() if conductances is None else _laplacian_with(net, conductances)
    L = L.tocsc()
    n = net.vertex_count
    free = np.array([v for v in range(n) if v not in fixed], dtype=np.int64)
    x = np.zeros(n)
    for v, val in fixed.items():
        x[v] = val
    if len(free):
        fx = np.array(list(fixed))
        rhs = -L[free][:, fx] @ x[fx]
        x[free] = np.atleast_1d(spsolve(L[free][:, free].tocsc(), rhs))
    return x


def _laplacian_with(net: PlanarNetwork, cond) -> sp.csr_matrix:
    edges = tuple(Edge(e.a, e.b, c) for e, c in zip(net.edges, cond))
    return PlanarNetwork(net.vertex_count, edges, net.rotation, net.outer_face).laplacian()


def _outer_vertices(net: PlanarNetwork) -> list[int]:
    return [net.tail(d) for d in net.outer_walk()]


def boundary_paths(net: PlanarNetwork, t: int, s: int) -> tuple[list[Dart], list[Dart]]:
    """The two arcs of the outer walk from ``t`` to ``s``, as dart lists
    directed from ``t`` towards ``s``."""
    walk = net.outer_walk()
    verts = [net.tail(d) for d in walk]
    if t not in verts or s not in verts:
        raise ValueError("t and s must lie on the outer face")
    m = len(walk)
    i = verts.index(t)
    fwd = []
    while net.tail(walk[i % m]) != s:
        fwd.append(walk[i % m])
        i += 1
    j = verts.index(s)
    back = []
    while net.tail(walk[j % m]) != t:
        back.append(walk[j % m])
        j += 1
    back = [(k, 1 - side) for k, side in reversed(back)]
    return fwd, back


def boundary_current_direction_check(net: PlanarNetwork, t: int, s: int, tol: float = 1e-12) -> bool:
    """With ``t`` at 1 and ``s`` at 0, every outer edge carries current along
    its arc from ``t`` to ``s``."""
    x = _dirichlet(net, {t: 1.0, s: 0.0})
    for arc in boundary_paths(net, t, s):
        for d in arc:
            if x[net.tail(d)] < x[net.head(d)] - tol:
                return False
    return True


@dataclass(frozen=True)
class VariationReport:
    ok: bool
    upstream_change: np.ndarray
    downstream_change: np.ndarray
    compensation_error: float


def boundary_resistance_variation_check(net: PlanarNetwork, power_edge: int, e: int, delta: float,
                                        tol: float = 1e-12) -> VariationReport:
    """Raise the resistance of outer edge ``e`` by ``delta`` with unit
    potential across outer edge ``power_edge`` (``a`` at 1, ``b`` at 0).

    Nodes on the outer arc between the source and ``e`` must not lose
    potential; nodes between ``e`` and the grounded end must not gain any.
    Also returns the error of the first-order compensation-source prediction.
    """
    pe = net.edges[power_edge]
    src, snk = pe.a, pe.b
    fixed = {src: 1.0, snk: 0.0}
    cond = [x.conductance for x in net.edges]
    before = _dirichlet(net, fixed, cond)
    cond2 = list(cond)
    cond2[e] = 1.0 / (1.0 / cond[e] + delta)
    after = _dirichlet(net, fixed, cond2)
    arcs = boundary_paths(net, src, snk)
    arc = next((a for a in arcs if any(k == e for k, _ in a)), None)
    if arc is None or any(k == power_edge for k, _ in arc):
        arc = next(a for a in arcs if not any(k == power_edge for k, _ in a))
    ks = [k for k, _ in arc]
    if e not in ks:
        raise ValueError(f"edge {e} is not on the outer arc away from the power edge")
    pos = ks.index(e)
    nodes = [net.tail(d) for d in arc] + [snk]
    up = np.array([after[v] - before[v] for v in nodes[1:pos + 1]])
    down = np.array([after[v] - before[v] for v in nodes[pos + 1:-1]])
    ok = bool((up >= -tol).all() and (down <= tol).all())
    # compensation: a source -I dZ in series with e acts as +I dZ / Z into its tail
    ed = net.edges[e]
    Z = 1.0 / cond[e]
    I = (before[ed.a] - before[ed.b]) * cond[e]
    L = net.laplacian().tocsc()
    n = net.vertex_count
    free = np.array([v for v in range(n) if v not in fixed], dtype=np.int64)
    inj = np.zeros(n)
    inj[ed.a] += I * delta / Z
    inj[ed.b] -= I * delta / Z
    pred = np.zeros(n)
    pred[free] = np.atleast_1d(spsolve(L[free][:, free].tocsc(), inj[free]))
    err = float(np.max(np.abs((after - before) - pred)))
    return VariationReport(ok, up, down, err)
