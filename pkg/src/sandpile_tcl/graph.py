"""Sandpile graphs, lattice builders and Laplacian assembly.

A :class:`SandpileGraph` is an undirected multigraph with a designated sink.
Edges carry integer multiplicities; optionally they also carry real
conductances so that the same object can describe a resistive network.
Sandpile dynamics only ever look at multiplicities.

Builders place the sink last, so for them ordinary vertex ``k`` has
ordinary index ``k``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BadSink, DisconnectedGraph, GraphError, NonPlanarEmbedding, NotIntegerNetwork, SelfLoop

Pair = tuple[int, int]


def _key(u: int, v: int) -> Pair:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class PlanarEmbedding:
    """Rotation system over edge slots.

    ``rotation[v]`` lists the slots incident to ``v`` in counter-clockwise
    order. Slots index :meth:`SandpileGraph.edge_slots`, so a multiedge of
    multiplicity ``m`` owns ``m`` distinct slots.
    """

    rotation: tuple[tuple[int, ...], ...]
    outer_face: int | None = None

    def faces(self, slots: Sequence[Pair]) -> list[list[tuple[int, int]]]:
        """Trace faces as lists of darts ``(slot, tail_vertex)``."""
        pos = {}
        for v, rot in enumerate(self.rotation):
            for i, e in enumerate(rot):
                pos[(e, v)] = i
        seen = set()
        faces = []
        for v, rot in enumerate(self.rotation):
            for e in rot:
                start = (e, v)
                if start in seen:
                    continue
                face = []
                dart = start
                while dart not in seen:
                    seen.add(dart)
                    face.append(dart)
                    slot, tail = dart
                    a, b = slots[slot]
                    head = b if tail == a else a
                    rot_h = self.rotation[head]
                    nxt = rot_h[(pos[(slot, head)] + 1) % len(rot_h)]
                    dart = (nxt, head)
                faces.append(face)
        return faces


@dataclass(frozen=True, eq=False)
class SandpileGraph:
    vertex_count: int
    sink: int
    adjacency: Mapping[Pair, int]
    conductances: Mapping[Pair, float] | None = None
    labels: tuple | None = None
    embedding: PlanarEmbedding | None = field(default=None, repr=False)

    def __eq__(self, other):
        if not isinstance(other, SandpileGraph):
            return NotImplemented
        return (
            self.vertex_count == other.vertex_count
            and self.sink == other.sink
            and dict(self.adjacency) == dict(other.adjacency)
            and dict(self.conductances or {}) == dict(other.conductances or {})
            and self.embedding == other.embedding
        )

    __hash__ = None

    # --- derived structure -------------------------------------------------

    @cached_property
    def ordinary(self) -> np.ndarray:
        return np.array([v for v in range(self.vertex_count) if v != self.sink], dtype=np.int64)

    @cached_property
    def index(self) -> np.ndarray:
        """Vertex id -> ordinary index (-1 for the sink)."""
        idx = np.full(self.vertex_count, -1, dtype=np.int64)
        idx[self.ordinary] = np.arange(len(self.ordinary))
        return idx

    @property
    def n_ordinary(self) -> int:
        return self.vertex_count - 1

    @cached_property
    def neighbors(self) -> list[dict[int, int]]:
        nb: list[dict[int, int]] = [dict() for _ in range(self.vertex_count)]
        for (u, v), m in self.adjacency.items():
            nb[u][v] = m
            nb[v][u] = m
        return nb

    @cached_property
    def degree(self) -> np.ndarray:
        return np.array([sum(d.values()) for d in self.neighbors], dtype=np.int64)

    @cached_property
    def ordinary_degree(self) -> np.ndarray:
        return self.degree[self.ordinary]

    @cached_property
    def sink_multiplicity(self) -> np.ndarray:
        """Edges to the sink, per ordinary index."""
        nb = self.neighbors[self.sink]
        return np.array([nb.get(int(v), 0) for v in self.ordinary], dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return int(sum(self.adjacency.values()))

    @cached_property
    def max_degree(self) -> int:
        return int(self.ordinary_degree.max())

    def conductance(self, u: int, v: int) -> float:
        k = _key(u, v)
        if self.conductances is not None and k in self.conductances:
            return float(self.conductances[k])
        return float(self.adjacency.get(k, 0))

    @cached_property
    def is_integer_network(self) -> bool:
        if self.conductances is None:
            return True
        return all(float(self.conductances.get(k, m)) == float(m) for k, m in self.adjacency.items())

    def require_integer(self) -> None:
        if not self.is_integer_network:
            raise NotIntegerNetwork("sandpile dynamics need conductance == multiplicity on every edge")

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Ordinary-to-ordinary adjacency as ``(indptr, indices, multiplicity)``."""
        idx = self.index
        indptr = [0]
        indices: list[int] = []
        mult: list[int] = []
        for v in self.ordinary:
            for u, m in sorted(self.neighbors[int(v)].items()):
                if u == self.sink:
                    continue
                indices.append(int(idx[u]))
                mult.append(m)
            indptr.append(len(indices))
        return (np.array(indptr, dtype=np.int64), np.array(indices, dtype=np.int64),
                np.array(mult, dtype=np.int64))

    def edge_slots(self) -> list[Pair]:
        """One entry per unit of multiplicity, in sorted pair order."""
        out = []
        for k in sorted(self.adjacency):
            out.extend([k] * self.adjacency[k])
        return out

    def edges(self) -> list[tuple[int, int, int]]:
        return [(u, v, m) for (u, v), m in sorted(self.adjacency.items())]

    def is_sink_adjacent(self, v: int) -> bool:
        return self.sink in self.neighbors[v]

    @cached_property
    def boundary(self) -> tuple[int, ...]:
        """Ordinary vertices adjacent to the sink."""
        return tuple(sorted(self.neighbors[self.sink]))

    def vertex_of(self, label) -> int:
        if self.labels is None:
            return int(label)
        return self.labels.index(tuple(label) if isinstance(label, list) else label)

    def with_conductances(self, conductances: Mapping[Pair, float]) -> "SandpileGraph":
        cond = {_key(u, v): float(c) for (u, v), c in conductances.items()}
        return SandpileGraph(self.vertex_count, self.sink, dict(self.adjacency), cond, self.labels, self.embedding)


# --- construction and validation --------------------------------------------


def _components(n: int, adj: Iterable[Pair], skip: int | None = None) -> list[set[int]]:
    nb: list[list[int]] = [[] for _ in range(n)]
    for u, v in adj:
        nb[u].append(v)
        nb[v].append(u)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s] or s == skip:
            continue
        comp = {s}
        seen[s] = True
        q = deque([s])
        while q:
            x = q.popleft()
            for y in nb[x]:
                if y != skip and not seen[y]:
                    seen[y] = True
                    comp.add(y)
                    q.append(y)
        comps.append(comp)
    return comps


def build_graph(edges: Iterable[Sequence], sink: int, *, vertex_count: int | None = None,
                conductances: Mapping[Pair, float] | None = None, labels: Sequence | None = None,
                embedding: PlanarEmbedding | None = None) -> SandpileGraph:
    """Validate an edge list ``[(u, v, multiplicity), ...]`` into a graph.

    Repeated pairs accumulate multiplicity. Raises :class:`SelfLoop`,
    :class:`BadSink` or :class:`DisconnectedGraph`.
    """
    adjacency: dict[Pair, int] = {}
    top = -1
    for e in edges:
        u, v = int(e[0]), int(e[1])
        m = int(e[2]) if len(e) > 2 else 1
        if u == v:
            raise SelfLoop(f"self-loop at vertex {u}")
        if m < 1:
            raise GraphError(f"multiplicity must be >= 1, got {m} on ({u}, {v})")
        if u < 0 or v < 0:
            raise GraphError("vertex ids must be non-negative")
        k = _key(u, v)
        adjacency[k] = adjacency.get(k, 0) + m
        top = max(top, u, v)
    n = vertex_count if vertex_count is not None else top + 1
    if top >= n:
        raise GraphError(f"edge endpoint {top} outside 0..{n - 1}")
    if not (0 <= sink < n):
        raise BadSink(f"sink {sink} outside 0..{n - 1}")
    if n < 2:
        raise BadSink("a sandpile needs at least one ordinary vertex")
    if len(_components(n, adjacency)) != 1:
        raise DisconnectedGraph("graph is not connected")
    cond = None
    if conductances is not None:
        cond = {}
        for (u, v), c in conductances.items():
            k = _key(int(u), int(v))
            if k not in adjacency:
                raise GraphError(f"conductance given for non-edge {k}")
            if not c > 0:
                raise GraphError(f"conductance must be positive on {k}")
            cond[k] = float(c)
    g = SandpileGraph(n, int(sink), adjacency, cond, tuple(labels) if labels is not None else None, embedding)
    if embedding is not None:
        check_embedding(g, embedding)
    return g


def ordinary_connected(g: SandpileGraph) -> bool:
    """True iff the subgraph induced on the ordinary vertices is connected."""
    return len(_components(g.vertex_count, g.adjacency, skip=g.sink)) == 1


def ordinary_component(g: SandpileGraph, v: int) -> set[int]:
    for comp in _components(g.vertex_count, g.adjacency, skip=g.sink):
        if v in comp:
            return comp
    raise BadSink(f"vertex {v} is the sink")


def check_embedding(g: SandpileGraph, emb: PlanarEmbedding) -> int:
    """Validate a rotation system and return its face count.

    Raises :class:`NonPlanarEmbedding` when Euler's formula fails.
    """
    slots = g.edge_slots()
    if len(emb.rotation) != g.vertex_count:
        raise NonPlanarEmbedding("rotation system must list every vertex")
    expected = {v: [] for v in range(g.vertex_count)}
    for s, (u, v) in enumerate(slots):
        expected[u].append(s)
        expected[v].append(s)
    for v, rot in enumerate(emb.rotation):
        if sorted(rot) != sorted(expected[v]):
            raise NonPlanarEmbedding(f"rotation at vertex {v} does not match incident slots")
    f = len(emb.faces(slots))
    if g.vertex_count - len(slots) + f != 2:
        raise NonPlanarEmbedding(f"Euler check failed: V={g.vertex_count} E={len(slots)} F={f}")
    return f


# --- matrices -----------------------------------------------------------------


def laplacian(g: SandpileGraph) -> sp.csr_matrix:
    """Conductance-weighted combinatorial Laplacian ``D - A`` over all vertices."""
    n = g.vertex_count
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for (u, v) in g.adjacency:
        c = g.conductance(u, v)
        rows += [u, v]
        cols += [v, u]
        vals += [-c, -c]
        diag[u] += c
        diag[v] += c
    rows += list(range(n))
    cols += list(range(n))
    vals += list(diag)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def grounded_laplacian(g: SandpileGraph) -> sp.csc_matrix:
    """Principal minor of :func:`laplacian` with the sink row/column removed."""
    L = laplacian(g)
    keep = g.ordinary
    return L[keep][:, keep].tocsc()


def integer_grounded_laplacian(g: SandpileGraph) -> np.ndarray:
    """Dense integer toppling matrix (multiplicities only)."""
    m = g.n_ordinary
    idx = g.index
    out = np.zeros((m, m), dtype=np.int64)
    for (u, v), k in g.adjacency.items():
        iu, iv = idx[u], idx[v]
        if iu >= 0:
            out[iu, iu] += k
        if iv >= 0:
            out[iv, iv] += k
        if iu >= 0 and iv >= 0:
            out[iu, iv] -= k
            out[iv, iu] -= k
    return out


# --- lattice builders -----------------------------------------------------------


def _lattice_graph(points: list[tuple[float, float]], lattice_edges: list[Pair],
                   missing: list[list[tuple[float, float]]], labels: Sequence | None) -> SandpileGraph:
    """Attach one sink slot per missing lattice direction and embed geometrically.

    ``missing[v]`` lists unit directions in which ``v`` lacks a lattice
    neighbour; each becomes one edge to the sink.
    """
    n = len(points)
    sink = n
    adj: dict[Pair, int] = {}
    for u, v in lattice_edges:
        adj[_key(u, v)] = adj.get(_key(u, v), 0) + 1
    for v, dirs in enumerate(missing):
        if dirs:
            adj[(v, sink)] = len(dirs)

    slots = []
    for k in sorted(adj):
        slots.extend([k] * adj[k])
    # each sink slot of v is matched to one missing direction of v
    sink_dir: dict[int, tuple[float, float]] = {}
    used = {v: 0 for v in range(n)}
    for s, (u, v) in enumerate(slots):
        if v == sink:
            sink_dir[s] = missing[u][used[u]]
            used[u] += 1

    cx = sum(p[0] for p in points) / n
    cy = sum(p[1] for p in points) / n
    rotation: list[list[tuple[float, int]]] = [[] for _ in range(n + 1)]
    for s, (u, v) in enumerate(slots):
        pu = points[u]
        if v == sink:
            d = sink_dir[s]
            rotation[u].append((math.atan2(d[1], d[0]), s))
            anchor = (pu[0] + 0.5 * d[0] - cx, pu[1] + 0.5 * d[1] - cy)
            # the sink sits at infinity, which reverses its cyclic order
            rotation[sink].append((-math.atan2(anchor[1], anchor[0]), s))
        else:
            pv = points[v]
            rotation[u].append((math.atan2(pv[1] - pu[1], pv[0] - pu[0]), s))
            rotation[v].append((math.atan2(pu[1] - pv[1], pu[0] - pv[0]), s))
    rot = tuple(tuple(s for _, s in sorted(r)) for r in rotation)
    emb = PlanarEmbedding(rot)
    edges = [(u, v, m) for (u, v), m in adj.items()]
    g = build_graph(edges, sink, vertex_count=n + 1, labels=list(labels) + ["s"] if labels else None,
                    embedding=emb)
    # outer face: the face containing the sink's largest angular gap is arbitrary;
    # pick the first face through the sink for determinism
    faces = emb.faces(g.edge_slots())
    outer = next(i for i, f in enumerate(faces) if any(t == sink for _, t in f))
    return SandpileGraph(g.vertex_count, g.sink, g.adjacency, None, g.labels, PlanarEmbedding(rot, outer))


def grid(n: int) -> SandpileGraph:
    """``GRID_n``: the n x n grid, each boundary slot wired to the sink.

    Corners get a double sink edge so every ordinary vertex has degree 4.
    Vertex ``(i, j)`` (1-based) has id ``(i-1)*n + (j-1)``; the sink is ``n*n``.
    """
    if n < 1:
        raise GraphError("grid side must be positive")
    pts = []
    labels = []
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            pts.append((float(i), float(j)))
            labels.append((i, j))
    vid = lambda i, j: (i - 1) * n + (j - 1)  # noqa: E731
    edges = []
    missing: list[list[tuple[float, float]]] = []
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i < n:
                edges.append((vid(i, j), vid(i + 1, j)))
            if j < n:
                edges.append((vid(i, j), vid(i, j + 1)))
            miss = []
            for d in ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)):
                a, b = i + int(d[0]), j + int(d[1])
                if not (1 <= a <= n and 1 <= b <= n):
                    miss.append(d)
            missing.append(miss)
    return _lattice_graph(pts, edges, missing, labels)


def grid_label(n: int, v: int) -> tuple[int, int]:
    return (v // n + 1, v % n + 1)


def grid_vertex(n: int, i: int, j: int) -> int:
    return (i - 1) * n + (j - 1)


def _round(p: tuple[float, float]) -> tuple[float, float]:
    return (round(p[0], 9) + 0.0, round(p[1], 9) + 0.0)


def _hex_cells(rings: int) -> list[tuple[int, int]]:
    cells = []
    r = rings - 1
    for q in range(-r, r + 1):
        for s in range(max(-r, -q - r), min(r, -q + r) + 1):
            cells.append((q, s))
    return cells


def honeycomb(n: int) -> SandpileGraph:
    """Honeycomb patch of ``n`` hexagon rings around a central cell.

    Boundary vertices (two lattice neighbours) get one sink edge, so every
    ordinary vertex has degree 3. Labels are vertex positions.
    """
    if n < 1:
        raise GraphError("honeycomb needs n >= 1")
    sq3 = math.sqrt(3.0)
    ids: dict[tuple[float, float], int] = {}
    pts: list[tuple[float, float]] = []
    edge_set: set[Pair] = set()
    for q, r in _hex_cells(n):
        cx = sq3 * (q + r / 2.0)
        cy = 1.5 * r
        corners = []
        for k in range(6):
            ang = math.pi / 6 + k * math.pi / 3
            p = _round((cx + math.cos(ang), cy + math.sin(ang)))
            if p not in ids:
                ids[p] = len(pts)
                pts.append(p)
            corners.append(ids[p])
        for k in range(6):
            edge_set.add(_key(corners[k], corners[(k + 1) % 6]))
    nbrs: list[list[int]] = [[] for _ in pts]
    for u, v in edge_set:
        nbrs[u].append(v)
        nbrs[v].append(u)
    missing = []
    for v, p in enumerate(pts):
        if len(nbrs[v]) == 3:
            missing.append([])
            continue
        sx = sum(pts[u][0] - p[0] for u in nbrs[v])
        sy = sum(pts[u][1] - p[1] for u in nbrs[v])
        norm = math.hypot(sx, sy)
        missing.append([(-sx / norm, -sy / norm)])
    return _lattice_graph(pts, sorted(edge_set), missing, pts)


def triangular(n: int) -> SandpileGraph:
    """Triangular-lattice hexagon of radius ``n`` around a central vertex.

    Every missing lattice direction at a boundary vertex becomes one sink
    edge, so every ordinary vertex has degree 6.
    """
    if n < 1:
        raise GraphError("triangular needs n >= 1")
    sq3 = math.sqrt(3.0)
    dirs = [(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)) for k in range(6)]
    # axial (q, r) neighbour offsets, ordered to match ``dirs``
    axial = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    cells = _hex_cells(n + 1)
    ids = {c: i for i, c in enumerate(cells)}
    pts = [(q + r / 2.0, sq3 / 2.0 * r) for q, r in cells]
    edges = []
    missing = []
    for (q, r) in cells:
        miss = []
        for d, (dq, dr) in zip(dirs, axial):
            other = (q + dq, r + dr)
            if other in ids:
                if ids[(q, r)] < ids[other]:
                    edges.append((ids[(q, r)], ids[other]))
            else:
                miss.append(d)
        missing.append(miss)
    return _lattice_graph(pts, edges, missing, [_round(p) for p in pts])


def line(k: int) -> SandpileGraph:
    """Path of ``k`` ordinary vertices, each with one sink edge."""
    if k < 1:
        raise GraphError("line needs k >= 1")
    pts = [(float(i), 0.0) for i in range(k)]
    edges = [(i, i + 1) for i in range(k - 1)]
    missing = [[(0.0, -1.0)] for _ in range(k)]
    return _lattice_graph(pts, edges, missing, list(range(k)))


def bipartition(g: SandpileGraph) -> np.ndarray:
    """Two-colouring of the ordinary subgraph (-1 where not bipartite-reachable)."""
    colour = np.full(g.vertex_count, -1, dtype=np.int64)
    for s in g.ordinary:
        if colour[s] >= 0:
            continue
        colour[s] = 0
        q = deque([int(s)])
        while q:
            x = q.popleft()
            for y in g.neighbors[x]:
                if y == g.sink:
                    continue
                if colour[y] < 0:
                    colour[y] = 1 - colour[x]
                    q.append(y)
                elif colour[y] == colour[x]:
                    raise GraphError("ordinary subgraph is not bipartite")
    return colour
