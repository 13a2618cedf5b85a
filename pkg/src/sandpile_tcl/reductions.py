"""Resistive-network equivalences and the line-circuit growth bound.

A :class:`ResistiveNetwork` keeps one resistance per unordered vertex pair;
parallel edges are merged on construction. Two networks are *equivalent*
on a vertex set ``B`` when putting unit potential on any ``v`` in ``B``
(sink grounded) induces the same potentials on ``B``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import engine
from .errors import (BoundaryMismatch, CenterIsCritical, NotDegreeThree, PropertyViolation,
                     WouldDisconnect, WouldMergePoles)
from .graph import SandpileGraph, bipartition
from .harmonic import tcl_upper_estimate

Pair = tuple[int, int]


def _key(u: int, v: int) -> Pair:
    return (u, v) if u < v else (v, u)


def _parallel(r1: float, r2: float) -> float:
    return r1 * r2 / (r1 + r2)


@dataclass(frozen=True, eq=False)
class ResistiveNetwork:
    """Vertices, a sink and positive resistances keyed by sorted vertex pairs."""

    nodes: frozenset
    sink: int
    resistance: Mapping[Pair, float]
    labels: Mapping[int, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.sink not in self.nodes:
            raise ValueError("sink must be a node")
        for (u, v), r in self.resistance.items():
            if u >= v or u not in self.nodes or v not in self.nodes:
                raise ValueError(f"bad edge key {(u, v)}")
            if not r > 0 or not math.isfinite(r):
                raise ValueError(f"resistance on {(u, v)} must be positive and finite")

    @classmethod
    def build(cls, nodes: Iterable[int], sink: int, edges: Iterable[tuple[int, int, float]],
              labels: Mapping[int, object] | None = None) -> "ResistiveNetwork":
        res: dict[Pair, float] = {}
        for u, v, r in edges:
            if u == v:
                continue
            k = _key(int(u), int(v))
            res[k] = _parallel(res[k], float(r)) if k in res else float(r)
        return cls(frozenset(int(x) for x in nodes), int(sink), res, dict(labels or {}))

    @classmethod
    def from_sandpile(cls, g: SandpileGraph) -> "ResistiveNetwork":
        edges = [(u, v, 1.0 / g.conductance(u, v)) for (u, v) in g.adjacency]
        labels = dict(enumerate(g.labels)) if g.labels is not None else {}
        return cls.build(range(g.vertex_count), g.sink, edges, labels)

    def neighbors(self, v: int) -> dict[int, float]:
        out = {}
        for (a, b), r in self.resistance.items():
            if a == v:
                out[b] = r
            elif b == v:
                out[a] = r
        return out

    @property
    def boundary(self) -> frozenset:
        return frozenset(u for k in self.resistance if self.sink in k for u in k if u != self.sink)

    @property
    def internal_edges(self) -> list[Pair]:
        return sorted(k for k in self.resistance if self.sink not in k)

    def replace(self, resistance: Mapping[Pair, float], nodes=None) -> "ResistiveNetwork":
        return ResistiveNetwork(frozenset(self.nodes if nodes is None else nodes), self.sink,
                                dict(resistance), self.labels)

    def potentials(self, source: int) -> dict[int, float]:
        """Potentials with ``source`` at 1 and the sink at 0.

        Pieces cut off from both poles float; they are reported as 0.
        """
        if source == self.sink:
            raise ValueError("source must not be the sink")
        adj: dict[int, list[int]] = {v: [] for v in self.nodes}
        for u, v in self.resistance:
            adj[u].append(v)
            adj[v].append(u)
        reach, stack = {source, self.sink}, [source, self.sink]
        while stack:
            for y in adj[stack.pop()]:
                if y not in reach:
                    reach.add(y)
                    stack.append(y)
        free = sorted(reach - {source, self.sink})
        idx = {v: i for i, v in enumerate(free)}
        rows, cols, vals = [], [], []
        rhs = np.zeros(len(free))
        for (u, v), r in self.resistance.items():
            c = 1.0 / r
            for a, b in ((u, v), (v, u)):
                if a not in idx:
                    continue
                rows.append(idx[a])
                cols.append(idx[a])
                vals.append(c)
                if b in idx:
                    rows.append(idx[a])
                    cols.append(idx[b])
                    vals.append(-c)
                elif b == source:
                    rhs[idx[a]] += c
        out = {v: 0.0 for v in self.nodes}
        out[source] = 1.0
        if free:
            n = len(free)
            L = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
            x = np.atleast_1d(spla.spsolve(L, rhs))
            for v, i in idx.items():
                out[v] = float(x[i])
        return out

    def pole_potential(self, vi: int, vj: int) -> float:
        """``pi_vi(vj)``: potential at ``vj`` with unit potential at ``vi``."""
        return self.potentials(vi)[vj]

    def to_sandpile_topology(self) -> SandpileGraph:
        """Integer sandpile with one unit edge per adjacent pair."""
        from .graph import build_graph
        order = sorted(self.nodes)
        ix = {v: i for i, v in enumerate(order)}
        edges = [(ix[u], ix[v]) for (u, v) in sorted(self.resistance)]
        return build_graph(edges, ix[self.sink], vertex_count=len(order))


def star_delta(net: ResistiveNetwork, center: int, critical: Iterable[int] | None = None) -> ResistiveNetwork:
    """Replace the degree-3 star at ``center`` with the equivalent triangle.

    ``critical`` defaults to the network's boundary; the center may not lie
    in it. The sink may be one of the three leaves.
    """
    crit = net.boundary if critical is None else frozenset(critical)
    if center == net.sink or center in crit:
        raise CenterIsCritical(f"vertex {center} is the sink or in the critical set")
    nb = net.neighbors(center)
    if len(nb) != 3:
        raise NotDegreeThree(f"vertex {center} has {len(nb)} distinct neighbours")
    (p, a), (q, b), (r, c) = sorted(nb.items())
    s = a * b + b * c + c * a
    res = {k: v for k, v in net.resistance.items() if center not in k}
    # the edge opposite each leaf gets S divided by that leaf's arm
    for (x, y), val in ((_key(q, r), s / a), (_key(p, r), s / b), (_key(p, q), s / c)):
        res[(x, y)] = _parallel(res[(x, y)], val) if (x, y) in res else val
    return net.replace(res, net.nodes - {center})


def _boundary_responses(net: ResistiveNetwork, B) -> np.ndarray:
    return np.array([[net.potentials(v)[u] for u in B] for v in B])


def check_equivalence(net1: ResistiveNetwork, net2: ResistiveNetwork, B: Iterable[int] | None = None,
                      tol: float = 1e-9) -> bool:
    """Whether unit sources on ``B`` give matching potentials on ``B``.

    ``B`` defaults to the shared boundary; differing boundaries without an
    explicit ``B`` raise :class:`BoundaryMismatch`.
    """
    if B is None:
        if net1.boundary != net2.boundary:
            raise BoundaryMismatch("networks have different boundary sets")
        B = net1.boundary
    B = sorted(B)
    if any(v not in net1.nodes or v not in net2.nodes for v in B):
        raise BoundaryMismatch("B is not contained in both networks")
    if net1.sink != net2.sink:
        raise BoundaryMismatch("networks use different sinks")
    return bool(np.max(np.abs(_boundary_responses(net1, B) - _boundary_responses(net2, B)),
                       initial=0.0) <= tol)


@dataclass(frozen=True)
class HoneycombReduction:
    network: ResistiveNetwork
    original: ResistiveNetwork
    critical: frozenset
    eliminated: tuple[int, ...]
    created: dict  # resistances of triangle edges produced by the stars, before merging


def honeycomb_to_triangular(H: SandpileGraph, keep_colour: int | None = None,
                            critical: Iterable[int] | None = None) -> HoneycombReduction:
    """Eliminate one colour class of a honeycomb by star-delta moves.

    By default the critical set is the whole boundary, so only interior
    centres of the eliminated class go. Passing ``critical`` as the kept
    class's boundary sites also removes boundary centres (the sink then
    acts as a star leaf) and leaves a triangular lattice plus sink.
    """
    net = ResistiveNetwork.from_sandpile(H)
    colour = bipartition(H)
    if keep_colour is None:
        # keep the class whose removal eliminates the most interior stars
        interior = [v for v in H.ordinary if not H.is_sink_adjacent(int(v))]
        counts = [sum(1 for v in interior if colour[v] == c) for c in (0, 1)]
        keep_colour = 0 if counts[1] >= counts[0] else 1
    crit = net.boundary if critical is None else frozenset(critical)
    centres = [int(v) for v in H.ordinary if colour[v] != keep_colour and int(v) not in crit]
    created: dict[Pair, float] = {}
    for c in centres:
        nb = net.neighbors(c)
        if len(nb) == 3:
            (p, a), (q, b), (r, cc) = sorted(nb.items())
            s = a * b + b * cc + cc * a
            for k, val in ((_key(q, r), s / a), (_key(p, r), s / b), (_key(p, q), s / cc)):
                created[k] = _parallel(created[k], val) if k in created else val
        net = star_delta(net, c, crit)
    return HoneycombReduction(net, ResistiveNetwork.from_sandpile(H), crit, tuple(centres), created)


def kept_class_boundary(H: SandpileGraph, keep_colour: int) -> frozenset:
    colour = bipartition(H)
    return frozenset(int(v) for v in H.boundary if colour[v] == keep_colour)


def tcl_pair_ratios(ns: Iterable[int] = (1, 2, 3, 4)) -> list[tuple[int, float, float, float]]:
    """Boundary tcl estimates of honeycomb(n) and triangular(n) and their ratio."""
    from .graph import honeycomb, triangular
    out = []
    for n in ns:
        h = tcl_upper_estimate(honeycomb(n)).value
        t = tcl_upper_estimate(triangular(n)).value
        out.append((n, h, t, h / t))
    return out


# -- contract / delete ---------------------------------------------------

def _connected_without_sink(net: ResistiveNetwork, a: int, b: int, skip: Pair | None = None) -> bool:
    adj: dict[int, list[int]] = {v: [] for v in net.nodes}
    for k in net.resistance:
        if k == skip or net.sink in k:
            continue
        adj[k[0]].append(k[1])
        adj[k[1]].append(k[0])
    seen, stack = {a}, [a]
    while stack:
        x = stack.pop()
        if x == b:
            return True
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return False


def delete_edge(net: ResistiveNetwork, e: Pair) -> ResistiveNetwork:
    e = _key(*e)
    return net.replace({k: r for k, r in net.resistance.items() if k != e})


def contract_edge(net: ResistiveNetwork, e: Pair, poles: tuple[int, int] | None = None) -> ResistiveNetwork:
    """Merge the endpoints of ``e``; parallel edges merge, loops vanish.

    A pole survives a merge under its own id. Merging both poles raises
    :class:`WouldMergePoles`; the sink is never merged.
    """
    u, v = _key(*e)
    if net.sink in (u, v):
        raise ValueError("sink edges are not contracted")
    if poles is not None and {u, v} == set(poles):
        raise WouldMergePoles(f"contracting {e} would merge the poles")
    keep, drop = (v, u) if poles is not None and v in poles else (u, v)
    res: dict[Pair, float] = {}
    for (a, b), r in net.resistance.items():
        a, b = (keep if a == drop else a), (keep if b == drop else b)
        if a == b:
            continue
        k = _key(a, b)
        res[k] = _parallel(res[k], r) if k in res else r
    return net.replace(res, net.nodes - {drop})


def contract_delete_step(net: ResistiveNetwork, vi: int, vj: int, e: Pair,
                         tol: float = 1e-12) -> ResistiveNetwork:
    """Contract or delete ``e``, whichever gives the smaller ``pi_vi(vj)``.

    Ties go to deletion. Raises :class:`WouldDisconnect` if deleting ``e``
    separates the poles outside the sink.
    """
    e = _key(*e)
    if e not in net.resistance or net.sink in e:
        raise ValueError(f"{e} is not an edge away from the sink")
    if not _connected_without_sink(net, vi, vj, skip=e):
        raise WouldDisconnect(f"deleting {e} disconnects {vi} and {vj}")
    before = net.pole_potential(vi, vj)
    deleted = delete_edge(net, e)
    best, val = deleted, deleted.pole_potential(vi, vj)
    try:
        contracted = contract_edge(net, e, (vi, vj))
    except WouldMergePoles:
        contracted = None
    if contracted is not None:
        cv = contracted.pole_potential(vi, vj)
        if cv < val - tol:
            best, val = contracted, cv
    if val > before + 1e-10:
        raise PropertyViolation("contract/delete step increased the pole potential",
                                {"edge": list(e), "before": before, "after": val})
    return best


def reduce_to_path(net: ResistiveNetwork, vi: int, vj: int) -> tuple[ResistiveNetwork, list[float]]:
    """Apply contract/delete steps in lexicographic edge order until none is legal.

    Returns the final network and the pole potential after every step.
    """
    trace = [net.pole_potential(vi, vj)]
    while True:
        for e in net.internal_edges:
            if _connected_without_sink(net, vi, vj, skip=e):
                net = contract_delete_step(net, vi, vj, e)
                trace.append(net.pole_potential(vi, vj))
                break
        else:
            return net, trace


def is_pole_path(net: ResistiveNetwork, vi: int, vj: int) -> bool:
    """Whether the non-sink edges form a single simple path from ``vi`` to ``vj``."""
    edges = net.internal_edges
    deg: dict[int, int] = {}
    for a, b in edges:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    if vi == vj or not _connected_without_sink(net, vi, vj):
        return False
    ends = [v for v, d in deg.items() if d == 1]
    return sorted(ends) == sorted((vi, vj)) and all(d <= 2 for d in deg.values()) \
        and len(edges) == len(deg) - 1


def scaled_resistance(net: ResistiveNetwork, e: Pair, factor: float) -> ResistiveNetwork:
    e = _key(*e)
    res = dict(net.resistance)
    res[e] *= factor
    return net.replace(res)


def resistance_limit_check(net: ResistiveNetwork, vi: int, vj: int, e: Pair,
                           factors=(1e3, 1e-3), tol: float = 1e-4) -> dict:
    """Compare scaled-resistance responses with exact deletion and contraction."""
    e = _key(*e)
    hi = scaled_resistance(net, e, max(factors)).pole_potential(vi, vj)
    lo = scaled_resistance(net, e, min(factors)).pole_potential(vi, vj)
    dele = delete_edge(net, e).pole_potential(vi, vj)
    con = contract_edge(net, e, (vi, vj)).pole_potential(vi, vj)
    return {"high": hi, "delete": dele, "low": lo, "contract": con,
            "ok": abs(hi - dele) <= tol and abs(lo - con) <= tol}


# -- line circuit --------------------------------------------------------

@dataclass(frozen=True)
class LineCircuit:
    k: int
    x: object
    sink_resistance: object = 1

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("line circuit needs k >= 2")
        if self.x < 1:
            raise ValueError("line circuit needs x >= 1")

    def network(self) -> ResistiveNetwork:
        """Nodes ``0..k-1`` in a row, sink ``k``."""
        k = self.k
        edges = [(i, i + 1, float(self.x)) for i in range(k - 1)]
        edges += [(i, k, float(self.sink_resistance)) for i in range(k)]
        return ResistiveNetwork.build(range(k + 1), k, edges)


def _exact(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, float) and x.is_integer():
        return Fraction(int(x))
    return x


def line_circuit_potentials(k: int, x) -> list:
    """Node potentials ``V_1..V_k`` of the line circuit, scaled so ``V_k = 1``.

    Exact ``Fraction`` arithmetic for integral or rational ``x``.
    """
    LineCircuit(k, x)
    x = _exact(x)
    V = [None] * (k + 1)
    V[k] = Fraction(1) if isinstance(x, Fraction) else 1.0
    V[k - 1] = x + 1
    for i in range(k - 2, 0, -1):
        V[i] = (x + 2) * V[i + 1] - V[i + 2]
    return V[1:]


def line_circuit_matrix_form(k: int, x) -> tuple:
    """``(V_1, V_2)`` from ``[[x+2, -1], [1, 0]]^(k-2) (x+1, 1)``."""
    LineCircuit(k, x)
    x = _exact(x)
    one = Fraction(1) if isinstance(x, Fraction) else 1.0
    m = [[x + 2, -one], [one, 0 * one]]
    acc = [[one, 0 * one], [0 * one, one]]
    for _ in range(k - 2):
        acc = [[acc[0][0] * m[0][0] + acc[0][1] * m[1][0], acc[0][0] * m[0][1] + acc[0][1] * m[1][1]],
               [acc[1][0] * m[0][0] + acc[1][1] * m[1][0], acc[1][0] * m[0][1] + acc[1][1] * m[1][1]]]
    v = (x + 1, one)
    return (acc[0][0] * v[0] + acc[0][1] * v[1], acc[1][0] * v[0] + acc[1][1] * v[1])


@dataclass(frozen=True)
class KSinkBound:
    k: int
    x: int
    exact: Fraction
    envelope: int
    tcl_bound: int


def ksink_bound(E_count: int, k: int) -> KSinkBound:
    if k < 2 or E_count < k:
        raise ValueError("need k >= 2 and E_count >= k")
    x = E_count - k
    if x < 1:
        raise ValueError("need E_count - k >= 1")
    exact = line_circuit_potentials(k, x)[0]
    env = (x + 2) ** (k - 2) * (x + 1)
    if exact > env:
        raise PropertyViolation("line circuit pole value exceeds its envelope",
                                {"k": k, "x": x, "exact": str(exact), "envelope": env})
    return KSinkBound(k, x, exact, env, E_count * env)


@dataclass(frozen=True)
class LineCheck:
    ks: tuple[int, ...]
    exact: tuple[int, ...]
    analytic: tuple[Fraction, ...]
    envelope: tuple[int, ...]
    ratios: tuple[float, ...]
    analytic_ratios: tuple[float, ...]


def line_sandpile_impedance(k: int) -> int:
    """End-to-end sandpile impedance of the line of ``k`` sites."""
    from .graph import line
    return engine.sandpile_impedance_exact(line(k), 0, k - 1)


def line_sandpile_exponential_check(k: int, start: int = 2, min_ratio: float = 2.0,
                                    from_k: int = 5) -> LineCheck:
    """Simulated end-to-end impedance of lines ``start..k`` against the x=2 circuit.

    Successive simulated ratios must reach ``min_ratio`` from ``from_k`` on;
    otherwise :class:`PropertyViolation` is raised.
    """
    if k > 14:
        raise ValueError("simulation guard: k <= 14")
    ks = tuple(range(max(2, start), k + 1))
    exact = tuple(line_sandpile_impedance(j) for j in ks)
    analytic = tuple(line_circuit_potentials(j, 2)[0] for j in ks)
    env = tuple(4 ** (j - 2) * 3 for j in ks)
    ratios = tuple(exact[i + 1] / exact[i] for i in range(len(ks) - 1))
    aratios = tuple(float(analytic[i + 1] / analytic[i]) for i in range(len(ks) - 1))
    for i, r in enumerate(ratios):
        if ks[i] >= from_k and r < min_ratio:
            raise PropertyViolation("line impedance ratio below threshold",
                                    {"k": ks[i], "ratio": r})
    return LineCheck(ks, exact, analytic, env, ratios, aratios)
