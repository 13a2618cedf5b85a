"""Exact integer sandpile dynamics.

Configurations and score vectors are ``int64`` arrays indexed by ordinary
index (see :attr:`SandpileGraph.ordinary`). The default toppling policy is a
FIFO queue that fires a site ``h // d`` times at once; a slow random-order
policy that fires one toppling at a time is kept as an independent check of
the abelian property.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit

from .errors import HeightOverflow, NonTerminating, NotStable, PropertyViolation
from .graph import SandpileGraph, ordinary_component, ordinary_connected

HEIGHT_LIMIT = 1 << 60

OrderPolicy = Literal["fifo", "random"]


@dataclass(frozen=True)
class StabilizeResult:
    stable: np.ndarray
    score: np.ndarray
    topple_events: int


@dataclass(frozen=True)
class ToppleTimes:
    """When each site first toppled while grains were dropped on one source.

    ``particles[u]`` is the number of grains added when ``u`` first toppled
    (``-1`` if never); ``order[u]`` is the global index of that toppling in
    the firing sequence.
    """

    source: int
    particles: np.ndarray
    order: np.ndarray
    final: np.ndarray


# --- kernels --------------------------------------------------------------------


@njit(cache=True)
def _relax(h, z, deg, indptr, indices, mult, queue, inq, head, tail, first_p, first_o, step, events):
    """Drain the FIFO queue. Returns ``(events, status)``; status -1 on overflow."""
    m = h.shape[0]
    while head != tail:
        v = queue[head]
        head += 1
        if head == m + 1:
            head = 0
        inq[v] = False
        d = deg[v]
        if h[v] < d:
            continue
        k = h[v] // d
        h[v] -= k * d
        if z[v] == 0 and first_p.shape[0] > 0:
            first_p[v] = step
            first_o[v] = events
        z[v] += k
        events += k
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            h[u] += k * mult[p]
            if h[u] > 1152921504606846976:
                return events, -1
            if h[u] >= deg[u] and not inq[u]:
                inq[u] = True
                queue[tail] = u
                tail += 1
                if tail == m + 1:
                    tail = 0
    return events, 0


@njit(cache=True)
def _stabilize_fifo(h, z, deg, indptr, indices, mult):
    m = h.shape[0]
    queue = np.empty(m + 1, dtype=np.int64)
    inq = np.zeros(m, dtype=np.bool_)
    tail = 0
    for v in range(m):
        if h[v] >= deg[v]:
            queue[tail] = v
            tail += 1
            inq[v] = True
    empty = np.empty(0, dtype=np.int64)
    return _relax(h, z, deg, indptr, indices, mult, queue, inq, 0, tail, empty, empty, 0, 0)


@njit(cache=True)
def _drop_until_all_topple(h, z, deg, indptr, indices, mult, src, targets, max_steps):
    """Add grains at ``src`` one at a time until every target has toppled.

    Returns ``(steps, status)``; status 1 means ``max_steps`` was hit.
    """
    m = h.shape[0]
    queue = np.empty(m + 1, dtype=np.int64)
    inq = np.zeros(m, dtype=np.bool_)
    first_p = np.full(m, -1, dtype=np.int64)
    first_o = np.full(m, -1, dtype=np.int64)
    remaining = 0
    for u in range(m):
        if targets[u] and z[u] == 0:
            remaining += 1
    events = 0
    step = 0
    while remaining > 0:
        if step >= max_steps:
            return step, 1, first_p, first_o
        step += 1
        h[src] += 1
        if h[src] >= deg[src]:
            inq[src] = True
            queue[0] = src
            events, status = _relax(h, z, deg, indptr, indices, mult, queue, inq, 0, 1,
                                    first_p, first_o, step, events)
            if status < 0:
                return step, -1, first_p, first_o
            remaining = 0
            for u in range(m):
                if targets[u] and z[u] == 0:
                    remaining += 1
    return step, 0, first_p, first_o


# --- public API -----------------------------------------------------------------


def _as_config(g: SandpileGraph, c) -> np.ndarray:
    h = np.array(c, dtype=np.int64).reshape(-1)
    if h.shape[0] != g.n_ordinary:
        raise ValueError(f"configuration has {h.shape[0]} entries, graph has {g.n_ordinary} ordinary vertices")
    if (h < 0).any():
        raise ValueError("heights must be non-negative")
    if (h >= HEIGHT_LIMIT).any():
        raise HeightOverflow("height exceeds the 2**60 guard")
    return h


def empty_config(g: SandpileGraph) -> np.ndarray:
    return np.zeros(g.n_ordinary, dtype=np.int64)


def max_stable(g: SandpileGraph) -> np.ndarray:
    return g.ordinary_degree - 1


def unit(g: SandpileGraph, v: int, k: int = 1) -> np.ndarray:
    """Configuration with ``k`` grains on vertex id ``v``."""
    c = empty_config(g)
    c[g.index[v]] = k
    return c


def is_stable(g: SandpileGraph, c) -> bool:
    h = np.asarray(c)
    return bool((h < g.ordinary_degree).all())


def _random_relax(g: SandpileGraph, h: np.ndarray, seed) -> tuple[np.ndarray, int]:
    rng = np.random.default_rng(seed)
    deg = g.ordinary_degree
    indptr, indices, mult = g.csr
    z = np.zeros_like(h)
    events = 0
    unstable = set(np.flatnonzero(h >= deg).tolist())
    while unstable:
        pool = sorted(unstable)
        v = pool[int(rng.integers(len(pool)))]
        h[v] -= deg[v]
        z[v] += 1
        events += 1
        if h[v] < deg[v]:
            unstable.discard(v)
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            h[u] += mult[p]
            if h[u] >= deg[u]:
                unstable.add(int(u))
    return z, events


def apply_toppling(g: SandpileGraph, z: np.ndarray) -> np.ndarray:
    """Exact integer product ``L z`` with the grounded toppling matrix."""
    indptr, indices, mult = g.csr
    rows = np.repeat(np.arange(g.n_ordinary), np.diff(indptr))
    out = g.ordinary_degree * z
    np.subtract.at(out, rows, mult * z[indices])
    return out


def check_stabilization(g: SandpileGraph, c: np.ndarray, res: StabilizeResult) -> None:
    """Exact conservation and ``sigma(c) = c - L z`` checks."""
    absorbed = int(np.dot(res.score, g.sink_multiplicity))
    if int(c.sum()) != int(res.stable.sum()) + absorbed:
        raise PropertyViolation("grain conservation failed",
                                {"config": c.tolist(), "stable": res.stable.tolist()})
    if not np.array_equal(res.stable, c - apply_toppling(g, res.score)):
        raise PropertyViolation("stable != c - L z",
                                {"config": c.tolist(), "score": res.score.tolist()})
    if not is_stable(g, res.stable):
        raise PropertyViolation("result is not stable", {"config": c.tolist()})


def stabilize(g: SandpileGraph, c, order_policy: OrderPolicy = "fifo", seed=None,
              check: bool = True) -> StabilizeResult:
    """Topple ``c`` to its unique stable configuration.

    Returns the stable heights, the score vector (toppling counts) and the
    number of single topplings performed.
    """
    g.require_integer()
    c = _as_config(g, c)
    h = c.copy()
    if order_policy == "fifo":
        z = np.zeros_like(h)
        indptr, indices, mult = g.csr
        events, status = _stabilize_fifo(h, z, g.ordinary_degree, indptr, indices, mult)
        if status < 0:
            raise HeightOverflow("height overflow during stabilization")
    elif order_policy == "random":
        z, events = _random_relax(g, h, seed)
    else:
        raise ValueError(f"unknown order policy {order_policy!r}")
    res = StabilizeResult(h, z, int(events))
    if check:
        check_stabilization(g, c, res)
    return res


def topple_times(g: SandpileGraph, v: int, targets=None, max_steps: int = 1 << 40) -> ToppleTimes:
    """Drop grains on ``v`` one at a time, stabilizing after each, until every
    site in ``targets`` (default: ``v``'s ordinary component) has toppled."""
    g.require_integer()
    m = g.n_ordinary
    comp = ordinary_component(g, v)
    mask = np.zeros(m, dtype=np.bool_)
    if targets is None:
        for u in comp:
            mask[g.index[u]] = True
    else:
        for u in targets:
            if u not in comp:
                raise NonTerminating(f"vertex {u} is separated from {v} by the sink")
            mask[g.index[u]] = True
    h = np.zeros(m, dtype=np.int64)
    z = np.zeros(m, dtype=np.int64)
    indptr, indices, mult = g.csr
    steps, status, first_p, first_o = _drop_until_all_topple(
        h, z, g.ordinary_degree, indptr, indices, mult, int(g.index[v]), mask, max_steps)
    if status < 0:
        raise HeightOverflow("height overflow while dropping grains")
    if status > 0:
        raise NonTerminating(f"targets not all toppled after {max_steps} grains")
    return ToppleTimes(v, first_p, first_o, h)


def impedance_row(g: SandpileGraph, v: int) -> np.ndarray:
    """``R_s(v, w)`` for every ordinary ``w`` (float array, ``inf`` where
    the sink separates ``w`` from ``v``)."""
    tt = topple_times(g, v)
    out = np.full(g.n_ordinary, math.inf)
    hit = tt.particles >= 0
    out[hit] = tt.particles[hit] - 1
    return out


def sandpile_impedance_exact(g: SandpileGraph, v: int, w: int):
    """Largest number of grains droppable on ``v`` before ``w`` first topples.

    Returns an ``int``, or ``math.inf`` when the sink separates ``v`` from
    ``w``. ``R_s(v, v) = degree(v) - 1``.
    """
    if w not in ordinary_component(g, v):
        return math.inf
    tt = topple_times(g, v, targets=[w])
    return int(tt.particles[g.index[w]]) - 1


def last_toppler(g: SandpileGraph, v: int, check: bool = True) -> int:
    """Vertex whose first toppling comes last in the firing sequence.

    With ``check`` the result is required to be sink-adjacent and a
    :class:`PropertyViolation` is raised otherwise. The requirement does not
    hold in general: on ``sink - a - b`` with grains dropped on ``a``, the
    leaf ``b`` topples last.
    """
    if not ordinary_connected(g):
        raise NonTerminating("ordinary vertices are not connected; some site never topples")
    tt = topple_times(g, v)
    u = int(g.ordinary[int(np.argmax(tt.order))])
    if check and not g.is_sink_adjacent(u):
        raise PropertyViolation(f"last toppler {u} is not adjacent to the sink",
                                {"edges": [list(e) for e in g.edges()], "sink": g.sink,
                                 "source": v, "last": u})
    return u


def last_topplers(g: SandpileGraph, v: int) -> list[int]:
    """All vertices first toppling on the final grain."""
    if not ordinary_connected(g):
        raise NonTerminating("ordinary vertices are not connected; some site never topples")
    tt = topple_times(g, v)
    last = tt.particles.max()
    return [int(g.ordinary[i]) for i in np.flatnonzero(tt.particles == last)]


def heaviest_transient_stack(g: SandpileGraph, v: int, w: int) -> np.ndarray:
    """Stable configuration after ``R_s(v, w)`` grains dropped on ``v``."""
    r = sandpile_impedance_exact(g, v, w)
    if r == math.inf:
        raise NonTerminating(f"R_s({v}, {w}) is infinite")
    return stabilize(g, unit(g, v, r)).stable


def heaviest_transient_topup(g: SandpileGraph, v: int, w: int) -> np.ndarray:
    """Stack ``R_s(v, w)`` grains on ``v``, then fill every other site.

    Sites are visited in vertex order; each receives single grains until it
    reaches capacity, and a grain is rolled back if it would make ``w``
    topple.
    """
    c = heaviest_transient_stack(g, v, w)
    iw = g.index[w]
    cap = g.ordinary_degree - 1
    for i in range(g.n_ordinary):
        if i == iw:
            continue
        while c[i] < cap[i]:
            trial = c.copy()
            trial[i] += 1
            res = stabilize(g, trial, check=False)
            if res.score[iw] > 0:
                break
            c = res.stable
    return c


def scaling_commutation_check(g: SandpileGraph, c, k: int) -> bool:
    """``sigma(k c) == sigma(k sigma(c))``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    c = _as_config(g, c)
    s = stabilize(g, c).stable
    return bool(np.array_equal(stabilize(g, k * c).stable, stabilize(g, k * s).stable))


# --- recurrence -----------------------------------------------------------------


def _require_stable(g: SandpileGraph, c) -> np.ndarray:
    h = _as_config(g, c)
    if not is_stable(g, h):
        raise NotStable("configuration is not stable")
    return h


def is_recurrent_burning(g: SandpileGraph, c) -> bool:
    """Burning test: repeatedly burn sites holding at least as many grains
    as they have edges to unburnt ordinary sites."""
    g.require_integer()
    h = _require_stable(g, c)
    indptr, indices, mult = g.csr
    unburnt_edges = g.ordinary_degree - g.sink_multiplicity
    burnt = np.zeros(g.n_ordinary, dtype=bool)
    q = deque(int(i) for i in np.flatnonzero(h >= unburnt_edges))
    for i in q:
        burnt[i] = True
    count = len(q)
    while q:
        v = q.popleft()
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if burnt[u]:
                continue
            unburnt_edges[u] -= mult[p]
            if h[u] >= unburnt_edges[u]:
                burnt[u] = True
                count += 1
                q.append(int(u))
    return count == g.n_ordinary


def is_recurrent_sink_firing(g: SandpileGraph, c) -> bool:
    """Fire the sink once and check the configuration comes back."""
    g.require_integer()
    h = _require_stable(g, c)
    return bool(np.array_equal(stabilize(g, h + g.sink_multiplicity).stable, h))


def recurrent_set_bruteforce(g: SandpileGraph, limit: int = 200_000) -> set[tuple[int, ...]]:
    """Stable configurations reachable from the maximal one.

    The maximal stable configuration is recurrent and reachable from
    everything, so its forward orbit under grain addition is exactly the
    recurrent set.
    """
    g.require_integer()
    start = tuple(int(x) for x in max_stable(g))
    seen = {start}
    q = deque([start])
    while q:
        c = np.array(q.popleft(), dtype=np.int64)
        for i in range(g.n_ordinary):
            d = c.copy()
            d[i] += 1
            nxt = tuple(int(x) for x in stabilize(g, d, check=False).stable)
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > limit:
                    raise RuntimeError("state space too large for brute force")
                q.append(nxt)
    return seen


def stable_configurations(g: SandpileGraph):
    """Iterate over every stable configuration (as tuples)."""
    caps = [int(d) for d in g.ordinary_degree]
    for idx in np.ndindex(*caps):
        yield tuple(idx)
