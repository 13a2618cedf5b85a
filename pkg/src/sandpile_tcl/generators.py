"""Seeded random sandpile graphs for property sweeps."""
from __future__ import annotations

import numpy as np

from .graph import SandpileGraph, build_graph


def random_sandpile(seed, n_ordinary: int | None = None, max_ordinary: int = 12,
                    max_degree: int | None = None, edge_prob: float = 0.3,
                    multi_prob: float = 0.1, sink_prob: float = 0.35) -> SandpileGraph:
    """Random connected sandpile whose ordinary vertices induce a connected graph.

    Vertices ``0..m-1`` are ordinary and ``m`` is the sink. A random spanning
    tree keeps the ordinary part connected; extra edges, parallel edges and
    sink edges are added at random subject to ``max_degree``.
    """
    rng = np.random.default_rng(seed)
    m = int(n_ordinary if n_ordinary is not None else rng.integers(1, max_ordinary + 1))
    cap = max_degree if max_degree is not None else 1 << 30
    if cap < 2 and m > 2:
        raise ValueError("max_degree < 2 cannot keep more than two ordinary vertices connected")
    sink = m
    deg = np.zeros(m + 1, dtype=np.int64)
    mult: dict[tuple[int, int], int] = {}

    def add(u, v):
        k = (min(u, v), max(u, v))
        mult[k] = mult.get(k, 0) + 1
        deg[u] += 1
        deg[v] += 1

    order = rng.permutation(m)
    for t in range(1, m):
        choices = [int(order[s]) for s in range(t) if deg[order[s]] < cap]
        add(int(order[t]), int(rng.choice(choices)))
    # a tree leaf always has spare degree, so the sink gets at least one edge
    add(int(rng.choice([u for u in range(m) if deg[u] < cap])), sink)
    for u in range(m):
        for v in range(u + 1, m):
            if rng.random() < edge_prob and deg[u] < cap and deg[v] < cap:
                add(u, v)
                if rng.random() < multi_prob and deg[u] < cap and deg[v] < cap:
                    add(u, v)
    for u in range(m):
        if rng.random() < sink_prob and deg[u] < cap:
            add(u, sink)
    edges = [(u, v) for (u, v), k in sorted(mult.items()) for _ in range(k)]
    return build_graph(edges, sink, vertex_count=m + 1)
