"""Slow, independent reference implementations used only by the tests."""
from collections import deque
from fractions import Fraction

import numpy as np


def naive_stabilize(g, heights):
    """Single-site topplings, smallest unstable id first, pure Python ints."""
    h = {int(v): int(x) for v, x in zip(g.ordinary, heights)}
    deg = {int(v): int(d) for v, d in zip(g.ordinary, g.ordinary_degree)}
    z = {v: 0 for v in h}
    while True:
        todo = [v for v in sorted(h) if h[v] >= deg[v]]
        if not todo:
            break
        v = todo[0]
        h[v] -= deg[v]
        z[v] += 1
        for u, m in g.neighbors[v].items():
            if u != g.sink:
                h[u] += m
    return [h[int(v)] for v in g.ordinary], [z[int(v)] for v in g.ordinary]


def naive_impedance(g, v, w, cap=100_000):
    """Grains dropped on ``v`` one by one until ``w`` topples; count minus one."""
    iv = int(g.index[v])
    iw = int(g.index[w])
    h = [0] * g.n_ordinary
    for k in range(1, cap):
        h[iv] += 1
        h, z = naive_stabilize(g, h)
        if z[iw] > 0:
            return k - 1
    raise RuntimeError("cap reached")


def dense_potential(g, w):
    """Exact rational potentials by Gaussian elimination on the grounded system."""
    idx = [int(u) for u in g.ordinary]
    pos = {u: i for i, u in enumerate(idx)}
    m = len(idx)
    A = [[Fraction(0)] * (m + 1) for _ in range(m)]
    for u in idx:
        r = pos[u]
        if u == w:
            A[r][r] = Fraction(1)
            A[r][m] = Fraction(1)
            continue
        for x, mult in g.neighbors[u].items():
            c = Fraction(g.conductance(u, x)).limit_denominator(10**9)
            A[r][r] += c
            if x != g.sink:
                A[r][pos[x]] -= c
    for col in range(m):
        piv = next(r for r in range(col, m) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        for r in range(m):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return {u: A[pos[u]][m] / A[pos[u]][pos[u]] for u in idx}


def brute_recurrent(g):
    """Recurrent set as stable configurations reachable from every stable one
    (checked via reachability from the all-zero configuration's closure)."""
    caps = [int(d) for d in g.ordinary_degree]
    start = tuple(c - 1 for c in caps)
    seen = {start}
    q = deque([start])
    while q:
        c = q.popleft()
        for i in range(len(c)):
            d = list(c)
            d[i] += 1
            nxt = tuple(naive_stabilize(g, d)[0])
            if nxt not in seen:
                seen.add(nxt)
                q.append(nxt)
    return seen


def grid_potential_dense(n, i, j):
    """Numpy dense solve for a unit potential at (i, j) on GRID_n."""
    m = n * n
    L = np.zeros((m, m))
    for a in range(n):
        for b in range(n):
            v = a * n + b
            L[v, v] = 4
            for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                x, y = a + da, b + db
                if 0 <= x < n and 0 <= y < n:
                    L[v, x * n + y] -= 1
    s = (i - 1) * n + (j - 1)
    keep = [k for k in range(m) if k != s]
    rhs = -L[keep][:, s]
    x = np.zeros(m)
    x[s] = 1.0
    x[keep] = np.linalg.solve(L[np.ix_(keep, keep)], rhs)
    return x.reshape(n, n)
