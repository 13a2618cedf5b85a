"""Experiments specific to the square grid sandpile GRID_n.

Grid vertex ``(i, j)`` (1-based) has id ``(i-1)*n + (j-1)``, which is also
its ordinary index, so potential vectors reshape directly to ``(n, n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine, harmonic
from .graph import SandpileGraph, grid, grid_vertex

SLACK = 1e-12


@dataclass(frozen=True)
class GridField:
    """Values on the ``n x n`` grid; ``values[i-1, j-1]`` is site ``(i, j)``."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.n, self.n):
            raise ValueError(f"expected shape {(self.n, self.n)}, got {self.values.shape}")

    @classmethod
    def from_vector(cls, n: int, vec) -> "GridField":
        return cls(n, np.asarray(vec, dtype=object if _is_exact(vec) else float)[: n * n].reshape(n, n))

    def at(self, i: int, j: int):
        return self.values[i - 1, j - 1]


def _is_exact(vec) -> bool:
    return len(vec) > 0 and not isinstance(vec[0], (float, np.floating))


def _orient(f: GridField, corner: tuple[int, int]) -> np.ndarray:
    n = f.n
    v = f.values
    if corner[0] == n:
        v = v[::-1, :]
    elif corner[0] != 1:
        raise ValueError(f"{corner} is not a corner")
    if corner[1] == n:
        v = v[:, ::-1]
    elif corner[1] != 1:
        raise ValueError(f"{corner} is not a corner")
    return v


def _le(a, b, slack) -> bool:
    return a <= b + slack


def is_corner_monotone(f: GridField, corner: tuple[int, int] = (1, 1), slack: float = 0.0) -> bool:
    """Monotonicity relative to ``corner``.

    With the corner moved to ``(1, 1)``: a unit step perpendicular to the
    diagonal ``i = j`` that brings a site closer to the diagonal never
    decreases the value, and along the two grid edges through the corner the
    value never increases away from it.
    """
    v = _orient(f, corner)
    n = f.n
    for i in range(n):
        for j in range(n - 1):
            # (i, j+1) -> (i+1, j) is perpendicular to the diagonal
            if i + 1 < n:
                p, q = (i, j + 1), (i + 1, j)
                if abs(q[0] - q[1]) < abs(p[0] - p[1]):
                    if not _le(v[p], v[q], slack):
                        return False
                elif abs(q[0] - q[1]) > abs(p[0] - p[1]):
                    if not _le(v[q], v[p], slack):
                        return False
    for k in range(n - 1):
        if not _le(v[0, k + 1], v[0, k], slack) or not _le(v[k + 1, 0], v[k, 0], slack):
            return False
    return True


def is_center_monotone(f: GridField, slack: float = 0.0) -> bool:
    """Unit steps perpendicular to any of the four symmetry axes never
    decrease the value when moving closer to that axis."""
    v = f.values
    n = f.n
    mid = (n - 1) / 2

    def check(p, q, dist):
        dp, dq = dist(p), dist(q)
        if dq < dp:
            return _le(v[p], v[q], slack)
        if dq > dp:
            return _le(v[q], v[p], slack)
        return True

    axes = [
        ((0, 1), lambda p: abs(p[1] - mid)),           # vertical axis
        ((1, 0), lambda p: abs(p[0] - mid)),           # horizontal axis
        ((1, -1), lambda p: abs(p[0] - p[1])),         # main diagonal
        ((1, 1), lambda p: abs(p[0] + p[1] - (n - 1))),  # anti-diagonal
    ]
    for (di, dj), dist in axes:
        for i in range(n):
            for j in range(n):
                a, b = i + di, j + dj
                if 0 <= a < n and 0 <= b < n and not check((i, j), (a, b), dist):
                    return False
    return True


def is_diagonal_symmetric(f: GridField, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(f.values - f.values.T)) <= tol)


# --- potentials ------------------------------------------------------------------


def corner_field(n: int, g: SandpileGraph | None = None) -> GridField:
    g = g or grid(n)
    return GridField(n, harmonic.solve_potential(g, grid_vertex(n, 1, 1)).values.reshape(n, n))


def center_sites(n: int) -> list[tuple[int, int]]:
    if n % 2:
        c = (n + 1) // 2
        return [(c, c)]
    h = n // 2
    return [(h, h), (h, h + 1), (h + 1, h), (h + 1, h + 1)]


def center_field(n: int, g: SandpileGraph | None = None) -> GridField:
    """Potential with unit source at the center (``(n/2, n/2)`` when n is even)."""
    g = g or grid(n)
    i, j = center_sites(n)[0]
    return GridField(n, harmonic.solve_potential(g, grid_vertex(n, i, j)).values.reshape(n, n))


def corner_jacobi_iterates(n: int, iterations: int, exact: bool) -> list[GridField]:
    g = grid(n)
    res = harmonic.jacobi_solve(g, {grid_vertex(n, 1, 1): 1}, exact=exact, record=True,
                                iterations=iterations)
    return [GridField.from_vector(n, it) for it in res.iterates]


@dataclass(frozen=True)
class ProductDistribution:
    n: int
    field: GridField
    sources: dict
    total_power: int
    max_error: float


def product_distribution(n: int, tol: float = 1e-9) -> ProductDistribution:
    """Drive the top/right edges so that ``V(i, j) = i * j`` is harmonic.

    Each sink edge of GRID_n becomes a unit resistor to a fixed terminal:
    ghosts at ``i = 0`` or ``j = 0`` are grounded, the ghost beyond ``(n, j)``
    sits at ``(n+1) j`` and the one beyond ``(i, n)`` at ``i (n+1)``. The
    corner ``(n, n)`` sees two such terminals, i.e. ``n^2 + n`` through a
    double edge.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    g = grid(n)
    b = np.zeros(n * n)
    sources: dict[tuple[int, int], int] = {}
    for k in range(1, n + 1):
        b[grid_vertex(n, n, k)] += (n + 1) * k
        b[grid_vertex(n, k, n)] += k * (n + 1)
    for k in range(1, n):
        sources[(n, k)] = (n + 1) * k
        sources[(k, n)] = k * (n + 1)
    sources[(n, n)] = n * n + n
    V = harmonic._lu(g).solve(b).reshape(n, n)
    expect = np.outer(np.arange(1, n + 1), np.arange(1, n + 1)).astype(float)
    err = float(np.max(np.abs(V - expect)))
    if err > tol * n * n:
        raise AssertionError(f"product distribution off by {err}")
    return ProductDistribution(n, GridField(n, V), sources, sum(sources.values()), err)


def corner_to_center_response(n: int, g: SandpileGraph | None = None) -> float:
    """``1 / pi_(1,1)(center)``; for even n the smallest of the four central
    potentials is used."""
    f = corner_field(n, g)
    return 1.0 / min(f.at(i, j) for i, j in center_sites(n))


def center_over_edge(n: int, g: SandpileGraph | None = None) -> tuple[float, float]:
    """(center potential, largest potential on the two edges opposite the
    corner) with unit source at ``(1, 1)``."""
    f = corner_field(n, g)
    center = min(f.at(i, j) for i, j in center_sites(n))
    edge = max(float(f.values[n - 1, :].max()), float(f.values[:, n - 1].max()))
    return center, edge


def extra_sink_edge_factor(n: int, i: int, j: int) -> float:
    """Injected current at boundary site ``(i, j)`` after adding one more sink
    edge there, divided by the current before."""
    g = grid(n)
    w = grid_vertex(n, i, j)
    before = harmonic.solve_potential(g, w).injected_current
    adj = dict(g.adjacency)
    key = (w, g.sink)
    adj[key] = adj.get(key, 0) + 1
    g2 = SandpileGraph(g.vertex_count, g.sink, adj, None, g.labels)
    after = harmonic.solve_potential(g2, w).injected_current
    return after / before


# --- potential profile -----------------------------------------------------------------


@dataclass(frozen=True)
class GammaCheck:
    n: int
    source: tuple[int, int]
    gamma: float
    injected: float
    sink_current: float
    ring_sums: list
    ok: bool


def ring_sums(f: GridField) -> list[float]:
    """Sums of values on the concentric square rings, outermost first."""
    n = f.n
    out = []
    for k in range((n + 1) // 2):
        lo, hi = k, n - 1 - k
        if lo == hi:
            out.append(float(f.values[lo, lo]))
            continue
        ring = np.concatenate([f.values[lo, lo:hi + 1], f.values[hi, lo:hi + 1],
                               f.values[lo + 1:hi, lo], f.values[lo + 1:hi, hi]])
        out.append(math.fsum(ring))
    return out


def gamma_grid_check(n: int, i: int, j: int, g: SandpileGraph | None = None, slack: float = 1e-9) -> GammaCheck:
    """Check ``injected <= 4`` and ``Gamma <= 2 n * injected`` for a boundary source."""
    g = g or grid(n)
    w = grid_vertex(n, i, j)
    if not g.is_sink_adjacent(w):
        raise ValueError(f"({i},{j}) is not on the boundary")
    pot = harmonic.solve_potential(g, w)
    gamma = harmonic.potential_profile(g, w, pot).gamma
    cur = pot.injected_current
    sink_cur = math.fsum(g.sink_multiplicity * pot.values)
    rs = ring_sums(GridField(n, pot.values.reshape(n, n)))
    ok = cur <= 4 + slack and gamma <= 2 * n * cur + slack
    return GammaCheck(n, (i, j), gamma, cur, sink_cur, rs, ok)


def boundary_sites(n: int) -> list[tuple[int, int]]:
    out = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i in (1, n) or j in (1, n)]
    return out


def fundamental_boundary(n: int) -> list[tuple[int, int]]:
    """Boundary sites up to the grid's dihedral symmetry: ``(1, 1) .. (1, ceil(n/2))``."""
    return [(1, j) for j in range(1, (n + 1) // 2 + 1)]


# --- pipeline --------------------------------------------------------------------------------


def fit_exponent(ns, values) -> float:
    """Least-squares slope of ``log value`` against ``log n``."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class GridReport:
    n: int
    direct: float
    direct_pair: tuple
    chain: float
    beta: float
    corner_center_min: float
    gamma_max: float
    injected_max: float
    min_pi: float
    k_ratio: float
    simulated: float | None = None
    simulated_pair: tuple | None = None
    extras: dict = field(default_factory=dict)


def fundamental_sites(n: int) -> list[tuple[int, int]]:
    """All sites up to dihedral symmetry: ``i <= j <= ceil(n/2)``."""
    h = (n + 1) // 2
    return [(i, j) for i in range(1, h + 1) for j in range(i, h + 1)]


def simulated_max_impedance(n: int, g: SandpileGraph | None = None) -> tuple[int, tuple]:
    """Largest exact ``R_s(v, w)`` over all ordered pairs, sources taken up to
    the grid's symmetry."""
    g = g or grid(n)
    best, arg = -1, None
    for (i, j) in fundamental_sites(n):
        v = grid_vertex(n, i, j)
        row = engine.impedance_row(g, v)
        k = int(np.argmax(row))
        if row[k] > best:
            best, arg = int(row[k]), ((i, j), divmod(k, n))
    (a, b) = arg[1]
    return best, (arg[0], (a + 1, b + 1))


def grid_tcl_pipeline(n: int, simulate: bool | None = None) -> GridReport:
    """Three estimates of the worst single-site impedance on GRID_n.

    ``direct`` is the largest ``Gamma(w)/pi_w(v)`` over boundary pairs.
    ``chain`` replaces each factor by what the triangle inequality and
    reciprocity give: ``2 n i_max / (beta * m^2)`` where ``m`` is the smallest
    potential anywhere from a unit source at a central site ``c`` and
    ``beta = min_w R_eff(s,c)/R_eff(s,w)`` over boundary ``w``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    g = grid(n)
    est = harmonic.tcl_upper_estimate(g, "boundary")
    lab = lambda v: (v // n + 1, v % n + 1)
    ci, cj = center_sites(n)[0]
    c = grid_vertex(n, ci, cj)
    m = float(harmonic.solve_potential(g, c).values.min())
    r_sc = harmonic.effective_resistance(g, g.sink, c)
    bidx = list(g.boundary)
    P, inj = harmonic.potential_matrix(g, bidx)
    # R_eff(s, w) for a single source is 1/injected current
    beta = min(r_sc * inj)
    gam = [harmonic._gamma(g, row) for row in P]
    gamma_max, inj_max = max(gam), float(inj.max())
    min_pi = float(P[:, bidx].min())
    chain = 2 * n * inj_max / (beta * m * m)
    p = corner_to_center_response(n, g)
    k_ratio = (1.0 / min_pi) / (p * p / beta)
    rep = dict(n=n, direct=est.value, direct_pair=(lab(est.pair[0]), lab(est.pair[1])), chain=chain,
               beta=beta, corner_center_min=m, gamma_max=gamma_max, injected_max=inj_max,
               min_pi=min_pi, k_ratio=k_ratio)
    if simulate is None:
        simulate = n <= 12
    if simulate:
        val, pair = simulated_max_impedance(n, g)
        rep.update(simulated=val, simulated_pair=pair)
    return GridReport(**rep)


@dataclass(frozen=True)
class Probe:
    n: int
    pair: tuple
    value: float


def lower_bound_probe(n: int, g: SandpileGraph | None = None) -> Probe:
    """Worst-response (corner, opposite edge) pair and its certified bound.

    Minimises ``pi_w((1,1))`` over ``w`` on the edges ``i = n`` or ``j = n``
    and returns ``1/pi_w(v) - 1``, a lower bound on ``R_s((1,1), w)``.
    """
    g = g or grid(n)
    v = grid_vertex(n, 1, 1)
    sites = sorted({(n, k) for k in range(1, n + 1)} | {(k, n) for k in range(1, n + 1)})
    ws = [grid_vertex(n, i, j) for i, j in sites]
    P, _ = harmonic.potential_matrix(g, ws)
    col = P[:, g.index[v]]
    k = int(np.argmin(col))
    return Probe(n, ((1, 1), sites[k]), float(1.0 / col[k] - 1.0))


# --- spectral expression ---------------------------------------------------------------------


def spectral_terms(n: int) -> list[float]:
    out = []
    h = math.pi / (2 * n)
    for a in range(n):
        for b in range(a + 1, n):
            num = (math.sin((a - b) * h) ** 2 * math.sin((a + b) * h) ** 2
                   * math.cos(a * h) ** 2 * math.cos(b * h) ** 2)
            den = 4 - 2 * math.cos(a * math.pi / n) - 2 * math.cos(b * math.pi / n)
            sign = -1.0 if (a + b) % 2 == 0 else 1.0
            out.append(sign * num / den)
    return out


def spectral_corner_corner(n: int) -> float:
    """Alternating double sum over ``0 <= a < b <= n-1``, divided by ``n^2``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return math.fsum(spectral_terms(n)) / (n * n)
