"""Potentials, effective resistance and the LP-duality bounds on impedance.

``pi_w(u)`` is the potential at ``u`` when the sink is grounded and ``w`` is
held at unit potential. All solves use a direct sparse LU factorization of
the grounded Laplacian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from .errors import InfeasibleCertificate, InfiniteBound, MaxIterations, SingularSystem
from .graph import SandpileGraph, grounded_laplacian, ordinary_component, ordinary_connected

Direction = Literal["upper", "lower"]


@dataclass(frozen=True)
class PotentialVector:
    """``pi_w`` over ordinary indices plus the current needed to hold ``w`` at 1."""

    source: int
    values: np.ndarray
    injected_current: float
    graph: SandpileGraph = field(repr=False, compare=False)

    def at(self, v: int) -> float:
        return float(self.values[self.graph.index[v]])


@dataclass(frozen=True)
class ProfileReport:
    gamma: float
    per_vertex: np.ndarray


@dataclass(frozen=True)
class DualCertificate:
    """Explicit dual-feasible point for one of the impedance LPs."""

    v: int
    w: int
    direction: Direction
    Y: np.ndarray
    Yprime: float
    objective: float
    max_violation: float


@dataclass(frozen=True)
class TclEstimate:
    value: float
    pair: tuple[int, int]
    relaxed: float
    pairs_checked: int


@dataclass(frozen=True)
class JacobiResult:
    values: list
    iterations: int
    iterates: list = field(default_factory=list, repr=False)


# --- linear algebra ------------------------------------------------------------


def _lu(g: SandpileGraph):
    lu = g.__dict__.get("_grounded_lu")
    if lu is None:
        lu = splu(grounded_laplacian(g))
        g.__dict__["_grounded_lu"] = lu
    return lu


def _L(g: SandpileGraph) -> sp.csc_matrix:
    L = g.__dict__.get("_grounded_L")
    if L is None:
        L = grounded_laplacian(g)
        g.__dict__["_grounded_L"] = L
    return L


def weighted_degree(g: SandpileGraph) -> np.ndarray:
    """Conductance degree of each ordinary vertex."""
    return np.asarray(_L(g).diagonal()).copy()


def solve_potential(g: SandpileGraph, w: int) -> PotentialVector:
    """Clamp ``w`` to 1 and the sink to 0, then solve for the rest."""
    if w == g.sink:
        raise ValueError("source must be an ordinary vertex")
    L = _L(g)
    iw = int(g.index[w])
    m = g.n_ordinary
    pi = np.zeros(m)
    pi[iw] = 1.0
    rest = np.array([i for i in range(m) if i != iw], dtype=np.int64)
    if len(rest):
        A = L[rest][:, rest].tocsc()
        b = -np.asarray(L[rest][:, [iw]].todense()).ravel()
        x = spsolve(A, b)
        pi[rest] = np.atleast_1d(x)
    if not np.isfinite(pi).all():
        raise SingularSystem("grounded solve produced non-finite values")
    injected = float((L[[iw], :] @ pi)[0])
    return PotentialVector(w, pi, injected, g)


def potential_matrix(g: SandpileGraph, sources) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``pi_w`` for each source, from columns of the grounded Green's
    function. Returns ``(P, injected)``."""
    lu = _lu(g)
    idx = np.array([g.index[w] for w in sources], dtype=np.int64)
    E = np.zeros((g.n_ordinary, len(idx)))
    E[idx, np.arange(len(idx))] = 1.0
    G = lu.solve(E)
    diag = G[idx, np.arange(len(idx))]
    if not (np.isfinite(G).all() and (diag > 0).all()):
        raise SingularSystem("grounded Green's function is degenerate")
    P = (G / diag).T
    P[np.arange(len(idx)), idx] = 1.0
    return P, 1.0 / diag


def solve_currents(g: SandpileGraph, injections: Mapping[int, float]) -> np.ndarray:
    """Potentials (sink grounded) for net currents injected at ordinary vertices."""
    b = np.zeros(g.n_ordinary)
    for v, i in injections.items():
        if v != g.sink:
            b[g.index[v]] += i
    return _lu(g).solve(b)


def effective_resistance(g: SandpileGraph, u: int, v: int) -> float:
    if u == v:
        raise ValueError("effective resistance needs two distinct vertices")
    inj = {u: 1.0, v: -1.0}
    x = solve_currents(g, inj)
    pu = 0.0 if u == g.sink else x[g.index[u]]
    pv = 0.0 if v == g.sink else x[g.index[v]]
    return float(pu - pv)


def superposition_check(g: SandpileGraph, a: Mapping[int, float], b: Mapping[int, float],
                        tol: float = 1e-10) -> bool:
    both = dict(a)
    for k, val in b.items():
        both[k] = both.get(k, 0.0) + val
    lhs = solve_currents(g, both)
    rhs = solve_currents(g, a) + solve_currents(g, b)
    return bool(np.max(np.abs(lhs - rhs), initial=0.0) <= tol * max(1.0, np.max(np.abs(lhs), initial=0.0)))


def check_max_principle(g: SandpileGraph, pot: PotentialVector, slack: float = 1e-12) -> bool:
    """Every non-pole value sits inside the range of its neighbours."""
    for v in g.ordinary:
        v = int(v)
        if v == pot.source:
            continue
        nb = [0.0 if u == g.sink else pot.at(u) for u in g.neighbors[v]]
        x = pot.at(v)
        if x < min(nb) - slack or x > max(nb) + slack:
            return False
    return True


# --- profile and bounds ----------------------------------------------------------


def _gamma(g: SandpileGraph, pi: np.ndarray) -> float:
    return math.fsum((g.ordinary_degree - 1) * pi)


def potential_profile(g: SandpileGraph, w: int, pot: PotentialVector | None = None) -> ProfileReport:
    pot = pot or solve_potential(g, w)
    per = (g.ordinary_degree - 1) * pot.values
    return ProfileReport(_gamma(g, pot.values), per)


def _pole_value(g: SandpileGraph, v: int, w: int, pot: PotentialVector) -> float:
    if v not in ordinary_component(g, w):
        raise InfiniteBound(f"pi_{w}({v}) = 0: the sink separates {v} from {w}")
    pv = pot.at(v)
    if not pv > 0.0:
        raise InfiniteBound(f"pi_{w}({v}) underflowed to zero")
    return pv


def impedance_upper_bound(g: SandpileGraph, v: int, w: int, pot: PotentialVector | None = None) -> float:
    """``Gamma_S(w) / pi_w(v)``."""
    pot = pot or solve_potential(g, w)
    pv = _pole_value(g, v, w, pot)
    return _gamma(g, pot.values) / pv


def impedance_lower_bound(g: SandpileGraph, v: int, w: int, pot: PotentialVector | None = None) -> float:
    """``1 / pi_w(v) - 1``."""
    pot = pot or solve_potential(g, w)
    pv = _pole_value(g, v, w, pot)
    return 1.0 / pv - 1.0


def _dual_residual(g: SandpileGraph, Y: np.ndarray, Yp: float, iw: int) -> np.ndarray:
    # sum_{u'~u} c Y(u') - d(u) Y(u), plus Y' on the row of w
    r = -(_L(g) @ Y)
    r[iw] += Yp
    return r


def dual_certificate(g: SandpileGraph, v: int, w: int, direction: Direction,
                     pot: PotentialVector | None = None, tol: float = 1e-9) -> DualCertificate:
    """Build ``Y = pi_w / pi_w(v)``, ``Y' = injected / pi_w(v)`` and verify it.

    The upper system needs every dual row ``>= 0`` and ``Y(v) >= 1``; the
    lower one needs rows ``<= 0`` and ``Y(v) <= 1``. Violations are measured
    relative to ``max(1, max Y * max degree)``.
    """
    pot = pot or solve_potential(g, w)
    pv = _pole_value(g, v, w, pot)
    iv, iw = int(g.index[v]), int(g.index[w])
    Y = pot.values / pv
    Yp = pot.injected_current / pv
    r = _dual_residual(g, Y, Yp, iw)
    scale = max(1.0, float(np.max(np.abs(Y))) * float(np.max(weighted_degree(g))))
    if direction == "upper":
        viol = max(float(np.max(-r, initial=0.0)), 1.0 - Y[iv])
        objective = _gamma(g, pot.values) / pv
    elif direction == "lower":
        viol = max(float(np.max(r, initial=0.0)), Y[iv] - 1.0)
        objective = 1.0 / pv
    else:
        raise ValueError(f"unknown direction {direction!r}")
    viol = max(viol, float(np.max(-Y, initial=0.0)), -Yp, 0.0) / scale
    if viol > tol:
        raise InfeasibleCertificate(f"{direction} certificate for ({v},{w}) violates by {viol:.3e}")
    return DualCertificate(v, w, direction, Y, Yp, objective, viol)


def certificate_objective_direct(g: SandpileGraph, cert: DualCertificate) -> float:
    """Dual objective evaluated straight from ``Y`` (differs from
    :attr:`DualCertificate.objective` only by rounding)."""
    if cert.direction == "upper":
        return math.fsum((g.ordinary_degree - 1) * cert.Y)
    return float(cert.Y[g.index[cert.w]])


def degree_bounded_estimate(g: SandpileGraph, v: int, w: int,
                            pot: PotentialVector | None = None) -> tuple[float, float, float]:
    """``E = sum_u pi_w(u) / pi_w(v)`` with the sandwich ``[E/(D+1), E(D-1)]``."""
    pot = pot or solve_potential(g, w)
    pv = _pole_value(g, v, w, pot)
    est = math.fsum(pot.values) / pv
    delta = g.max_degree
    return est, est / (delta + 1), est * (delta - 1)


def height_weighted_lower_bound(g: SandpileGraph, v: int, w: int, h,
                                pot: PotentialVector | None = None) -> float:
    """``sum_u h(u) pi_w(u) / pi_w(v)``."""
    pot = pot or solve_potential(g, w)
    pv = _pole_value(g, v, w, pot)
    return math.fsum(np.asarray(h, dtype=float) * pot.values) / pv


def indicator_lower_bound(g: SandpileGraph, v: int, w: int, h,
                          pot: PotentialVector | None = None) -> float:
    """Same as :func:`height_weighted_lower_bound` with ``h`` replaced by ``[h >= 1]``."""
    return height_weighted_lower_bound(g, v, w, (np.asarray(h) >= 1).astype(float), pot)


def tcl_upper_estimate(g: SandpileGraph,
                       pairs: Literal["boundary", "source-boundary", "all"] = "boundary") -> TclEstimate:
    """Largest ``Gamma_S(w)/pi_w(v)`` over ordered pairs ``(v, w)``.

    ``"boundary"`` takes both ends sink-adjacent, ``"source-boundary"`` only
    ``v`` (lossless, since ``pi_w`` attains its minimum next to the sink) and
    ``"all"`` every pair. ``relaxed`` is ``|E| * max 1/pi_w(v)`` over the same
    pairs.
    """
    if not ordinary_connected(g):
        raise InfiniteBound("ordinary vertices are not connected")
    if pairs not in ("boundary", "source-boundary", "all"):
        raise ValueError(f"unknown pair set {pairs!r}")
    every = [int(u) for u in g.ordinary]
    vs = every if pairs == "all" else list(g.boundary)
    ws = list(g.boundary) if pairs == "boundary" else every
    vidx = np.array([g.index[u] for u in vs], dtype=np.int64)
    best, arg, worst_inv = -math.inf, (vs[0], ws[0]), 0.0
    for start in range(0, len(ws), 256):
        chunk = ws[start:start + 256]
        P, _ = potential_matrix(g, chunk)
        for row, w in zip(P, chunk):
            sub = row[vidx]
            if not (sub > 0).all():
                raise InfiniteBound(f"a potential from {w} underflowed to zero")
            k = int(np.argmin(sub))
            val = _gamma(g, row) / sub[k]
            if val > best:
                best, arg = val, (vs[k], w)
            worst_inv = max(worst_inv, 1.0 / sub[k])
    return TclEstimate(float(best), arg, float(g.edge_count * worst_inv), len(vs) * len(ws))


# --- potential identities ------------------------------------------------------------


def check_triangle_inequality(g: SandpileGraph, i: int, j: int, k: int, slack: float = 1e-9) -> bool:
    """``pi_i(j) * pi_j(k) <= pi_i(k)``."""
    pij = solve_potential(g, i).at(j)
    pjk = solve_potential(g, j).at(k)
    pik = solve_potential(g, i).at(k)
    return pij * pjk <= pik + slack


def check_reciprocity(g: SandpileGraph, t: int, v: int, rtol: float = 1e-8) -> bool:
    """``R_eff(s,t) pi_t(v) == R_eff(s,v) pi_v(t)``."""
    if t == v:
        return True
    s = g.sink
    lhs = effective_resistance(g, s, t) * solve_potential(g, t).at(v)
    rhs = effective_resistance(g, s, v) * solve_potential(g, v).at(t)
    return math.isclose(lhs, rhs, rel_tol=rtol, abs_tol=1e-300)


def sandpile_reciprocity_bound(g: SandpileGraph, v: int, w: int, p) -> float:
    """``2|E| R_eff(v,s)/R_eff(w,s) * p``."""
    s = g.sink
    return 2 * g.edge_count * effective_resistance(g, v, s) / effective_resistance(g, w, s) * p


# --- Jacobi iteration ----------------------------------------------------------------


def jacobi_solve(g: SandpileGraph, boundary_values: Mapping[int, float], tolerance: float = 1e-12,
                 max_iterations: int = 1_000_000, exact: bool = False, record: bool = False,
                 iterations: int | None = None) -> JacobiResult:
    """Neighbour-averaging iteration from zero with fixed boundary values.

    The sink is held at 0 unless listed in ``boundary_values``. Values are
    returned over all vertex ids. In ``exact`` mode arithmetic is in
    :class:`fractions.Fraction`; pass ``iterations`` to run a fixed count
    instead of iterating to ``tolerance``.
    """
    if not boundary_values and g.sink is None:
        raise ValueError("boundary set must be non-empty")
    n = g.vertex_count
    fixed = {g.sink: 0}
    fixed.update(boundary_values)
    free = [u for u in range(n) if u not in fixed]
    nbrs = [[(u, g.conductance(v, u)) for u in g.neighbors[v]] for v in range(n)]
    if exact:
        zero = Fraction(0)
        cur = [zero] * n
        for u, val in fixed.items():
            cur[u] = Fraction(val)
        deg = [sum((Fraction(c) for _, c in nbrs[v]), zero) for v in range(n)]
        weights = [[(u, Fraction(c)) for u, c in nbrs[v]] for v in range(n)]
    else:
        cur = np.zeros(n)
        for u, val in fixed.items():
            cur[u] = float(val)
        rows, cols, vals = [], [], []
        for v in free:
            d = sum(c for _, c in nbrs[v])
            for u, c in nbrs[v]:
                rows.append(v)
                cols.append(u)
                vals.append(c / d)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        free_mask = np.zeros(n, dtype=bool)
        free_mask[free] = True
    history = [list(cur)] if record else []
    limit = iterations if iterations is not None else max_iterations
    for t in range(1, limit + 1):
        if exact:
            nxt = list(cur)
            for v in free:
                nxt[v] = sum((c * cur[u] for u, c in weights[v]), zero) / deg[v]
            change = max((abs(nxt[v] - cur[v]) for v in free), default=zero)
        else:
            nxt = cur.copy()
            nxt[free_mask] = (A @ cur)[free_mask]
            change = float(np.max(np.abs(nxt - cur), initial=0.0))
        cur = nxt
        if record:
            history.append(list(cur))
        if iterations is None and change < tolerance:
            return JacobiResult(list(cur), t, history)
    if iterations is not None:
        return JacobiResult(list(cur), iterations, history)
    raise MaxIterations(f"no convergence to {tolerance} within {max_iterations} sweeps")
