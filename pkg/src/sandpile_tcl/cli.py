"""Command-line entry point.

Exit codes: 0 success, 1 bad input, 2 a checked property failed. Reports go
to ``--out`` (CSV or JSON by subcommand) or stdout. Reals are written with
17 significant digits so reports round-trip exactly.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import engine, gridlab, harmonic, planar, reductions
from .errors import PropertyViolation, SandpileError, SchemaError
from .generators import random_sandpile
from .graph import (PlanarEmbedding, SandpileGraph, build_graph, grid, grid_vertex, honeycomb,
                    line, triangular)

REFERENCE_4X4 = ((3, 3, 3, 0), (3, 0, 3, 2), (3, 3, 2, 3), (0, 2, 3, 2))


class BadInput(Exception):
    pass


# -- formatting ------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else fmt(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def thread_count() -> int:
    env = os.environ.get("SANDPILE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise BadInput(f"SANDPILE_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise BadInput("SANDPILE_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


# -- graph I/O -------------------------------------------------------------

def graph_to_json(g: SandpileGraph) -> dict:
    d = {"vertices": g.vertex_count, "sink": g.sink, "edges": [list(e) for e in g.edges()]}
    if g.conductances is not None:
        d["conductances"] = [[u, v, c] for (u, v), c in sorted(g.conductances.items())]
    if g.embedding is not None:
        d["embedding"] = [list(r) for r in g.embedding.rotation]
        if g.embedding.outer_face is not None:
            d["outer_face"] = g.embedding.outer_face
    return d


def save_graph(g: SandpileGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_json(g), fh, sort_keys=True, indent=1)
        fh.write("\n")


def _field(d, key, kind, where="top level"):
    if key not in d:
        raise SchemaError(f"missing field {key!r} at {where}")
    val = d[key]
    if kind is int and (not isinstance(val, int) or isinstance(val, bool)):
        raise SchemaError(f"field {key!r} must be an integer")
    if kind is list and not isinstance(val, list):
        raise SchemaError(f"field {key!r} must be a list")
    return val


def graph_from_json(d) -> SandpileGraph:
    if not isinstance(d, dict):
        raise SchemaError("graph JSON must be an object")
    n = _field(d, "vertices", int)
    sink = _field(d, "sink", int)
    edges = []
    for i, e in enumerate(_field(d, "edges", list)):
        if not (isinstance(e, list) and len(e) in (2, 3) and all(isinstance(x, int) for x in e)):
            raise SchemaError(f"edges[{i}] must be [u, v] or [u, v, multiplicity] of integers")
        edges.append(tuple(e))
    cond = None
    if "conductances" in d:
        cond = {}
        for i, c in enumerate(_field(d, "conductances", list)):
            if not (isinstance(c, list) and len(c) == 3):
                raise SchemaError(f"conductances[{i}] must be [u, v, value]")
            cond[(int(c[0]), int(c[1]))] = float(c[2])
    emb = None
    if "embedding" in d:
        rot = _field(d, "embedding", list)
        if len(rot) != n or not all(isinstance(r, list) for r in rot):
            raise SchemaError("embedding must list one rotation per vertex")
        outer = d.get("outer_face")
        if outer is not None and not isinstance(outer, int):
            raise SchemaError("outer_face must be an integer")
        emb = PlanarEmbedding(tuple(tuple(int(x) for x in r) for r in rot), outer)
    try:
        return build_graph(edges, sink, vertex_count=n, conductances=cond, embedding=emb)
    except SandpileError as exc:
        raise SchemaError(f"invalid graph: {exc}") from exc


def load_graph(path: str) -> SandpileGraph:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return graph_from_json(d)


BUILDERS = {"grid": grid, "honeycomb": honeycomb, "triangular": triangular, "line": line}


def resolve_graph(spec: str) -> SandpileGraph:
    """``grid:4``, ``honeycomb:2``, ``triangular:2``, ``line:5``, ``random:SEED[:M]`` or a path."""
    name, _, rest = spec.partition(":")
    if name in BUILDERS and rest:
        try:
            return BUILDERS[name](int(rest))
        except ValueError as exc:
            raise BadInput(f"bad size in {spec!r}") from exc
    if name == "random" and rest:
        parts = rest.split(":")
        try:
            seed = int(parts[0])
            m = int(parts[1]) if len(parts) > 1 else None
        except ValueError as exc:
            raise BadInput(f"bad random spec {spec!r}") from exc
        return random_sandpile(seed, n_ordinary=m)
    if os.path.exists(spec):
        return load_graph(spec)
    raise BadInput(f"unknown graph {spec!r}")


def vertex_arg(g: SandpileGraph, text: str) -> int:
    """Vertex id, or ``i,j`` grid coordinates when the graph is a grid."""
    try:
        if "," in text:
            i, j = (int(t) for t in text.split(","))
            n = math.isqrt(g.n_ordinary)
            return grid_vertex(n, i, j)
        v = int(text)
    except ValueError as exc:
        raise BadInput(f"bad vertex {text!r}") from exc
    if not (0 <= v < g.vertex_count) or v == g.sink:
        raise BadInput(f"vertex {v} is not an ordinary vertex")
    return v


def int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def violation(instance: dict, message: str) -> int:
    sys.stdout.write(dumps({"violation": message, "instance": instance}) + "\n")
    return 2


# -- subcommands -----------------------------------------------------------

def cmd_simulate(a) -> int:
    g = resolve_graph(a.graph)
    c = engine.empty_config(g)
    if a.config:
        c = np.array(int_list(a.config), dtype=np.int64)
        if c.size != g.n_ordinary:
            raise BadInput(f"config needs {g.n_ordinary} entries")
    for spec in a.add or []:
        kv = dict(p.split("=", 1) for p in spec.split(":"))
        v = vertex_arg(g, kv["v"])
        c = c + engine.unit(g, v, int(kv.get("k", 1)))
    res = engine.stabilize(g, c, order_policy=a.policy, seed=a.seed)
    emit(dumps({"stable": res.stable, "score": res.score, "topple_events": res.topple_events}), a.out)
    return 0


def cmd_impedance(a) -> int:
    g = resolve_graph(a.graph)
    v = vertex_arg(g, a.source)
    if a.target is not None:
        w = vertex_arg(g, a.target)
        rows = [(v, w, engine.sandpile_impedance_exact(g, v, w))]
    else:
        row = engine.impedance_row(g, v)
        rows = [(v, int(w), row[i]) for i, w in enumerate(g.ordinary)]
    emit(csv_text(["v", "w", "impedance"], rows), a.out)
    return 0


def cmd_recurrent(a) -> int:
    g = resolve_graph(a.graph)
    c = np.array(int_list(a.config), dtype=np.int64)
    if c.size != g.n_ordinary:
        raise BadInput(f"config needs {g.n_ordinary} entries")
    if not engine.is_stable(g, c):
        raise BadInput("config is not stable")
    burn = engine.is_recurrent_burning(g, c)
    fire = engine.is_recurrent_sink_firing(g, c)
    if burn != fire:
        return violation({"graph": graph_to_json(g), "config": c, "burning": burn, "sink_firing": fire},
                         "recurrence tests disagree")
    emit(dumps({"recurrent": burn}), a.out)
    return 0


def cmd_potential(a) -> int:
    g = resolve_graph(a.graph)
    w = vertex_arg(g, a.target)
    pot = harmonic.solve_potential(g, w)
    emit(csv_text(["vertex", "potential"], [(int(u), pot.values[i]) for i, u in enumerate(g.ordinary)]), a.out)
    return 0


def bound_record(g: SandpileGraph, v: int, w: int, tol: float = 1e-9) -> dict:
    pot = harmonic.solve_potential(g, w)
    exact = engine.sandpile_impedance_exact(g, v, w)
    lo = harmonic.impedance_lower_bound(g, v, w, pot)
    hi = harmonic.impedance_upper_bound(g, v, w, pot)
    cu = harmonic.dual_certificate(g, v, w, "upper", pot)
    cl = harmonic.dual_certificate(g, v, w, "lower", pot)
    ok = lo <= exact + tol and exact <= hi + tol * max(1.0, hi)
    return {"v": v, "w": w, "exact": exact, "lower": lo, "upper": hi,
            "upper_certificate_violation": cu.max_violation,
            "lower_certificate_violation": cl.max_violation,
            "ok": bool(ok and cu.max_violation <= tol and cl.max_violation <= tol)}


def cmd_bounds(a) -> int:
    g = resolve_graph(a.graph)
    rec = bound_record(g, vertex_arg(g, a.source), vertex_arg(g, a.target))
    if not rec["ok"]:
        return violation({"graph": graph_to_json(g), **rec}, "impedance bound violated")
    emit(dumps(rec), a.out)
    return 0


def cmd_tcl_estimate(a) -> int:
    g = resolve_graph(a.graph)
    est = harmonic.tcl_upper_estimate(g, pairs=a.pairs)
    v, w = est.pair
    prof = harmonic.potential_profile(g, w)
    pi = harmonic.solve_potential(g, w).values[v]
    emit(csv_text(["estimate", "v", "w", "gamma", "pi", "pairs_checked"],
                  [(est.value, v, w, prof.gamma, pi, est.pairs_checked)]), a.out)
    return 0


def cmd_grid_sweep(a) -> int:
    ns = int_list(a.n)
    rows, bad = [], []
    for n in ns:
        r = gridlab.grid_tcl_pipeline(n, simulate=a.simulate)
        rows.append((n, r.direct, r.direct_pair, r.chain, r.beta, r.gamma_max, r.injected_max,
                     r.min_pi, r.k_ratio, r.simulated if r.simulated is not None else ""))
        for (i, j) in gridlab.fundamental_boundary(n):
            chk = gridlab.gamma_grid_check(n, i, j)
            if not chk.ok:
                bad.append({"n": n, "site": [i, j], "gamma": chk.gamma, "injected": chk.injected})
    text = csv_text(["n", "direct", "pair", "chain", "beta", "gamma_max", "injected_max", "min_pi",
                     "k_ratio", "simulated"], rows)
    if len(ns) >= 2:
        text += f"# exponent_direct,{fmt(gridlab.fit_exponent(ns, [r[1] for r in rows]))}\n"
    emit(text, a.out)
    if bad:
        return violation({"failures": bad}, "grid potential-profile inequality violated")
    return 0


def cmd_spectral_grid(a) -> int:
    rows = []
    for n in int_list(a.n):
        s = gridlab.spectral_corner_corner(n)
        d = planar.corner_current(n, method="direct")
        rows.append((n, s, d, s / d))
    ratios = [r[3] for r in rows]
    text = csv_text(["n", "spectral", "dual_direct", "ratio"], rows)
    text += f"# spread,{fmt(max(ratios) / min(ratios))}\n"
    emit(text, a.out)
    return 0


def cmd_dual(a) -> int:
    g = resolve_graph(a.graph)
    if g.embedding is None:
        raise BadInput("graph has no planar embedding")
    b = planar.planar_tcl_bound(g, method=a.method)
    emit(dumps({"value": b.value, "min_current": b.min_current, "power_edge": b.power_edge,
                "target_edge": b.target_edge, "primal_min_potential": b.primal_min_potential,
                "relative_gap": b.relative_gap}), a.out)
    return 0


def eigen_direct_gap(rd) -> float:
    e = planar.edge_currents(rd, "eigen")
    d = planar.edge_currents(rd, "direct")
    scale = max(float(np.max(np.abs(d))), 1e-300)
    return float(np.max(np.abs(e - d)) / scale)


def cmd_eigen_current(a) -> int:
    if a.random is not None:
        net = planar.random_planar_network(a.random)
        source = {"random_planar": a.random}
    else:
        g = resolve_graph(a.graph)
        if g.embedding is None:
            raise BadInput("graph has no planar embedding")
        net = planar.from_sandpile(g)
        source = {"graph": a.graph}
    dual = planar.dualize(net)
    rows = []
    for e in range(len(net.edges)):
        try:
            rd = planar.restricted_dual(net, e, dual)
        except (ValueError, SandpileError):
            continue
        rows.append((e, eigen_direct_gap(rd)))
    emit(csv_text(["power_edge", "relative_gap"], rows), a.out)
    worst = max(rows, key=lambda r: r[1], default=None)
    if worst is not None and worst[1] > a.rtol:
        return violation({**source, "power_edge": worst[0], "gap": worst[1]},
                         "eigen and direct currents disagree")
    return 0


def cmd_reduce(a) -> int:
    g = resolve_graph(a.graph)
    net = reductions.ResistiveNetwork.from_sandpile(g)
    if a.vi is not None and a.vj is not None:
        vi, vj = vertex_arg(g, a.vi), vertex_arg(g, a.vj)
        final, trace = reductions.reduce_to_path(net, vi, vj)
        rec = {"trace": trace, "is_path": reductions.is_pole_path(final, vi, vj),
               "edges": [[u, v, r] for (u, v), r in sorted(final.resistance.items())]}
        if any(trace[i + 1] > trace[i] + 1e-10 for i in range(len(trace) - 1)) or not rec["is_path"]:
            return violation({"graph": a.graph, **rec}, "reduction not monotone or not a path")
        emit(dumps(rec), a.out)
        return 0
    red = reductions.honeycomb_to_triangular(g)
    ok = reductions.check_equivalence(red.original, red.network, red.critical)
    rec = {"eliminated": len(red.eliminated), "equivalent": ok,
           "created_resistances": sorted(set(round(r, 12) for r in red.created.values()))}
    if not ok:
        return violation({"graph": a.graph, **rec}, "reduced network is not equivalent")
    emit(dumps(rec), a.out)
    return 0


def cmd_ksink(a) -> int:
    b = reductions.ksink_bound(a.edges, a.k)
    emit(dumps({"k": b.k, "x": b.x, "exact": b.exact, "envelope": b.envelope, "tcl_bound": b.tcl_bound}),
         a.out)
    return 0


def counterexample_matrix() -> np.ndarray:
    g = grid(4)
    stack = engine.heaviest_transient_stack(g, grid_vertex(4, 1, 1), grid_vertex(4, 4, 4))
    return stack.reshape(4, 4)


def cmd_counterexample(a) -> int:
    m = counterexample_matrix()
    ref = np.array(REFERENCE_4X4)
    text = "\n".join(" ".join(str(int(x)) for x in row) for row in m)
    match = bool(np.array_equal(m, ref))
    emit(text + "\n" + ("PASS" if match else "FAIL") + "\n", a.out)
    if not match:
        return violation({"computed": m, "reference": ref}, "4x4 configuration differs from reference")
    return 0


def _suite_case(seed: int) -> list[dict]:
    g = random_sandpile(seed)
    bad = []
    for v in g.boundary:
        for w in g.boundary:
            rec = bound_record(g, v, w)
            if not rec["ok"]:
                bad.append({"seed": seed, "graph": graph_to_json(g), **rec})
    c = np.random.default_rng(seed).integers(0, 3 * g.max_degree, size=g.n_ordinary)
    s1 = engine.stabilize(g, c, "fifo")
    s2 = engine.stabilize(g, c, "random", seed=seed)
    if not (np.array_equal(s1.stable, s2.stable) and np.array_equal(s1.score, s2.score)):
        bad.append({"seed": seed, "graph": graph_to_json(g), "config": c, "abelian": False})
    return bad


def cmd_property_suite(a) -> int:
    seeds = [a.seed + i for i in range(a.count)]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(_suite_case, seeds))
    bad = [b for r in results for b in r]
    emit(csv_text(["cases", "violations"], [(len(seeds), len(bad))]), a.out)
    if bad:
        return violation(bad[0], f"{len(bad)} property violations")
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sandpile-tcl")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, graph=True):
        sp = sub.add_parser(name)
        if graph:
            sp.add_argument("--graph", required=True)
        sp.add_argument("--out")
        sp.set_defaults(fn=fn)
        return sp

    s = add("simulate", cmd_simulate)
    s.add_argument("--add", action="append", help="v=VERTEX:k=COUNT")
    s.add_argument("--config", help="comma-separated heights")
    s.add_argument("--policy", choices=["fifo", "random"], default="fifo")
    s.add_argument("--seed", type=int, default=0)
    s = add("impedance", cmd_impedance)
    s.add_argument("--source", required=True)
    s.add_argument("--target")
    s = add("recurrent", cmd_recurrent)
    s.add_argument("--config", required=True)
    s = add("potential", cmd_potential)
    s.add_argument("--target", required=True)
    s = add("bounds", cmd_bounds)
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s = add("tcl-estimate", cmd_tcl_estimate)
    s.add_argument("--pairs", choices=["boundary", "source-boundary", "all"], default="boundary")
    s = add("grid-sweep", cmd_grid_sweep, graph=False)
    s.add_argument("--n", default="4,8,16")
    s.add_argument("--simulate", action="store_true", default=None)
    s = add("spectral-grid", cmd_spectral_grid, graph=False)
    s.add_argument("--n", default="4..12")
    s = add("dual", cmd_dual)
    s.add_argument("--method", choices=["eigen", "direct"], default="eigen")
    s = add("eigen-current", cmd_eigen_current, graph=False)
    s.add_argument("--graph")
    s.add_argument("--random", type=int)
    s.add_argument("--rtol", type=float, default=1e-8)
    s = add("reduce", cmd_reduce)
    s.add_argument("--vi")
    s.add_argument("--vj")
    s = add("ksink", cmd_ksink, graph=False)
    s.add_argument("--edges", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    add("counterexample-4x4", cmd_counterexample, graph=False)
    s = add("property-suite", cmd_property_suite, graph=False)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=20)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if a.command == "eigen-current" and a.graph is None and a.random is None:
        sys.stderr.write("eigen-current needs --graph or --random\n")
        return 1
    try:
        return a.fn(a)
    except PropertyViolation as exc:
        return violation(exc.instance, str(exc))
    except (BadInput, SchemaError, SandpileError, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
