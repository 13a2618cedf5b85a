"""Abelian sandpile simulation with electrical-network bounds on transience classes."""
from .graph import SandpileGraph, build_graph, grid, honeycomb, line, triangular
from .engine import stabilize, sandpile_impedance_exact
from .harmonic import solve_potential, tcl_upper_estimate

__version__ = "0.1.0"

__all__ = ["SandpileGraph", "build_graph", "grid", "honeycomb", "line", "triangular",
           "stabilize", "sandpile_impedance_exact", "solve_potential", "tcl_upper_estimate"]
