#!/usr/bin/env python3
"""Worst-pair impedance estimates on GRID_n and their fitted growth exponents."""
import argparse
import csv
import sys
from dataclasses import dataclass, fields

from sandpile_tcl import gridlab as G, harmonic as H
from sandpile_tcl.graph import grid


@dataclass
class Config:
    n_min: int = 4
    n_max: int = 64
    simulate_up_to: int = 12
    out: str = "-"


def run(cfg: Config) -> None:
    ns = list(range(cfg.n_min, cfg.n_max + 1))
    out = sys.stdout if cfg.out == "-" else open(cfg.out, "w", newline="")
    w = csv.writer(out)
    w.writerow(["n", "estimate", "probe", "simulated"])
    est, probe = [], []
    for n in ns:
        g = grid(n)
        e = H.tcl_upper_estimate(g, "boundary").value
        p = G.lower_bound_probe(n, g).value
        sim = G.simulated_max_impedance(n, g)[0] if n <= cfg.simulate_up_to else ""
        est.append(e)
        probe.append(p)
        w.writerow([n, repr(e), repr(p), sim])
    print(f"# slope estimate {G.fit_exponent(ns, est):.4f} probe {G.fit_exponent(ns, probe):.4f}",
          file=sys.stderr)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    for f in fields(Config):
        ap.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    run(Config(**vars(ap.parse_args())))
