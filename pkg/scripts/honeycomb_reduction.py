#!/usr/bin/env python3
"""Reduce honeycomb lattices to triangular ones by star-delta and compare estimates."""
import argparse
from dataclasses import dataclass

from sandpile_tcl import reductions as R
from sandpile_tcl.graph import honeycomb


@dataclass
class Config:
    n_max: int = 4


def run(cfg: Config) -> None:
    print("n,eliminated,equivalent,honeycomb_estimate,triangular_estimate,ratio")
    ratios = {n: (h, t, r) for n, h, t, r in R.tcl_pair_ratios(range(1, cfg.n_max + 1))}
    for n in range(1, cfg.n_max + 1):
        red = R.honeycomb_to_triangular(honeycomb(n))
        eq = R.check_equivalence(red.original, red.network, red.critical)
        h, t, r = ratios[n]
        print(f"{n},{len(red.eliminated)},{eq},{h!r},{t!r},{r!r}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=Config.n_max)
    run(Config(**vars(ap.parse_args())))
