#!/usr/bin/env python3
"""Exact line-sandpile impedances against the x=2 ladder circuit and its envelope."""
import argparse
from dataclasses import dataclass

from sandpile_tcl import reductions as R


@dataclass
class Config:
    k_max: int = 12


def run(cfg: Config) -> None:
    lc = R.line_sandpile_exponential_check(cfg.k_max)
    print("k,exact,analytic,envelope")
    for row in zip(lc.ks, lc.exact, lc.analytic, lc.envelope):
        print(",".join(str(x) for x in row))
    print(f"# last simulated ratio {lc.ratios[-1]:.5f}, analytic {lc.analytic_ratios[-1]:.5f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k-max", type=int, default=Config.k_max)
    run(Config(**vars(ap.parse_args())))
