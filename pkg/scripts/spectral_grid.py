#!/usr/bin/env python3
"""Compare the alternating spectral sum with the dual corner-to-corner current."""
import argparse
from dataclasses import dataclass, fields

from sandpile_tcl import gridlab as G, planar as P


@dataclass
class Config:
    n_min: int = 4
    n_max: int = 32


def run(cfg: Config) -> None:
    print("n,spectral,dual_current,ratio")
    ratios = []
    for n in range(cfg.n_min, cfg.n_max + 1):
        s, d = G.spectral_corner_corner(n), P.corner_current(n)
        ratios.append(s / d)
        print(f"{n},{s!r},{d!r},{s / d!r}")
    print(f"# max/min ratio {max(ratios) / min(ratios):.4f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    for f in fields(Config):
        ap.add_argument("--" + f.name.replace("_", "-"), type=int, default=f.default)
    run(Config(**vars(ap.parse_args())))
