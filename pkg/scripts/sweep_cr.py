"""CR capacity sweep over the binary sources and the reference power grid.

Writes one CSV row per (mu, P) with the optimizer value, the brute-force
oracle, the BSC-family bound and the equilibrium gap.

    python3 scripts/sweep_cr.py --out results/cr_sweep.csv
"""

import argparse
import sys

from crcap.cli import DEFAULT_MUS, DEFAULT_POWER_GRID, main


def parse():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mu", default=",".join(str(m) for m in DEFAULT_MUS))
    ap.add_argument("--power", default=",".join(repr(p) for p in DEFAULT_POWER_GRID))
    ap.add_argument("--iters", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default=None)
    return ap.parse_args()


if __name__ == "__main__":
    a = parse()
    argv = ["crcap", "sweep", "--mu", a.mu, "--power", a.power,
            "--iters", str(a.iters), "--seed", str(a.seed)]
    if a.workers:
        argv += ["--workers", str(a.workers)]
    if a.out:
        argv += ["--out", a.out]
    sys.exit(main(argv))
