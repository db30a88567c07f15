"""Termination, iteration count and fitted rate per beta for one config.

    python3 scripts/beta_sweep.py configs/example1.json --betas 2.5,3,4,6,8
"""

import argparse

from polyadmm import config as cfgmod
from polyadmm.cli import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--betas", default="2.5,3,4,6,8")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    raw = cfgmod.load(args.config)
    rows = sweep(raw, [float(b) for b in args.betas.split(",")], workers=args.workers)
    print(f"{'beta':>6} {'termination':>15} {'iters':>6} {'rho':>8}")
    for beta, term, iters, _, rho in rows:
        rho_s = f"{rho:.4f}" if rho != "" else "-"
        print(f"{beta:6g} {term:>15} {iters:6d} {rho_s:>8}")


if __name__ == "__main__":
    main()
