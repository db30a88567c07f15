"""Period-2 cycles of Examples 2 and 3 from (y0, lambda0) = (0, -1)."""

import argparse
from pathlib import Path

from polyadmm.cli import CYCLE_BETAS, cycle_rows, write_cycle_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/divergence")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for which, betas in ((2, CYCLE_BETAS), (3, (2.0,))):
        for beta in betas:
            trace, rows = cycle_rows(which, beta)
            print(f"example {which}, beta={beta:g}: {trace.termination}")
            for r in rows:
                print("   ", ", ".join(f"{v + 0.0:.6g}" for v in r[2:]))
        write_cycle_csv(out / f"example{which}_cycle.csv", which, betas)
    print(f"wrote cycle tables to {out}")


if __name__ == "__main__":
    main()
