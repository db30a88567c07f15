"""Mean s_k over seeded random starts for Example 1 (one column per beta).

    python3 scripts/figure1_data.py --out out/figure1 --runs 50 --iters 60
"""

import argparse
from pathlib import Path

from polyadmm.cli import FIGURE_BETAS, FIGURE_ITERS, FIGURE_RUNS, write_figure_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/figure1")
    ap.add_argument("--betas", default=",".join(f"{b:g}" for b in FIGURE_BETAS))
    ap.add_argument("--runs", type=int, default=FIGURE_RUNS)
    ap.add_argument("--iters", type=int, default=FIGURE_ITERS)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    betas = [float(b) for b in args.betas.split(",")]
    series = write_figure_csv(out / "example1_mean_sk.csv", betas, args.seed, args.runs,
                              args.iters)
    for b in betas:
        s = series[b]
        print(f"beta={b:g}: mean s_1={s[1]:.3e}  mean s_{args.iters}={s[-1]:.3e}")
    print(f"wrote {out / 'example1_mean_sk.csv'}")


if __name__ == "__main__":
    main()
