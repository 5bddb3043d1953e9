"""Regime map along b at N = 5 (mu = 0) with quick verification per row.

Writes regime_map.csv next to this script; plot b against c_N_minus/c_N_plus
with any CSV tool.
"""

import argparse
import os

from kirchnorm import ProblemParams
from kirchnorm.verify import sweep, sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=5)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    values = ["-b0", "-0.1b0", "0.5b1", "b1", "bmid", "0.99b0", "b0", "1.01b0", "2b0"]
    rows = sweep("b", values, ProblemParams(N=args.N), jobs=args.jobs)
    for r in rows:
        print(f"{r['value']:>12.6g}  {r['regime_tag']:<12} failed={r['n_failed'] or 0}  {r['reason']}")
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "regime_map.csv")
    with open(out, "w") as fh:
        fh.write(sweep_csv(rows))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
