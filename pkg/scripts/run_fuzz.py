"""Fuzz every case and print the worst value of each residual metric.

    python3 scripts/run_fuzz.py --n 100 --seed 0 [--csv out.csv]
"""

import argparse
import csv
import math
import time

from riccati_lab.checks import CaseCheck, Tolerances, fuzz_case


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100, help="specs per case")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cases", type=int, nargs="*", default=list(range(1, 11)))
    ap.add_argument("--csv", help="write every row here")
    args = ap.parse_args()

    tol = Tolerances()
    rows = []
    print(f"{'case':>4} {'time':>6} {'fail':>4} " + " ".join(f"{m:>11}" for m in CaseCheck.METRICS))
    for case in args.cases:
        t0 = time.perf_counter()
        results = fuzz_case(case, args.n, args.seed)
        dt = time.perf_counter() - t0
        fails = sum(not r.passed(tol) for r in results)
        worst = []
        for m in CaseCheck.METRICS:
            vals = [getattr(r, m) for r in results if not math.isnan(getattr(r, m))]
            worst.append(f"{max(vals):11.2e}" if vals else f"{'-':>11}")
        print(f"{case:>4} {dt:6.1f} {fails:>4} " + " ".join(worst))
        rows.extend(r.row() for r in results)

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
