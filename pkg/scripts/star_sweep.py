"""Sweep a family of mass-ratio profiles and tabulate the physicality verdicts.

The model is eta(x) = eta0 * (1 - s*x) on R = 1, solved with case 7 (f = -1),
so u = 1/2 and the anisotropy follows from the completed coefficient.  The
density is 6*eta0 - 10*eta0*s*x, which turns negative inside the star once
s > 0.6.

    python3 scripts/star_sweep.py --eta0 0.1 --slopes 0 0.3 0.6 0.9 1.2
"""

import argparse
import math

from riccati_lab.astro import physicality_report, profile, solve_with_case


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta0", type=float, default=0.1)
    ap.add_argument("--slopes", type=float, nargs="*", default=[0.0, 0.3, 0.6, 0.9, 1.2])
    args = ap.parse_args()

    print(f"{'slope':>6} {'(i)':>10} {'r*':>10} {'expected':>10} {'mass':>9} {'A0 for (iv)':>12}")
    for s in args.slopes:
        eta = f"{args.eta0!r}*(1 - {s!r}*x)"
        sol = solve_with_case(eta, 1.0, 7, "-1")
        prof = profile(sol.model, sol.u)
        rep = physicality_report(prof)
        # rho = 0 at x = 0.6/s
        expected = math.sqrt(0.6 / s) if s > 0.6 else math.nan
        r_star = rep["i"].r_star if rep["i"].r_star is not None else math.nan
        print(f"{s:6.2f} {rep['i'].status:>10} {r_star:10.6f} {expected:10.6f} "
              f"{prof.mass_roundtrip():9.1e} {rep.required_A0:12.6f}")


if __name__ == "__main__":
    main()
