"""Closed-form poles versus numerical blow-up for random constructions.

For each case, draws specs, picks family constants, and compares every pole
located on the closed form with where the Runge-Kutta oracle gives up.

    python3 scripts/pole_study.py --n 20 --seed 3
"""

import argparse

import numpy as np

from riccati_lab.checks import case_rng, random_spec
from riccati_lab.riccati import integrate_numeric


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    print(f"{'case':>4} {'members':>8} {'with pole':>9} {'max gap':>10}")
    for case in range(1, 11):
        rng = case_rng(args.seed, case)
        gaps, members = [], 0
        for _ in range(args.n):
            _, cc = random_spec(case, rng)
            fam, x0 = cc.general, cc.spec.x0
            hi = cc.spec.interval[1]
            # aim the pole at a random interior point
            target = rng.uniform(0.2, 0.9)
            C = float(fam.denominator(target))
            members += 1
            poles = fam.poles(C)
            if not poles:
                continue
            tr = integrate_numeric(cc.problem, x0, float(fam(C, x0)), 1, hi)
            if tr.reason == "pole-detected":
                gaps.append(abs(poles[0] - tr.pole_x))
        gap = f"{max(gaps):10.2e}" if gaps else f"{'-':>10}"
        print(f"{case:>4} {members:>8} {len(gaps):>9} {gap}")


if __name__ == "__main__":
    np.set_printoptions(precision=3)
    main()
