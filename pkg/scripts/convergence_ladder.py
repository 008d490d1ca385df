"""Cross-backend residuals over a halving ladder of rescaled times.

    python3 scripts/convergence_ladder.py --alpha 2 --beta 1 --ladder 0.2,0.1,0.05,0.025
    python3 scripts/convergence_ladder.py --ladder 0.008,0.004,0.002,0.001 --corrected

The default ladder sits at detuning phases Delta*t between 2.5 and 20, where
the neglected fourth-order terms still oscillate; the small-time ladder puts
Delta*t below 1 and shows the clean power law.
"""

import argparse

import numpy as np

from atommol import SystemParams, compare_many, parse_kinds

DEFAULT_KINDS = ("VarXa, VarYa, VarXb, VarYb, VarXab, VarYab, AmpSq1a, AmpSq2a, AmpSq1b, AmpSq2b, "
                 "Da, Db, Dab, HZ1, HZ2, Duan, HOAa(3), HOAa(4), HOAb(3), HOAb(4), "
                 "HZ1Higher(1,2), HZ2Higher(1,1), HZ2Higher(1,2), HZ2Higher(1,3)")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--omega", type=float, default=100.0)
    ap.add_argument("--delta", type=float, default=1e4)
    ap.add_argument("--alpha", type=complex, default=2)
    ap.add_argument("--beta", type=complex, default=1)
    ap.add_argument("--ladder", default="0.2,0.1,0.05,0.025")
    ap.add_argument("--kinds", default=DEFAULT_KINDS)
    ap.add_argument("--corrected", action="store_true", help="use the corrected closed forms")
    args = ap.parse_args()

    params = SystemParams(args.omega, args.delta, args.alpha, args.beta)
    ladder = [float(x) for x in args.ladder.split(",")]
    reports = compare_many(params, ladder, parse_kinds(args.kinds), corrected=args.corrected)
    print(f"{'witness':16s} slope  " + "  ".join(f"{x:>9g}" for x in reports[0].ladder))
    for r in reports:
        print(f"{r.kind.label:16s} {r.slope:5.2f}  " + "  ".join(f"{x:9.2e}" for x in r.residuals))
    slopes = np.array([r.slope for r in reports])
    print(f"{np.sum(slopes >= 3)}/{len(slopes)} witnesses with slope >= 3")


if __name__ == "__main__":
    main()
