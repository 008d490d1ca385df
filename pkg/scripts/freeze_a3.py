"""Record the cross-backend residual at omega*t = 0.1 for every dual-backend witness.

The stored values (times 1.5 headroom) are the regression tolerances used by
the acceptance suite.  Run once on a verified build; rerunning overwrites them.

    python3 scripts/freeze_a3.py [--out tests/data/a3_frozen.json]
"""

import argparse
import json
from pathlib import Path

from atommol import SystemParams, compare_many, parse_kinds

LADDER = (0.2, 0.1, 0.05, 0.025)
PARAMS = SystemParams(omega=100.0, delta=1e4, alpha=2, beta=1)
KINDS = parse_kinds(
    "VarXa, VarYa, VarXb, VarYb, VarXab, VarYab, AmpSq1a, AmpSq2a, AmpSq1b, AmpSq2b, "
    "Da, Db, Dab, HZ1, HZ2, Duan, HOAa(2), HOAa(3), HOAa(4), HOAb(2), HOAb(3), HOAb(4), "
    "HZ1Higher(1,2), HZ2Higher(1,1), HZ2Higher(1,2), HZ2Higher(1,3), HZ2Higher(2,2)")
HEADROOM = 1.5


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).parents[1] / "tests" / "data" / "a3_frozen.json"))
    args = ap.parse_args()
    reports = compare_many(PARAMS, LADDER, KINDS)
    data = {
        "params": {"omega": PARAMS.omega, "delta": PARAMS.delta, "alpha": 2.0, "beta": 1.0},
        "omega_t": 0.1,
        "headroom": HEADROOM,
        "residual": {r.kind.label: r.residual_at(0.1) for r in reports},
        "slope": {r.kind.label: r.slope for r in reports},
    }
    Path(args.out).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")
    for r in reports:
        print(f"{r.kind.label:16s} residual@0.1={r.residual_at(0.1):.3e} slope={r.slope:5.2f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
