"""Speed window across the admissible u- range for the canonical model.

    python3 scripts/window_scan.py --out scan.csv
"""

import argparse
import csv

import numpy as np

from kspulse.errors import KSPulseError
from kspulse.model import build_model
from kspulse.speed_window import speed_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", default="tanh-quadratic")
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--out", default="window_scan.csv")
    args = ap.parse_args()

    model = build_model(args.family)
    lo, hi = float(model.g(model.beta)), model.g_at_zero
    rows = []
    for u in np.linspace(lo, hi, args.points + 2)[1:-1]:
        for branch in ("above", "below"):
            try:
                w = speed_bounds(model, float(u), branch)
            except KSPulseError as exc:
                print(f"u-={u:.4f} {branch}: {exc.code}")
                continue
            rows.append([u, branch, w.s_lower, w.s_upper, w.s1, w.s2, w.J_mean, w.Q_mean, not w.is_empty])
    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["u_minus", "branch", "s_lower", "s_upper", "s1", "s2", "J_mean", "Q_mean", "nonempty"])
        wr.writerows(rows)
    for r in rows[::8]:
        print(f"u-={r[0]:.4f} {r[1]:5s} window ({r[2]:.5f}, {r[3]:.5f})")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
