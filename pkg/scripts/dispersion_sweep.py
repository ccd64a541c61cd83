"""Largest essential-spectrum growth rate against weight rho, epsilon and end state.

    python3 scripts/dispersion_sweep.py --eps 0.1,0.01,0.001
"""

import argparse
import csv

import numpy as np

from kspulse.model import build_model, wave_params
from kspulse.spectrum import instability_sweep, weight_discriminant
from kspulse.speed_window import speed_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", default="0.1,0.01,0.001")
    ap.add_argument("--rho-points", type=int, default=25)
    ap.add_argument("--out", default="dispersion_sweep.csv")
    args = ap.parse_args()

    model = build_model("tanh-quadratic")
    win = speed_bounds(model, 1.25)
    rhos = np.concatenate([[0.0], np.logspace(-2, 1, args.rho_points)])
    rows = []
    for eps in (float(e) for e in args.eps.split(",")):
        p = wave_params(model, 1.25, s=win.midpoint, epsilon=eps)
        for side in ("+", "-"):
            sweep = instability_sweep(model, p, rhos, side)
            rows += [[eps, side, r["rho"], r["tau_star"], *r["lambda_star"]] for r in sweep]
            low = min(r["lambda_star"][0] for r in sweep)
            print(f"eps={eps:g} side {side}: min over rho of max Re lambda = {low:.5g}")
        print(f"eps={eps:g}: weight-polynomial discriminant {weight_discriminant(model, p):.4g}")
    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["epsilon", "side", "rho", "tau_star", "re_lambda", "im_lambda"])
        wr.writerows(rows)


if __name__ == "__main__":
    main()
