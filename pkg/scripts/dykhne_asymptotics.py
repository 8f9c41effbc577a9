"""Dykhne coefficients and transformed phases as the phase-2 measure shrinks."""

import argparse

from hallhom.closed_forms import LimitPhases
from hallhom.experiments import run_dykhne_asymptotics


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--phases", type=float, nargs=4, default=[1.0, 0.5, 2.0, 1.0], metavar=("A1", "B1", "A2", "B2"))
    ap.add_argument("--h", type=float, default=1.0)
    ap.add_argument("--decades", type=int, default=8)
    args = ap.parse_args()

    thetas = [10.0**-k for k in range(1, args.decades + 1)]
    rows = run_dykhne_asymptotics(LimitPhases(*args.phases), args.h, thetas)
    keys = ["err_alpha1_prime", "err_theta_alpha2_prime", "err_p", "err_q", "err_r"]
    print(f"{'theta':>8} " + " ".join(f"{k:>22}" for k in keys))
    for r in rows:
        print(f"{r['theta']:>8.0e} " + " ".join(f"{r[k]:>22.3e}" for k in keys))


if __name__ == "__main__":
    main()
