"""3D fiber-lattice sweep: effective tensor and fiber gradient ratios.

    python scripts/fiber_sweep.py --h 0 0 1
    python scripts/fiber_sweep.py --h 1 0 0 --res 48
    python scripts/fiber_sweep.py --lattice triaxial --res 32
"""

import argparse

from hallhom.cell_solver import SolverConfig
from hallhom.closed_forms import LimitPhases
from hallhom.experiments import make_plan, run_fiber_sweep_3d


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--phases", type=float, nargs=4, default=[1.0, 1.0, 2.0, 1.0], metavar=("A1", "B1", "A2", "B2"))
    ap.add_argument("--h", type=float, nargs=3, default=[0.0, 0.0, 1.0])
    ap.add_argument("--radii", type=float, nargs="+", default=[0.25, 0.15, 0.1])
    ap.add_argument("--res", type=int, default=48)
    ap.add_argument("--lattice", choices=["fiber", "triaxial"], default="fiber")
    ap.add_argument("--threads", type=int, default=3)
    ap.add_argument("--out", default="runs/fiber")
    args = ap.parse_args()

    phases = LimitPhases(*args.phases)
    plan = make_plan(args.lattice, phases, args.radii, resolution=args.res)
    result = run_fiber_sweep_3d(phases, args.h, plan, SolverConfig(tol=1e-9, threads=args.threads))
    print(result.summary())
    for rec in result.records:
        if "xi_ratios" in rec.extras:
            print(f"r={rec.feature_size:<6g} xi ratios {rec.extras['xi_ratios']}  predicted {rec.extras['xi_predicted']}")
    print("wrote", *result.write(args.out, f"sweep_{args.lattice}"))


if __name__ == "__main__":
    main()
