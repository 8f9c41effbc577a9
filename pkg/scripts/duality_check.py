"""Keller duality and Dykhne stability on the high-contrast cross, across resolutions.

    python scripts/duality_check.py --res 64 128 256
"""

import argparse
import json
from pathlib import Path

from hallhom.cell_solver import SolverConfig
from hallhom.experiments import run_duality_harness
from hallhom.microstructure import build_cross_cell
from hallhom.tensor_core import PerturbedPhase


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t", type=float, default=0.1)
    ap.add_argument("--phase1", type=float, nargs=2, default=[1.0, 0.5])
    ap.add_argument("--phase2", type=float, nargs=2, default=[50.0, 25.0])
    ap.add_argument("--h", type=float, default=1.0)
    ap.add_argument("--res", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--out", default="runs/duality")
    args = ap.parse_args()

    rows = []
    for res in args.res:
        rep = run_duality_harness(
            build_cross_cell(args.t, 1.0, res),
            PerturbedPhase(*args.phase1),
            PerturbedPhase(*args.phase2),
            args.h,
            SolverConfig(tol=1e-10),
        )
        rows.append({"res": res, **rep})
        dyk = rep["dykhne_deviation"]
        print(f"res {res:4d}  keller {rep['keller_deviation']:.3e}  dykhne {'n/a' if dyk is None else f'{dyk:.3e}'}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "duality.json").write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
