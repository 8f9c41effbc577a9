"""Command-line front end.

Every subcommand reads an optional flat ``key = value`` config file
(``--config``); command-line flags with the same names override it.

Exit codes: 0 ok, 2 configuration error, 3 solver non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import experiments as ex
from .cell_solver import NonConvergence, SolverConfig, effective_tensor
from .closed_forms import LimitPhases
from .microstructure import (
    CellGeometry,
    ConductivityField,
    MaskFormatError,
    assemble_conductivity,
    build_checkerboard,
    build_cross_cell,
    build_fiber_cell_3d,
    build_laminate,
    build_triaxial_fiber_cell,
    read_mask,
    write_mask,
)
from .tensor_core import DegenerateTransform, NonRealTransform, PerturbedPhase, perturbed_tensor

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("hallhom")


class ConfigError(ValueError):
    pass


# --- value parsers -----------------------------------------------------------------


def _float(key, s):
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {s!r}") from None


def _int(key, s):
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {s!r}") from None


def _floats(key, s):
    return [_float(key, p) for p in str(s).split(",") if p.strip()]


def _bool(key, s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {s!r}")


def _str(key, s):
    return str(s).strip()


def _choice(*options):
    def parse(key, s):
        v = str(s).strip()
        if v not in options:
            raise ConfigError(f"{key}: must be one of {', '.join(options)}; got {v!r}")
        return v

    return parse


def _h2(key, s):
    vals = _floats(key, s)
    if len(vals) != 1:
        raise ConfigError(f"{key}: dimension mismatch, 2D subcommand needs a scalar h, got {len(vals)} components")
    return vals[0]


def _h3(key, s):
    vals = _floats(key, s)
    if len(vals) != 3:
        raise ConfigError(f"{key}: dimension mismatch, 3D subcommand needs h=h1,h2,h3, got {len(vals)} component(s)")
    return vals


COMMON = {
    "out": (_str, "."),
    "res": (_int, None),
    "tol": (_float, 1e-9),
    "threads": (_int, 1),
    "no_timing": (_bool, False),
    "max_iter": (_int, 20000),
    "preconditioner": (_choice("none", "diagonal"), "diagonal"),
    "method": (_choice("auto", "gmres", "bicgstab", "cg"), "auto"),
    "restart": (_int, 50),
    "seed": (_int, 0),
}

PHASES = {
    "alpha1": (_float, 1.0),
    "beta1": (_float, 0.0),
    "alpha2": (_float, 2.0),
    "beta2": (_float, 0.0),
}

GEOMETRY = {
    "geometry": (_choice("constant", "laminate", "checkerboard", "cross", "fiber", "triaxial", "file"), "cross"),
    "t": (_float, 0.25),
    "ell": (_float, 1.0),
    "r": (_float, 0.2),
    "fraction": (_float, 0.5),
    "axis": (_int, 1),
    "mask_file": (_str, None),
}

SCHEMAS = {
    "cell-solve": {**PHASES, **GEOMETRY, "h": (_floats, "0")},
    "sweep-cross": {**PHASES, "ell": (_float, 1.0), "h": (_h2, 0.0), "t": (_floats, "0.2,0.1,0.05"),
                    "fixed_beta": (_bool, False), "theta_mode": (_choice("measured", "analytic"), "measured")},
    "sweep-fiber3d": {**PHASES, "h": (_h3, "0,0,1"), "r": (_floats, "0.25,0.15,0.1"),
                      "eps": (_floats, None), "lattice": (_choice("fiber", "triaxial"), "fiber"),
                      "fixed_beta": (_bool, False), "theta_mode": (_choice("measured", "analytic"), "measured")},
    "duality-check": {**PHASES, **GEOMETRY, "h": (_h2, 1.0)},
    "dykhne": {**PHASES, "h": (_h2, 1.0), "theta": (_floats, "1e-2,1e-4,1e-6")},
    "mask": {**GEOMETRY, "action": (_choice("generate", "inspect"), "inspect")},
}

HELP = {
    "cell-solve": "effective tensor of one periodic cell",
    "sweep-cross": "high-contrast sweep of the 2D cross structure",
    "sweep-fiber3d": "high-contrast sweep of the 3D fiber lattice",
    "duality-check": "Keller duality and Dykhne stability checks",
    "dykhne": "asymptotics of the Dykhne coefficients",
    "mask": "generate or inspect HHOM-MASK files",
}


@dataclass
class RunConfig:
    command: str
    params: dict
    out: Path
    timing: bool
    solver: SolverConfig
    seed: int = 0


def read_config_file(path) -> dict:
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_config(command: str, file_values: dict | None = None, flag_values: dict | None = None) -> RunConfig:
    """Merge file and flag values (flags win), type-check and validate."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {command!r}")
    schema = {**COMMON, **SCHEMAS[command]}
    raw = dict(file_values or {})
    raw.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"{command}: unknown key(s) {', '.join(unknown)}")
    params = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            params[key] = parse(key, raw[key])
        elif default is None:
            params[key] = None
        else:
            params[key] = parse(key, default) if isinstance(default, str) else default
    _validate(command, params)
    try:
        solver = SolverConfig(
            tol=params["tol"], max_iter=params["max_iter"], preconditioner=params["preconditioner"],
            restart=params["restart"], method=params["method"], threads=params["threads"],
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    return RunConfig(command, params, Path(params["out"]), not params["no_timing"], solver, seed=params["seed"])


def _validate(command: str, p: dict):
    for key in ("alpha1", "alpha2"):
        if key in p and p[key] is not None and not p[key] > 0:
            raise ConfigError(f"{key} must be > 0")
    if p.get("res") is not None and p["res"] < 4:
        raise ConfigError("res must be >= 4")
    if "t" in p and p["t"] is not None:
        ts = p["t"] if isinstance(p["t"], list) else [p["t"]]
        if any(not 0 < t <= 0.5 for t in ts):
            raise ConfigError("t must lie in (0, 1/2]")
    if "r" in p and p["r"] is not None:
        rs = p["r"] if isinstance(p["r"], list) else [p["r"]]
        if any(not 0 < r < 0.5 for r in rs):
            raise ConfigError("r must lie in (0, 1/2)")
    if "ell" in p and p["ell"] is not None and p["ell"] < 1:
        raise ConfigError("ell must be >= 1")
    if command == "cell-solve":
        h = p["h"]
        dim3 = p["geometry"] in ("fiber", "triaxial")
        if dim3 and len(h) != 3:
            raise ConfigError("h: dimension mismatch, 3D geometry needs h=h1,h2,h3")
        if p["geometry"] in ("cross", "checkerboard") and len(h) != 1:
            raise ConfigError("h: dimension mismatch, 2D geometry needs a scalar h")
        if len(h) not in (1, 3):
            raise ConfigError("h must have 1 or 3 components")
    if command in ("cell-solve", "duality-check", "mask") and p["geometry"] == "file" and not p["mask_file"]:
        raise ConfigError("geometry=file requires mask_file")
    if command == "sweep-fiber3d" and p["eps"] is not None and len(p["eps"]) != len(p["r"]):
        raise ConfigError("eps must have one entry per r")


# --- geometry construction -----------------------------------------------------------


def _default_res(p):
    if p.get("res"):
        return p["res"]
    return {"fiber": 32, "triaxial": 32}.get(p["geometry"], 64)


def _build_mask(p, dim_hint: int = 2):
    g = p["geometry"]
    res = _default_res(p)
    if g == "cross":
        return build_cross_cell(p["t"], p["ell"], res)
    if g == "checkerboard":
        return build_checkerboard(res)
    if g == "laminate":
        return build_laminate(p["axis"], p["fraction"], res, dim=dim_hint)
    if g == "fiber":
        return build_fiber_cell_3d(p["r"], res)
    if g == "triaxial":
        return build_triaxial_fiber_cell(p["r"], res)
    if g == "file":
        return read_mask(p["mask_file"])
    raise ConfigError(f"geometry {g!r} does not define a mask")


# --- dispatch --------------------------------------------------------------------------


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _phase_list(p):
    return [p["alpha1"], p["beta1"], p["alpha2"], p["beta2"]]


def _cmd_cell_solve(cfg: RunConfig) -> int:
    p = cfg.params
    h = p["h"][0] if len(p["h"]) == 1 else np.array(p["h"])
    dim = 2 if np.ndim(h) == 0 else 3
    ph1, ph2 = PerturbedPhase(p["alpha1"], p["beta1"]), PerturbedPhase(p["alpha2"], p["beta2"])
    if p["geometry"] == "constant":
        geom = CellGeometry.unit(dim, p["res"] or 32)
        cfield = ConductivityField.constant(geom, perturbed_tensor(ph1, h))
    else:
        mask = _build_mask(p, dim)
        if mask.geometry.dim != dim:
            raise ConfigError("h: dimension mismatch with the geometry")
        cfield = assemble_conductivity(mask, ph1, ph2, h)
    eff = effective_tensor(cfield, cfg.solver)
    report = eff.to_report(h=h, phases=_phase_list(p))
    if not cfg.timing:
        report["wall_time_s"] = None
    _write(cfg.out / "cell_solve.json", json.dumps(report, indent=2) + "\n")
    print("sigma_star =")
    print(np.array2string(eff.matrix, precision=8, suppress_small=True))
    print(f"iterations {eff.diagnostics['iterations']}  residuals {eff.diagnostics['residuals']}")
    return EXIT_OK


def _sweep_exit(result: ex.SweepResult, cfg: RunConfig, stem: str) -> int:
    result.write(cfg.out, stem, timing=cfg.timing)
    print(result.summary())
    return EXIT_OK if result.ok else EXIT_SOLVER


def _cmd_sweep_cross(cfg: RunConfig) -> int:
    p = cfg.params
    phases = LimitPhases(*_phase_list(p))
    plan = ex.make_plan("cross", phases, p["t"], ell=p["ell"], resolution=p["res"],
                        strong_field=not p["fixed_beta"], fraction=p["theta_mode"])
    result = ex.run_cross_sweep(phases, p["ell"], p["h"], plan, cfg.solver)
    return _sweep_exit(result, cfg, "sweep_cross")


def _cmd_sweep_fiber(cfg: RunConfig) -> int:
    p = cfg.params
    phases = LimitPhases(*_phase_list(p))
    plan = ex.make_plan(p["lattice"], phases, p["r"], resolution=p["res"], strong_field=not p["fixed_beta"],
                        fraction=p["theta_mode"], eps=p["eps"])
    result = ex.run_fiber_sweep_3d(phases, np.array(p["h"]), plan, cfg.solver)
    return _sweep_exit(result, cfg, "sweep_fiber3d")


def _cmd_duality(cfg: RunConfig) -> int:
    p = cfg.params
    mask = _build_mask(p, 2)
    if mask.geometry.dim != 2:
        raise ConfigError("duality-check needs a 2D geometry")
    report = ex.run_duality_harness(mask, PerturbedPhase(p["alpha1"], p["beta1"]),
                                    PerturbedPhase(p["alpha2"], p["beta2"]), p["h"], cfg.solver)
    _write(cfg.out / "duality.json", json.dumps(report, indent=2) + "\n")
    print(f"keller deviation  {report['keller_deviation']:.3e}")
    dev = report["dykhne_deviation"]
    print(f"dykhne deviation  {'skipped (degenerate)' if dev is None else f'{dev:.3e}'}")
    return EXIT_OK


def _cmd_dykhne(cfg: RunConfig) -> int:
    p = cfg.params
    phases = LimitPhases(*_phase_list(p))
    rows = ex.run_dykhne_asymptotics(phases, p["h"], p["theta"])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) for k, v in row.items()})
    _write(cfg.out / "dykhne.csv", buf.getvalue())
    _write(cfg.out / "dykhne.json", json.dumps(rows, indent=2) + "\n")
    print(f"{'theta':>10} {'alpha1_p':>14} {'theta*alpha2_p':>16} {'p':>14} {'q':>14} {'r':>12}")
    for r in rows:
        print(f"{r['theta']:>10.3g} {r['alpha1_prime']:>14.9f} {r['theta_alpha2_prime']:>16.9f} "
              f"{r['p']:>14.9f} {r['q']:>14.9f} {r['r']:>12.4e}")
    return EXIT_OK


def _cmd_mask(cfg: RunConfig) -> int:
    p = cfg.params
    if p["action"] == "inspect":
        if not p["mask_file"]:
            raise ConfigError("mask inspect requires mask_file")
        mask = read_mask(p["mask_file"])
    else:
        if p["geometry"] in ("constant", "file"):
            raise ConfigError("mask generate needs a generated geometry")
        mask = _build_mask(p, 2)
        target = Path(p["mask_file"]) if p["mask_file"] else cfg.out / "mask.txt"
        target.parent.mkdir(parents=True, exist_ok=True)
        write_mask(mask, target)
        print(f"wrote {target}")
    g = mask.geometry
    print(f"dim={g.dim} grid={'x'.join(map(str, g.shape))} ell={g.ell} fraction={mask.fraction:.6f}")
    return EXIT_OK


COMMANDS = {
    "cell-solve": _cmd_cell_solve,
    "sweep-cross": _cmd_sweep_cross,
    "sweep-fiber3d": _cmd_sweep_fiber,
    "duality-check": _cmd_duality,
    "dykhne": _cmd_dykhne,
    "mask": _cmd_mask,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hallhom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("--config", help="flat key = value config file")
        for key, (parse, _default) in {**COMMON, **schema}.items():
            flag = "--" + key.replace("_", "-")
            if parse is _bool:
                sp.add_argument(flag, dest=key, action="store_const", const="true", default=None)
            else:
                sp.add_argument(flag, dest=key, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = parse_config(args.command, file_values, flags)
        return COMMANDS[args.command](cfg)
    except (ConfigError, DegenerateTransform, NonRealTransform) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, MaskFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
