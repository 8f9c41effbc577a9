"""Convergence sweeps and property harnesses built on the cell solver."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cell_solver import NonConvergence, SolverConfig, effective_tensor, fiber_average_gradient
from .closed_forms import (
    LimitPhases,
    cross_formula,
    fiber_formula_3d,
    fiber_xi_coefficients,
    shifted_alpha2,
    triaxial_formula,
    voigt_reuss_bounds,
)
from .microstructure import (
    PhaseMask,
    assemble_conductivity,
    build_cross_cell,
    build_fiber_cell_3d,
    build_triaxial_fiber_cell,
    cross_fraction,
    resolution_for,
)
from .tensor_core import (
    DegenerateTransform,
    PerturbedPhase,
    dual_push_forward,
    dykhne_coefficients,
    dykhne_transform_phase,
    dykhne_transform_tensor,
    keller_dual,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "n", "theta", "feature_size", "resolution", "entry", "computed",
    "predicted", "rel_error", "iters", "residual", "wall_time_s",
]


# --- plans ---------------------------------------------------------------------


@dataclass(frozen=True)
class SweepTerm:
    n: int
    feature_size: float
    theta: float
    alpha2_n: float
    beta2_n: float
    resolution: int
    eps: float | None = None


@dataclass(frozen=True)
class SweepPlan:
    kind: str  # "cross", "fiber" or "triaxial"
    terms: tuple[SweepTerm, ...]
    ell: float = 1.0
    strong_field: bool = True

    def __post_init__(self):
        thetas = [t.theta for t in self.terms]
        if any(b >= a for a, b in zip(thetas, thetas[1:])):
            raise ValueError(f"theta_n must be strictly decreasing, got {thetas}")

    def regime_indicator(self) -> list[float] | None:
        """``eps_n^2 |ln r_n|`` per term, when ``eps_n`` is supplied."""
        if any(t.eps is None for t in self.terms):
            return None
        return [t.eps**2 * abs(math.log(t.feature_size)) for t in self.terms]

    def regime_ok(self) -> bool | None:
        vals = self.regime_indicator()
        if vals is None:
            return None
        return all(b < a for a, b in zip(vals, vals[1:]))


def _measure(kind: str, size: float, res: int, ell: float) -> float:
    if kind == "cross":
        return build_cross_cell(size, ell, res).area
    if kind == "fiber":
        return build_fiber_cell_3d(size, res).area
    return build_triaxial_fiber_cell(size, res).area


def _analytic_measure(kind: str, size: float, ell: float) -> float:
    if kind == "cross":
        return cross_fraction(size, ell) * ell
    if kind == "fiber":
        return math.pi * size * size
    raise ValueError("no closed-form measure for the triaxial cell; use measured fractions")


def make_plan(
    kind: str,
    phases: LimitPhases,
    sizes: Sequence[float],
    *,
    ell: float = 1.0,
    resolution: int | Sequence[int] | None = None,
    strong_field: bool = True,
    fraction: str = "measured",
    eps: Sequence[float] | None = None,
) -> SweepPlan:
    """Sweep plan with ``alpha_2n = alpha2/theta_n`` (and ``beta_2n = beta2/theta_n``).

    ``theta_n`` is the measure of the phase-2 set: the rasterized one by default,
    or the analytic one with ``fraction="analytic"``. Default resolutions keep 8
    elements across a cross bar and 6 across a fiber (capped at 64 in 3D).
    """
    if kind not in ("cross", "fiber", "triaxial"):
        raise ValueError(f"unknown sweep kind {kind!r}")
    if fraction not in ("measured", "analytic"):
        raise ValueError("fraction must be 'measured' or 'analytic'")
    sizes = list(sizes)
    if resolution is None:
        if kind == "cross":
            res = [resolution_for(2 * t, 8) for t in sizes]
        else:
            res = [resolution_for(2 * r, 6, cap=64) for r in sizes]
    elif isinstance(resolution, int):
        res = [resolution] * len(sizes)
    else:
        res = list(resolution)
    if eps is not None and len(eps) != len(sizes):
        raise ValueError("eps must have one entry per sweep term")
    terms = []
    for n, (size, r) in enumerate(zip(sizes, res)):
        theta = _measure(kind, size, r, ell) if fraction == "measured" else _analytic_measure(kind, size, ell)
        ph2 = phases.phase2(theta, scale_beta=strong_field)
        terms.append(SweepTerm(n, size, theta, ph2.alpha, ph2.beta, r, None if eps is None else eps[n]))
    return SweepPlan(kind, tuple(terms), ell=ell, strong_field=strong_field)


# --- results -------------------------------------------------------------------


def relative_errors(computed: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Entrywise ``|c - p| / |p|``; entries with ``p = 0`` use ``||p||_F`` instead."""
    scale = np.abs(predicted).astype(float)
    fro = float(np.linalg.norm(predicted))
    scale[scale <= 1e-14 * max(fro, 1.0)] = fro if fro > 0 else 1.0
    return np.abs(computed - predicted) / scale


@dataclass
class SweepRecord:
    n: int
    theta: float
    feature_size: float
    resolution: int
    predicted: np.ndarray
    computed: np.ndarray | None = None
    rel_error: np.ndarray | None = None
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    wall_time_s: float = 0.0
    pre_asymptotic: bool = False
    error: str | None = None
    extras: dict = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_error.max()) if self.rel_error is not None else math.inf


@dataclass
class SweepResult:
    kind: str
    phases: LimitPhases
    h: object
    records: list[SweepRecord]
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> SweepRecord:
        return self.records[-1]

    @property
    def ok(self) -> bool:
        return all(r.error is None for r in self.records)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in self.records:
            d = rec.predicted.shape[0]
            for i in range(d):
                for j in range(d):
                    comp = rec.computed[i, j] if rec.computed is not None else math.nan
                    err = rec.rel_error[i, j] if rec.rel_error is not None else math.nan
                    w.writerow([
                        rec.n, repr(rec.theta), repr(rec.feature_size), rec.resolution,
                        f"{i + 1}{j + 1}", repr(float(comp)), repr(float(rec.predicted[i, j])),
                        repr(float(err)), sum(rec.iterations),
                        repr(float(max(rec.residuals))) if rec.residuals else "nan",
                        repr(rec.wall_time_s) if timing else "NA",
                    ])
        return buf.getvalue()

    def to_json(self, timing: bool = True) -> dict:
        recs = []
        for r in self.records:
            recs.append({
                "n": r.n,
                "theta": r.theta,
                "feature_size": r.feature_size,
                "resolution": r.resolution,
                "computed": None if r.computed is None else r.computed.tolist(),
                "predicted": r.predicted.tolist(),
                "rel_error": None if r.rel_error is None else r.rel_error.tolist(),
                "iterations": r.iterations,
                "residuals": r.residuals,
                "wall_time_s": r.wall_time_s if timing else None,
                "pre_asymptotic": r.pre_asymptotic,
                "error": r.error,
                **r.extras,
            })
        return {
            "kind": self.kind,
            "phases": self.phases.as_list(),
            "h": np.asarray(self.h, dtype=float).tolist(),
            "meta": self.meta,
            "records": recs,
        }

    def summary(self) -> str:
        lines = [f"{'n':>3} {'theta':>10} {'size':>8} {'res':>5} {'max rel err':>12}  computed"]
        for r in self.records:
            comp = "FAILED: " + r.error if r.error else np.array2string(
                r.computed, precision=5, separator=",", max_line_width=200).replace("\n", "")
            lines.append(f"{r.n:>3} {r.theta:>10.5g} {r.feature_size:>8.4g} {r.resolution:>5} "
                         f"{r.max_rel_error:>12.4e}  {comp}")
        lines.append("predicted: " + np.array2string(
            self.final.predicted, precision=5, separator=",", max_line_width=200).replace("\n", ""))
        return "\n".join(lines)

    def write(self, out_dir, stem: str, timing: bool = True) -> tuple:
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{stem}.csv"
        json_path = out / f"{stem}.json"
        csv_path.write_text(self.to_csv(timing))
        json_path.write_text(json.dumps(self.to_json(timing), indent=2) + "\n")
        return csv_path, json_path


def _solve_term(rec: SweepRecord, cfield, config: SolverConfig):
    t0 = time.perf_counter()
    try:
        eff = effective_tensor(cfield, config)
    except NonConvergence as exc:
        rec.error = str(exc)
        rec.residuals = [exc.residual]
        rec.iterations = [exc.iterations]
        rec.wall_time_s = time.perf_counter() - t0
        log.warning("term n=%d failed: %s", rec.n, exc)
        return None
    rec.computed = eff.matrix
    rec.rel_error = relative_errors(eff.matrix, rec.predicted)
    rec.iterations = list(eff.diagnostics["iterations"])
    rec.residuals = list(eff.diagnostics["residuals"])
    rec.wall_time_s = time.perf_counter() - t0
    return eff


def run_cross_sweep(
    phases: LimitPhases, ell: float, h: float, plan: SweepPlan, config: SolverConfig | None = None
) -> SweepResult:
    """Cross-structure sweep compared against the closed-form limit tensor."""
    config = config or SolverConfig()
    if plan.kind != "cross":
        raise ValueError("plan is not a cross plan")
    h = float(h)
    predicted = cross_formula(phases, ell, h)
    records = []
    for term in plan.terms:
        _check_scaling(phases, term, plan.strong_field)
        mask = build_cross_cell(term.feature_size, ell, term.resolution)
        ph2 = PerturbedPhase(term.alpha2_n, term.beta2_n)
        cfield = assemble_conductivity(mask, phases.phase1, ph2, h)
        rec = SweepRecord(term.n, term.theta, term.feature_size, term.resolution, predicted.copy(),
                          pre_asymptotic=bool(mask.flags.all()))
        eff = _solve_term(rec, cfield, config)
        if eff is not None and h == 0.0:
            rec.extras["voigt_reuss"] = [
                list(voigt_reuss_bounds(mask, phases.alpha1, term.alpha2_n, axis)) for axis in (1, 2)
            ]
        records.append(rec)
    return SweepResult("cross", phases, h, records, meta={"ell": ell, "strong_field": plan.strong_field})


def run_fiber_sweep_3d(
    phases: LimitPhases, h, plan: SweepPlan, config: SolverConfig | None = None
) -> SweepResult:
    """Fiber (or triaxial) sweep compared against the closed-form limit tensor.

    For the single-fiber lattice each record also carries the measured ratios
    ``(xi_1/xi_3, xi_2/xi_3)`` of the mean fiber gradient under axial loading.
    """
    config = config or SolverConfig()
    if plan.kind not in ("fiber", "triaxial"):
        raise ValueError("plan is not a 3D fiber plan")
    h = np.asarray(h, dtype=float)
    if h.shape != (3,):
        raise ValueError("3D sweep requires a 3-vector h")
    predicted = fiber_formula_3d(phases, h) if plan.kind == "fiber" else triaxial_formula(phases, h)
    builder = build_fiber_cell_3d if plan.kind == "fiber" else build_triaxial_fiber_cell
    regime = plan.regime_ok()
    if regime is False:
        warnings.warn("eps_n^2 |ln r_n| is not decreasing along the plan (nonlocal regime risk)")
    records = []
    indicator = plan.regime_indicator()
    for k, term in enumerate(plan.terms):
        _check_scaling(phases, term, plan.strong_field)
        mask = builder(term.feature_size, term.resolution)
        ph2 = PerturbedPhase(term.alpha2_n, term.beta2_n)
        cfield = assemble_conductivity(mask, phases.phase1, ph2, h)
        rec = SweepRecord(term.n, term.theta, term.feature_size, term.resolution, predicted.copy())
        if indicator is not None:
            rec.extras["regime_indicator"] = indicator[k]
        eff = _solve_term(rec, cfield, config)
        if eff is not None and plan.kind == "fiber":
            xi = fiber_average_gradient(eff.correctors[2], mask)
            rec.extras["xi"] = xi.tolist()
            rec.extras["xi_ratios"] = [float(xi[0] / xi[2]), float(xi[1] / xi[2])]
            rec.extras["xi_predicted"] = list(fiber_xi_coefficients(phases, h))
        records.append(rec)
    return SweepResult(plan.kind, phases, h, records,
                       meta={"strong_field": plan.strong_field, "regime_ok": regime})


def _check_scaling(phases: LimitPhases, term: SweepTerm, strong_field: bool):
    if not math.isclose(term.theta * term.alpha2_n, phases.alpha2, rel_tol=1e-12):
        raise ValueError(f"term n={term.n} violates theta_n * alpha_2n = alpha2")
    if strong_field and not math.isclose(term.theta * term.beta2_n, phases.beta2, rel_tol=1e-12, abs_tol=1e-300):
        raise ValueError(f"term n={term.n} violates theta_n * beta_2n = beta2")


# --- property harnesses ------------------------------------------------------------


def run_duality_harness(
    mask: PhaseMask,
    phase1: PerturbedPhase,
    phase2: PerturbedPhase,
    h: float,
    config: SolverConfig | None = None,
) -> dict:
    """Check Keller duality and Dykhne stability of the 2D two-phase field.

    Deviations are relative to the norm of the tensor being compared against.
    The Dykhne part is skipped (reported ``None``) when the transform is
    degenerate (``h = 0`` or ``beta2 = beta1``).
    """
    config = config or SolverConfig()
    if mask.geometry.dim != 2:
        raise ValueError("duality harness is two-dimensional")
    cfield = assemble_conductivity(mask, phase1, phase2, float(h))
    sigma = effective_tensor(cfield, config).matrix
    dual = effective_tensor(cfield.map(keller_dual), config).matrix
    predicted_dual = keller_dual(sigma)
    report = {
        "sigma_star": sigma.tolist(),
        "sigma_star_dual_field": dual.tolist(),
        "keller_deviation": float(np.linalg.norm(predicted_dual - dual) / np.linalg.norm(dual)),
        "dykhne_deviation": None,
        "transformed_symmetric": None,
        "coefficients": None,
    }
    try:
        coeffs = dykhne_coefficients(phase1, phase2, float(h))
    except DegenerateTransform as exc:
        report["dykhne_skipped"] = str(exc)
        return report
    tfield = cfield.map(lambda A: dykhne_transform_tensor(A, coeffs))
    transformed = effective_tensor(tfield, config).matrix
    pushed = dual_push_forward(sigma, coeffs)
    report.update(
        sigma_star_transformed=transformed.tolist(),
        dykhne_deviation=float(np.linalg.norm(transformed - pushed) / np.linalg.norm(transformed)),
        transformed_symmetric=tfield.is_symmetric(1e-10),
        coefficients={"a": coeffs.a, "b": coeffs.b, "p": coeffs.p, "q": coeffs.q, "r": coeffs.r},
    )
    return report


def run_dykhne_asymptotics(phases: LimitPhases, h: float, thetas: Sequence[float]) -> list[dict]:
    """Transformed phases and ``(p, q, r)`` along a decreasing ``theta`` sequence.

    Limits: ``alpha1' -> alpha1``, ``theta alpha2' -> alpha2 + beta2^2 h^2/alpha2``,
    ``p -> 1``, ``q -> -h beta1``, ``r -> 0``.
    """
    thetas = list(thetas)
    if any(b >= a for a, b in zip(thetas, thetas[1:])):
        raise ValueError("theta sequence must be decreasing")
    h = float(h)
    limits = {
        "alpha1_prime": phases.alpha1,
        "theta_alpha2_prime": shifted_alpha2(phases, h),
        "p": 1.0,
        "q": -h * phases.beta1,
        "r": 0.0,
    }
    rows = []
    for theta in thetas:
        ph2 = phases.phase2(theta)
        coeffs = dykhne_coefficients(phases.phase1, ph2, h)
        row = {
            "theta": theta,
            "a": coeffs.a,
            "b": coeffs.b,
            "alpha1_prime": dykhne_transform_phase(phases.phase1, h, coeffs),
            "theta_alpha2_prime": theta * dykhne_transform_phase(ph2, h, coeffs),
            "p": coeffs.p,
            "q": coeffs.q,
            "r": coeffs.r,
        }
        row.update({f"err_{k}": abs(row[k] - v) for k, v in limits.items()})
        rows.append(row)
    return rows
