"""Closed-form homogenized tensors for the high-contrast Hall problem.

``LimitPhases`` holds the limit constants: phase 1 is ``(alpha1, beta1)`` and
the scaled high-conductivity phase satisfies ``|omega_n| alpha_2n -> alpha2``,
``|omega_n| beta_2n -> beta2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .microstructure import PhaseMask
from .tensor_core import J, PerturbedPhase, hall_matrix_3d


@dataclass(frozen=True)
class LimitPhases:
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float

    def __post_init__(self):
        if self.alpha1 <= 0:
            raise ValueError("alpha1 must be > 0")
        if self.alpha2 <= 0:
            raise ValueError("alpha2 must be > 0")

    @property
    def phase1(self) -> PerturbedPhase:
        return PerturbedPhase(self.alpha1, self.beta1)

    def phase2(self, theta: float = 1.0, scale_beta: bool = True) -> PerturbedPhase:
        """Phase-2 coefficients at measure ``theta``: ``(alpha2/theta, beta2/theta)``.

        With ``scale_beta=False`` the Hall coefficient stays at ``beta2`` (outside
        the strong-field regime).
        """
        return PerturbedPhase(self.alpha2 / theta, self.beta2 / theta if scale_beta else self.beta2)

    def as_list(self) -> list[float]:
        return [self.alpha1, self.beta1, self.alpha2, self.beta2]


@dataclass(frozen=True)
class CrossGeometry:
    t: float
    ell: float = 1.0

    def __post_init__(self):
        if not 0 < self.t <= 0.5:
            raise ValueError("t must lie in (0, 1/2]")
        if self.ell < 1:
            raise ValueError("ell must be >= 1")

    @property
    def area(self) -> float:
        return 2 * self.t * (self.ell + 1) - 4 * self.t**2


def shifted_alpha2(phases: LimitPhases, h: float) -> float:
    """``alpha2 + beta2^2 h^2 / alpha2``."""
    return phases.alpha2 + phases.beta2**2 * h * h / phases.alpha2


def homogenized_law_2d(
    sigma0: Callable[[float, float], np.ndarray], phases: LimitPhases, h: float
) -> np.ndarray:
    """``sigma0(alpha1, alpha2 + beta2^2 h^2/alpha2) + beta1 h J``."""
    return np.asarray(sigma0(phases.alpha1, shifted_alpha2(phases, h)), dtype=float) + phases.beta1 * h * J


def cross_sigma0(a1: float, a2: float, ell: float = 1.0) -> np.ndarray:
    """Field-free limit tensor of the cross: ``diag(a1 + a2/(l+1), a1 + a2/(l(l+1)))``."""
    return np.diag([a1 + a2 / (ell + 1), a1 + a2 / (ell * (ell + 1))])


def cross_formula(phases: LimitPhases, ell: float, h: float) -> np.ndarray:
    a1, b1, a2, b2 = phases.as_list()
    k = (a2 * a2 + b2 * b2 * h * h) / a2
    return np.array(
        [
            [a1 + k / (ell + 1), -h * b1],
            [h * b1, a1 + k / (ell * (ell + 1))],
        ]
    )


def voigt_reuss_bounds(mask: PhaseMask, a1: float, a2_n: float, axis: int) -> tuple[float, float]:
    """Nested line-average bounds on ``sigma_ii`` for the isotropic two-phase field.

    lower: arithmetic mean across ``x_j`` of the harmonic mean along ``x_i``;
    upper: harmonic mean along ``x_i`` of the arithmetic mean across ``x_j``.
    ``axis`` is 1-based.
    """
    if mask.geometry.dim != 2:
        raise ValueError("Voigt-Reuss line bounds are implemented for 2D masks")
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    a = np.where(mask.flags, a2_n, a1).astype(float)
    i = axis - 1
    j = 1 - i
    lower = float(np.mean(1.0 / np.mean(1.0 / a, axis=i)))
    upper = float(1.0 / np.mean(1.0 / np.mean(a, axis=j)))
    return lower, upper


def voigt_reuss_bounds_field(values: np.ndarray, axis: int) -> tuple[float, float]:
    """Same bounds for an arbitrary per-element scalar array ``values[ix, iy]``."""
    a = np.asarray(values, dtype=float)
    i = axis - 1
    j = 1 - i
    return float(np.mean(1.0 / np.mean(1.0 / a, axis=i))), float(1.0 / np.mean(1.0 / np.mean(a, axis=j)))


def _axial_coefficient(phases: LimitPhases, h, k: int) -> float:
    h = np.asarray(h, dtype=float)
    a2, b2 = phases.alpha2, phases.beta2
    return (a2**3 + a2 * b2**2 * float(h @ h)) / (a2**2 + b2**2 * h[k] ** 2)


def fiber_formula_3d(phases: LimitPhases, h) -> np.ndarray:
    """Limit tensor of the ``x3`` fiber lattice."""
    h = np.asarray(h, dtype=float).reshape(3)
    out = phases.alpha1 * np.eye(3) + phases.beta1 * hall_matrix_3d(h)
    out[2, 2] += _axial_coefficient(phases, h, 2)
    return out


def triaxial_formula(phases: LimitPhases, h) -> np.ndarray:
    """Limit tensor of three orthogonal fiber lattices."""
    h = np.asarray(h, dtype=float).reshape(3)
    out = phases.alpha1 * np.eye(3) + phases.beta1 * hall_matrix_3d(h)
    for k in range(3):
        out[k, k] += _axial_coefficient(phases, h, k)
    return out


def fiber_xi_coefficients(phases: LimitPhases, h) -> tuple[float, float]:
    """``(c1, c2)`` with ``xi_1 = c1 xi_3`` and ``xi_2 = c2 xi_3`` in the fibers."""
    h1, h2, h3 = np.asarray(h, dtype=float).reshape(3)
    a2, b2 = phases.alpha2, phases.beta2
    den = a2**2 + b2**2 * h3**2
    return float((b2**2 * h1 * h3 - a2 * b2 * h2) / den), float((b2**2 * h2 * h3 + a2 * b2 * h1) / den)
