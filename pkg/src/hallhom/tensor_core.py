"""Small-matrix algebra for Hall-perturbed conductivities.

Covers the isotropic-plus-antisymmetric tensors ``alpha I + beta h J`` (2D) and
``alpha I + beta E(h)`` (3D), the Keller dual ``A -> A^T / det A``, and the
Dykhne fractional-linear transformation that turns a non-symmetric two-phase
medium into a symmetric one.

All functions are pure and operate on plain ``numpy`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

J = np.array([[0.0, -1.0], [1.0, 0.0]])
I2 = np.eye(2)
I3 = np.eye(3)

SYMMETRY_RTOL = 1e-10
IMAG_RTOL = 1e-8
SINGULAR_RTOL = 1e-14


class DegenerateTransform(ValueError):
    """The Dykhne coefficients are undefined (h = 0 or beta2 = beta1)."""


class NonRealTransform(ArithmeticError):
    """A transformed phase kept a non-negligible imaginary part."""


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class PerturbedPhase:
    """Isotropic phase with conductivity ``alpha`` and Hall coefficient ``beta``."""

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("phase coefficients must be finite")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")

    def scaled(self, theta: float) -> "PerturbedPhase":
        """Return the high-contrast phase ``(alpha/theta, beta/theta)``."""
        return PerturbedPhase(self.alpha / theta, self.beta / theta)


@dataclass(frozen=True)
class DykhneCoefficients:
    """Coefficients of the map ``A -> ((pA + qJ)^-1 + rJ)^-1``.

    ``(p, q, r)`` are tied to the Moebius pair ``(a, b)`` by
    ``p = a^2/(a^2+b)``, ``q = ab/(a^2+b)``, ``r = 1/a``.
    """

    a: float
    b: float
    p: float
    q: float
    r: float

    @classmethod
    def from_ab(cls, a: float, b: float) -> "DykhneCoefficients":
        if a == 0:
            raise DegenerateTransform("a must be nonzero")
        den = a * a + b
        if den == 0:
            raise DegenerateTransform("a^2 + b must be nonzero")
        return cls(a=a, b=b, p=a * a / den, q=a * b / den, r=1.0 / a)

    @classmethod
    def identity(cls) -> "DykhneCoefficients":
        """Bypass convention: p=1, q=r=0 leaves every tensor unchanged."""
        return cls(a=math.inf, b=0.0, p=1.0, q=0.0, r=0.0)

    @property
    def is_identity(self) -> bool:
        return self.p == 1.0 and self.q == 0.0 and self.r == 0.0

    def is_consistent(self, rtol: float = 1e-12) -> bool:
        if self.is_identity:
            return True
        ref = DykhneCoefficients.from_ab(self.a, self.b)
        return all(
            math.isclose(x, y, rel_tol=rtol, abs_tol=rtol)
            for x, y in ((self.p, ref.p), (self.q, ref.q), (self.r, ref.r))
        )


# --- predicates -------------------------------------------------------------


def is_symmetric(A, tol: float = SYMMETRY_RTOL) -> bool:
    A = np.asarray(A, dtype=float)
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    return bool(np.abs(A - A.T).max() <= tol * scale)


def is_positive_definite_symmetric_part(A, tol: float = 0.0) -> bool:
    A = np.asarray(A, dtype=float)
    return bool(np.linalg.eigvalsh(0.5 * (A + A.T)).min() > tol)


def antisymmetric_part(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return 0.5 * (A - A.T)


# --- generators -------------------------------------------------------------


def hall_matrix_3d(h) -> np.ndarray:
    """``E(h)`` with ``E(h) x = h x x``."""
    h1, h2, h3 = np.asarray(h, dtype=float).reshape(3)
    return np.array([[0.0, -h3, h2], [h3, 0.0, -h1], [-h2, h1, 0.0]])


def perturbed_tensor_2d(phase: PerturbedPhase, h: float) -> np.ndarray:
    return phase.alpha * I2 + phase.beta * float(h) * J


def perturbed_tensor_3d(phase: PerturbedPhase, h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (3,):
        raise ValueError(f"3D Hall vector must have 3 components, got shape {h.shape}")
    return phase.alpha * I3 + phase.beta * hall_matrix_3d(h)


def perturbed_tensor(phase: PerturbedPhase, h) -> np.ndarray:
    """Dispatch on the shape of ``h``: scalar -> 2D, 3-vector -> 3D."""
    if np.ndim(h) == 0:
        return perturbed_tensor_2d(phase, float(h))
    return perturbed_tensor_3d(phase, h)


# --- complex representation alpha I + beta J <-> alpha + i beta -------------


def to_complex(A) -> complex:
    A = np.asarray(A, dtype=float)
    if not (np.isclose(A[0, 0], A[1, 1]) and np.isclose(A[0, 1], -A[1, 0])):
        raise ValueError("matrix is not of the form alpha I + beta J")
    return complex(A[0, 0], A[1, 0])


def from_complex(z: complex) -> np.ndarray:
    return z.real * I2 + z.imag * J


# --- Keller duality ----------------------------------------------------------


def _det_checked(A: np.ndarray) -> float:
    det = float(np.linalg.det(A))
    scale = float(np.abs(A).max()) ** A.shape[0]
    if not math.isfinite(det) or abs(det) <= SINGULAR_RTOL * max(scale, np.finfo(float).tiny):
        raise SingularMatrixError(f"matrix is singular (det = {det:.3e})")
    return det


def _inv_checked(A: np.ndarray) -> np.ndarray:
    _det_checked(A)
    return np.linalg.inv(A)


def keller_dual(A) -> np.ndarray:
    """``A^T / det A``; an involution on invertible 2x2 matrices."""
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise ValueError("Keller duality is two-dimensional")
    return A.T / _det_checked(A)


# --- Dykhne transformation ----------------------------------------------------


def _moebius(alpha: float, beta: float, h: float, a: float, b: float) -> complex:
    s = complex(alpha, h * beta)
    return (a * s + 1j * b) / (a + 1j * s)


def _b_from_a(a: float, phase1: PerturbedPhase, phase2: PerturbedPhase, h: float) -> float:
    # Both expressions are equal at a root; pick the better-conditioned denominator.
    best = None
    for ph in (phase1, phase2):
        den = a - h * ph.beta
        delta = ph.alpha**2 + (h * ph.beta) ** 2
        if best is None or abs(den) > abs(best[0]):
            best = (den, (-a * a * h * ph.beta + a * delta))
    return best[1] / best[0]


def dykhne_roots(phase1: PerturbedPhase, phase2: PerturbedPhase, h: float) -> tuple[float, float]:
    """Both roots ``(a_plus, a_minus)`` of the quadratic fixing ``a``.

    ``a_plus`` uses ``+sqrt`` in the closed-form root formula.
    """
    h = float(h)
    dbeta = phase2.beta - phase1.beta
    if h == 0.0 or dbeta == 0.0:
        raise DegenerateTransform(
            "Dykhne transform undefined: requires h != 0 and beta2 != beta1 "
            f"(h={h}, beta1={phase1.beta}, beta2={phase2.beta}); "
            "the medium is symmetric up to beta1*h*J and needs no transform"
        )
    d1 = phase1.alpha**2 + (h * phase1.beta) ** 2
    d2 = phase2.alpha**2 + (h * phase2.beta) ** 2
    disc = (d2 - d1) ** 2 + 4 * h * h * dbeta * (phase2.beta * d1 - phase1.beta * d2)
    if disc < 0:
        raise DegenerateTransform(f"no real Dykhne coefficient (discriminant {disc:.3e} < 0)")
    sq = math.sqrt(disc)
    den = 2 * h * dbeta
    # Cancellation-free evaluation of the two roots.
    num = (d2 - d1) + math.copysign(sq, d2 - d1) if d2 != d1 else sq
    big = num / den
    c = -h * (phase2.beta * d1 - phase1.beta * d2)  # constant term of the quadratic
    small = c / (h * dbeta) / big if big != 0 else 0.0
    if (d2 - d1) >= 0:
        return big, small
    return small, big


def _is_positive_root(a, phase1, phase2, h, rtol=IMAG_RTOL) -> bool:
    if a == 0:
        return False
    b = _b_from_a(a, phase1, phase2, h)
    if a * a + b <= 0:
        return False
    for ph in (phase1, phase2):
        z = _moebius(ph.alpha, ph.beta, h, a, b)
        if not (z.real > 0 and abs(z.imag) <= max(rtol * abs(z.real), 1e-300)):
            return False
    return True


def dykhne_coefficients(
    phase1: PerturbedPhase, phase2: PerturbedPhase, h: float
) -> DykhneCoefficients:
    """Coefficients making both transformed phases real and positive.

    Among the two roots, those producing a positive transformed medium are
    retained; when both do, the ``+sqrt`` root of the closed form is taken.
    """
    a_plus, a_minus = dykhne_roots(phase1, phase2, h)
    good = [a for a in (a_plus, a_minus) if _is_positive_root(a, phase1, phase2, h)]
    if not good:
        raise NonRealTransform(
            f"neither root ({a_plus:.6g}, {a_minus:.6g}) yields a positive transformed medium"
        )
    a = good[0]
    return DykhneCoefficients.from_ab(a, _b_from_a(a, phase1, phase2, h))


def dykhne_transform_phase(
    phase: PerturbedPhase, h: float, coeffs: DykhneCoefficients, rtol: float = IMAG_RTOL
) -> float:
    """Real conductivity of ``phase`` after the Moebius map ``(as + ib)/(a + is)``."""
    if coeffs.is_identity:
        return phase.alpha
    z = _moebius(phase.alpha, phase.beta, float(h), coeffs.a, coeffs.b)
    if abs(z.imag) > rtol * abs(z.real):
        raise NonRealTransform(
            f"transformed phase {z} is not real; coefficients do not match this phase"
        )
    if z.real <= 0:
        raise NonRealTransform(f"transformed phase {z.real} is not positive")
    return z.real


def dykhne_transform_tensor(A, coeffs: DykhneCoefficients) -> np.ndarray:
    """``((pA + qJ)^-1 + rJ)^-1``."""
    A = np.asarray(A, dtype=float)
    if coeffs.is_identity:
        return A.copy()
    inner = _inv_checked(coeffs.p * A + coeffs.q * J)
    return _inv_checked(inner + coeffs.r * J)


def dual_push_forward(sigma_star, coeffs: DykhneCoefficients) -> np.ndarray:
    """Effective tensor of the transformed medium from that of the original one.

    ``(a S + bJ)(aI + JS)^-1``.
    """
    S = np.asarray(sigma_star, dtype=float)
    if coeffs.is_identity:
        return S.copy()
    a, b = coeffs.a, coeffs.b
    return (a * S + b * J) @ _inv_checked(a * I2 + J @ S)


def dual_pull_back(sigma_prime, coeffs: DykhneCoefficients) -> np.ndarray:
    """Inverse of :func:`dual_push_forward`: ``(aI - S'J)^-1 (a S' - bJ)``."""
    S = np.asarray(sigma_prime, dtype=float)
    if coeffs.is_identity:
        return S.copy()
    a, b = coeffs.a, coeffs.b
    return _inv_checked(a * I2 - S @ J) @ (a * S - b * J)


def dykhne_phase_asymptotics(
    phase1: PerturbedPhase, phase2_scaled: PerturbedPhase, theta: float, h: float
) -> tuple[float, float]:
    """Finite-contrast transformed phases ``(alpha1', theta * alpha2')``.

    As ``theta -> 0`` with ``phase2_scaled = (alpha2/theta, beta2/theta)`` these
    tend to ``(alpha1, alpha2 + beta2^2 h^2 / alpha2)``.
    """
    coeffs = dykhne_coefficients(phase1, phase2_scaled, h)
    a1 = dykhne_transform_phase(phase1, h, coeffs)
    a2 = dykhne_transform_phase(phase2_scaled, h, coeffs)
    return a1, theta * a2
