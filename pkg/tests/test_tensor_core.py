import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hallhom.tensor_core import (
    I2,
    J,
    DegenerateTransform,
    DykhneCoefficients,
    NonRealTransform,
    PerturbedPhase,
    SingularMatrixError,
    antisymmetric_part,
    dual_pull_back,
    dual_push_forward,
    dykhne_coefficients,
    dykhne_phase_asymptotics,
    dykhne_roots,
    dykhne_transform_phase,
    dykhne_transform_tensor,
    from_complex,
    hall_matrix_3d,
    is_positive_definite_symmetric_part,
    is_symmetric,
    keller_dual,
    perturbed_tensor,
    to_complex,
)

alphas = st.floats(0.1, 20.0)
betas = st.floats(-5.0, 5.0)
hs = st.floats(-3.0, 3.0).filter(lambda h: abs(h) > 0.05)


@st.composite
def phase_pairs(draw):
    p1 = PerturbedPhase(draw(alphas), draw(betas))
    p2 = PerturbedPhase(draw(alphas), draw(betas))
    assume(abs(p2.beta - p1.beta) > 0.05)
    return p1, p2


@st.composite
def invertible_2x2(draw):
    A = np.array(draw(st.lists(st.floats(-5, 5), min_size=4, max_size=4))).reshape(2, 2)
    assume(abs(np.linalg.det(A)) > 1e-2)
    return A


def test_phase_rejects_nonpositive_alpha():
    with pytest.raises(ValueError, match="alpha must be > 0"):
        PerturbedPhase(0.0, 1.0)
    with pytest.raises(ValueError):
        PerturbedPhase(float("nan"))


def test_perturbed_tensor_dispatch():
    ph = PerturbedPhase(2.0, 0.5)
    np.testing.assert_array_equal(perturbed_tensor(ph, 2.0), 2 * I2 + J)
    A = perturbed_tensor(ph, [0, 0, 2.0])
    np.testing.assert_array_equal(A, [[2, -1, 0], [1, 2, 0], [0, 0, 2]])
    with pytest.raises(ValueError):
        perturbed_tensor(ph, [1.0, 2.0])


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_hall_matrix_is_cross_product(h, x):
    np.testing.assert_allclose(hall_matrix_3d(h) @ x, np.cross(h, x), atol=1e-9)


@given(invertible_2x2())
def test_keller_dual_is_involution(A):
    np.testing.assert_allclose(keller_dual(keller_dual(A)), A, rtol=1e-9, atol=1e-9)


def test_keller_dual_scalar_and_singular():
    np.testing.assert_allclose(keller_dual(2 * I2 + J), (2 * I2 - J) / 5)
    with pytest.raises(SingularMatrixError):
        keller_dual(np.ones((2, 2)))
    with pytest.raises(ValueError):
        keller_dual(np.eye(3))


@given(alphas, betas, alphas, betas)
def test_complex_representation_is_homomorphism(a1, b1, a2, b2):
    A, B = a1 * I2 + b1 * J, a2 * I2 + b2 * J
    za, zb = to_complex(A), to_complex(B)
    np.testing.assert_allclose(A @ B, from_complex(za * zb), atol=1e-9)
    np.testing.assert_allclose(A + B, from_complex(za + zb), atol=1e-12)
    np.testing.assert_allclose(np.linalg.inv(A), from_complex(1 / za), atol=1e-9)


def test_to_complex_rejects_other_forms():
    with pytest.raises(ValueError):
        to_complex(np.diag([1.0, 2.0]))


def test_worked_example_coefficients():
    p1, p2 = PerturbedPhase(1.0, 0.0), PerturbedPhase(2.0, 1.0)
    a_plus, a_minus = dykhne_roots(p1, p2, 1.0)
    assert a_plus == pytest.approx(2 + math.sqrt(5))
    assert a_minus == pytest.approx(2 - math.sqrt(5))
    c = dykhne_coefficients(p1, p2, 1.0)
    assert c.a == pytest.approx(2 + math.sqrt(5))
    assert c.b == pytest.approx(1.0)
    assert (c.p, c.q, c.r) == pytest.approx((0.947214, 0.223607, 0.236068), abs=1e-6)
    assert dykhne_transform_phase(p1, 1.0, c) == pytest.approx(1.0)
    assert dykhne_transform_phase(p2, 1.0, c) == pytest.approx((3 + math.sqrt(5)) / 2)


@pytest.mark.parametrize("h, b1, b2", [(0.0, 0.0, 1.0), (1.0, 0.7, 0.7)])
def test_degenerate_transform(h, b1, b2):
    with pytest.raises(DegenerateTransform, match="h != 0"):
        dykhne_coefficients(PerturbedPhase(1.0, b1), PerturbedPhase(2.0, b2), h)


def test_identity_coefficients_bypass():
    c = DykhneCoefficients.identity()
    A = 3 * I2 + 0.5 * J
    np.testing.assert_array_equal(dykhne_transform_tensor(A, c), A)
    np.testing.assert_array_equal(dual_push_forward(A, c), A)
    assert dykhne_transform_phase(PerturbedPhase(3.0, 0.5), 1.0, c) == 3.0
    assert c.is_consistent()


def test_from_ab_rejects_degenerate():
    with pytest.raises(DegenerateTransform):
        DykhneCoefficients.from_ab(0.0, 1.0)
    with pytest.raises(DegenerateTransform):
        DykhneCoefficients.from_ab(1.0, -1.0)


def test_mismatched_phase_is_not_real():
    c = dykhne_coefficients(PerturbedPhase(1.0), PerturbedPhase(2.0, 1.0), 1.0)
    with pytest.raises(NonRealTransform):
        dykhne_transform_phase(PerturbedPhase(5.0, -3.0), 1.0, c)


@settings(max_examples=200)
@given(phase_pairs(), hs)
def test_roots_satisfy_quadratic(pair, h):
    p1, p2 = pair
    try:
        roots = dykhne_roots(p1, p2, h)
    except DegenerateTransform:
        return
    d1 = p1.alpha**2 + h * h * p1.beta**2
    d2 = p2.alpha**2 + h * h * p2.beta**2
    for a in roots:
        val = h * (p2.beta - p1.beta) * a * a + (d1 - d2) * a - h * (p2.beta * d1 - p1.beta * d2)
        scale = abs(h * (p2.beta - p1.beta)) * a * a + abs(d1 - d2) * abs(a) + abs(h) * (abs(p2.beta) * d1 + abs(p1.beta) * d2)
        assert abs(val) <= 1e-9 * scale


@settings(max_examples=200)
@given(phase_pairs(), hs)
def test_transformed_medium_is_symmetric_and_positive(pair, h):
    """Both transformed phases are real positive multiples of I, and the sign rule holds."""
    p1, p2 = pair
    try:
        c = dykhne_coefficients(p1, p2, h)
    except (DegenerateTransform, NonRealTransform):
        return
    assert c.a * c.a + c.b > 0
    assert c.is_consistent()
    for ph in (p1, p2):
        T = dykhne_transform_tensor(perturbed_tensor(ph, h), c)
        assert is_symmetric(T, 1e-8)
        assert abs(T[0, 1]) <= 1e-8 * abs(T[0, 0])
        assert T[0, 0] == pytest.approx(dykhne_transform_phase(ph, h, c), rel=1e-8)
        assert is_positive_definite_symmetric_part(T)


@settings(max_examples=200)
@given(phase_pairs(), hs)
def test_root_selection_sign_rule(pair, h):
    """A root yields a positive medium exactly when a (a - h beta1) > 0."""
    p1, p2 = pair
    try:
        roots = dykhne_roots(p1, p2, h)
    except DegenerateTransform:
        return
    for a in roots:
        s = a * (a - h * p1.beta)
        assume(abs(s) > 1e-6 * (a * a + 1))
        try:
            c = DykhneCoefficients.from_ab(a, (-a * a * h * p1.beta + a * (p1.alpha**2 + h * h * p1.beta**2)) / (a - h * p1.beta))
        except DegenerateTransform:
            continue
        assert (c.a * c.a + c.b > 0) == (s > 0)


@given(invertible_2x2(), phase_pairs(), hs)
def test_push_forward_and_pull_back_are_inverse(A, pair, h):
    try:
        c = dykhne_coefficients(*pair, h)
    except (DegenerateTransform, NonRealTransform):
        return
    S = A @ A.T + 0.5 * I2 + 0.3 * J  # positive-definite symmetric part
    try:
        back = dual_pull_back(dual_push_forward(S, c), c)
    except SingularMatrixError:
        return
    np.testing.assert_allclose(back, S, rtol=1e-6, atol=1e-6 * np.abs(S).max())


@given(alphas, betas, phase_pairs(), hs)
def test_push_forward_agrees_with_pointwise_map_on_scalars(a, b, pair, h):
    """On matrices of the form alpha I + beta J both maps reduce to the same Moebius map."""
    try:
        c = dykhne_coefficients(*pair, h)
    except (DegenerateTransform, NonRealTransform):
        return
    S = a * I2 + b * J
    try:
        pf = dual_push_forward(S, c)
        tt = dykhne_transform_tensor(S, c)
    except SingularMatrixError:
        return
    np.testing.assert_allclose(pf, tt, rtol=1e-7, atol=1e-7 * np.abs(pf).max())


def test_antisymmetric_part():
    A = np.array([[1.0, 2.0], [0.0, 3.0]])
    np.testing.assert_array_equal(antisymmetric_part(A), [[0, 1], [-1, 0]])


def test_phase_asymptotics_approach_limits():
    p1 = PerturbedPhase(1.0, 0.5)
    prev = None
    for theta in (1e-2, 1e-4, 1e-6):
        a1, ta2 = dykhne_phase_asymptotics(p1, PerturbedPhase(2.0 / theta, 1.0 / theta), theta, 1.0)
        err = (abs(a1 - 1.0), abs(ta2 - 2.5))
        if prev:
            assert err[0] < prev[0] and err[1] < prev[1]
        prev = err
    assert max(prev) < 1e-5
