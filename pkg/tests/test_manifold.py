"""Checks for points, tangents, skew matrices, retractions, and samplers."""

import numpy as np
import pytest

from rsdm.manifold import (
    RetractionKind,
    SkewMatrix,
    StiefelPoint,
    TangentVector,
    feasibility_residual,
    qr_orthonormalize,
    random_stiefel,
    random_tangent,
    retract,
    retraction_bound_estimate,
    riemannian_gradient,
    skew_part,
)

ALL_KINDS = (RetractionKind.QR, RetractionKind.POLAR,
             RetractionKind.CAYLEY, RetractionKind.EXPONENTIAL)
RECT_KINDS = (RetractionKind.QR, RetractionKind.POLAR)


def test_skew_part_of_identity_is_zero():
    out = skew_part(np.eye(2))
    assert np.array_equal(np.asarray(out), np.zeros((2, 2)))


def test_skew_part_hand_example():
    out = np.asarray(skew_part(np.array([[0.0, 2.0], [0.0, 0.0]])))
    assert np.array_equal(out, np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_skew_part_matches_elementwise_oracle():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((5, 5))
    out = np.asarray(skew_part(a))
    oracle = np.empty((5, 5))
    for i in range(5):
        for j in range(5):
            oracle[i, j] = (a[i, j] - a[j, i]) / 2.0
    # elementwise formula; the SkewMatrix mirror must not perturb a bit
    assert np.array_equal(out, oracle)


def test_skew_part_rejects_rectangular():
    with pytest.raises(ValueError):
        skew_part(np.zeros((3, 2)))


def test_skew_matrix_norm_and_antisymmetry():
    rng = np.random.default_rng(12)
    s = skew_part(rng.standard_normal((6, 6)))
    dense = np.asarray(s)
    assert np.array_equal(dense, -dense.T)
    assert s.norm_sq() == pytest.approx(np.sum(dense * dense), rel=1e-14)
    assert s.shape == (6, 6)


def test_riemannian_gradient_vanishes_at_g_equal_x():
    x = random_stiefel(7, 3, np.random.default_rng(1))
    u = riemannian_gradient(x, x.data)
    assert np.linalg.norm(u.data) <= 1e-14


def test_riemannian_gradient_sphere_formula():
    # n=2, p=1 at X = e1: the projection keeps only the second component
    x = StiefelPoint(np.array([[1.0], [0.0]]))
    g = np.array([[0.7], [-2.5]])
    u = riemannian_gradient(x, g)
    assert np.allclose(u.data, np.array([[0.0], [-2.5]]), atol=1e-15)


def test_riemannian_gradient_is_idempotent():
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = random_stiefel(9, 4, rng)
        g = rng.standard_normal((9, 4))
        once = riemannian_gradient(x, g).data
        twice = riemannian_gradient(x, once).data
        assert np.linalg.norm(twice - once) <= 1e-12


def test_riemannian_gradient_lands_in_tangent_space():
    rng = np.random.default_rng(3)
    x = random_stiefel(8, 5, rng)
    u = riemannian_gradient(x, rng.standard_normal((8, 5))).data
    cross = x.data.T @ u
    assert np.linalg.norm(cross + cross.T) <= 1e-12


def test_qr_orthonormalize_sign_convention():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((6, 3))
    q = qr_orthonormalize(a)
    assert feasibility_residual(q) <= 1e-12
    # positive-diagonal R makes the factor unique: orthonormal input is a fixed point
    assert np.allclose(qr_orthonormalize(q), q, atol=1e-13)


def test_retract_zero_tangent_is_identity():
    rng = np.random.default_rng(5)
    square = random_stiefel(5, 5, rng)
    for kind in ALL_KINDS:
        out = retract(kind, square, np.zeros((5, 5)))
        assert np.array_equal(out.data, square.data)
    rect = random_stiefel(6, 2, rng)
    for kind in RECT_KINDS:
        out = retract(kind, rect, np.zeros((6, 2)))
        assert np.array_equal(out.data, rect.data)


def test_retract_qr_on_sphere_is_normalization():
    x = StiefelPoint(np.array([[1.0], [0.0]]))
    for t in (0.3, 1.7):
        out = retract(RetractionKind.QR, x, np.array([[0.0], [t]]))
        expected = np.array([[1.0], [t]]) / np.sqrt(1.0 + t * t)
        assert np.allclose(out.data, expected, atol=1e-15)


def test_retract_exponential_closed_form_rotation():
    theta = 0.83
    x = StiefelPoint(np.eye(2))
    omega = np.array([[0.0, theta], [-theta, 0.0]])
    out = retract(RetractionKind.EXPONENTIAL, x, omega)
    expected = np.array([[np.cos(theta), np.sin(theta)],
                         [-np.sin(theta), np.cos(theta)]])
    assert np.allclose(out.data, expected, atol=1e-14)


def test_retract_agrees_with_step_to_first_order():
    # ||retract(tU) - (X + tU)|| is O(t^2): shrinking t by 10 shrinks it ~100x
    rng = np.random.default_rng(6)
    x = random_stiefel(6, 6, rng)
    u = random_tangent(x, rng)
    for kind in ALL_KINDS:
        errs = []
        for t in (1e-2, 1e-3):
            moved = retract(kind, x, TangentVector(t * u.data, x, validate=False))
            errs.append(np.linalg.norm(moved.data - (x.data + t * u.data)))
        ratio = errs[0] / errs[1]
        assert 30.0 <= ratio <= 300.0, f"{kind.value}: ratio {ratio}"


def test_retract_outputs_are_feasible():
    rng = np.random.default_rng(7)
    x = random_stiefel(8, 8, rng)
    u = random_tangent(x, rng)
    for kind in ALL_KINDS:
        out = retract(kind, x, TangentVector(0.9 * u.data, x, validate=False))
        assert feasibility_residual(out) <= 1e-10


def test_retract_determinant_components():
    # Cayley and exponential stay in the rotation component; QR and polar
    # land in whichever component the input point occupies.
    rng = np.random.default_rng(8)
    x = StiefelPoint(np.eye(4))
    u = random_tangent(x, rng)
    tv = TangentVector(0.5 * u.data, x, validate=False)
    for kind in (RetractionKind.CAYLEY, RetractionKind.EXPONENTIAL):
        out = retract(kind, x, tv)
        assert np.linalg.det(out.data) == pytest.approx(1.0, abs=1e-8)
    for kind in RECT_KINDS:
        out = retract(kind, x, tv)
        assert abs(np.linalg.det(out.data)) == pytest.approx(1.0, abs=1e-8)


def test_square_only_retractions_reject_rectangular_points():
    x = random_stiefel(5, 2, np.random.default_rng(9))
    u = np.zeros((5, 2))
    u[4, 0] = 0.1
    for kind in (RetractionKind.CAYLEY, RetractionKind.EXPONENTIAL):
        with pytest.raises(ValueError):
            retract(kind, x, u)


def test_feasibility_residual_values():
    assert feasibility_residual(np.array([[2.0], [0.0]])) == pytest.approx(3.0)
    q = qr_orthonormalize(np.random.default_rng(10).standard_normal((9, 4)))
    assert feasibility_residual(q) <= 1e-12


def test_random_stiefel_feasible_and_deterministic():
    a = random_stiefel(11, 5, np.random.default_rng(42))
    b = random_stiefel(11, 5, np.random.default_rng(42))
    assert feasibility_residual(a) <= 1e-12
    assert np.array_equal(a.data, b.data)


def test_random_stiefel_entry_second_moment():
    # uniform draws on the n=8 frame: E[X_11^2] = 1/8
    rng = np.random.default_rng(13)
    trials = 100000
    samples = np.empty(trials)
    for i in range(trials):
        samples[i] = random_stiefel(8, 3, rng).data[0, 0] ** 2
    est = samples.mean()
    se = samples.std(ddof=1) / np.sqrt(trials)
    assert abs(est - 1.0 / 8.0) <= 3.0 * se


def test_random_tangent_is_unit_and_tangent():
    rng = np.random.default_rng(14)
    x = random_stiefel(7, 4, rng)
    u = random_tangent(x, rng)
    assert np.linalg.norm(u.data) == pytest.approx(1.0, abs=1e-12)
    cross = x.data.T @ u.data
    assert np.linalg.norm(cross + cross.T) <= 1e-12


def test_point_and_tangent_validation():
    with pytest.raises(ValueError):
        StiefelPoint(2.0 * np.eye(3))
    x = random_stiefel(6, 3, np.random.default_rng(15))
    with pytest.raises(ValueError):
        TangentVector(np.ones((6, 3)), x)
    # validate=False constructions skip the checks on purpose
    StiefelPoint(2.0 * np.eye(3), validate=False)


def test_retraction_bound_qr_on_sphere():
    # normalization never moves farther than the straight-line step
    x = StiefelPoint(np.eye(5)[:, :1])
    worst = retraction_bound_estimate(RetractionKind.QR, x, 50, np.random.default_rng(16))
    assert worst <= 1.0 + 1e-6


def test_retraction_bound_exponential_rotations():
    x = StiefelPoint(np.eye(3))
    worst = retraction_bound_estimate(RetractionKind.EXPONENTIAL, x, 50,
                                      np.random.default_rng(17))
    assert worst <= 1.0 + 1e-6


def test_retraction_stretch_tends_to_one_for_small_steps():
    rng = np.random.default_rng(18)
    x = random_stiefel(6, 6, rng)
    u = random_tangent(x, rng)
    t = 1e-5
    for kind in ALL_KINDS:
        moved = retract(kind, x, TangentVector(t * u.data, x, validate=False))
        ratio = np.linalg.norm(moved.data - x.data) / t
        assert ratio == pytest.approx(1.0, abs=1e-4)
