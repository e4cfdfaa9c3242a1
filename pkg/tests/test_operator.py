import numpy as np
import pytest

from hopflab import operator as opm
from hopflab.geometry import Ball, Box


def square():
    return opm.quadratic_field(np.eye(1))


def test_half_laplacian_of_square_norm_is_dimension():
    for d in (1, 2, 3):
        u = opm.quadratic_field(np.eye(d))
        x = np.random.default_rng(d).uniform(-1, 1, size=(7, d))
        np.testing.assert_allclose(opm.apply(opm.laplacian(d), u, x), d, rtol=1e-12)


def test_constant_drift_acts_on_linear_field():
    op = opm.drifted(2, drift=[0.5, -2.0])
    u = opm.linear_field([3.0, 1.0])
    x = np.zeros((4, 2))
    np.testing.assert_allclose(opm.apply(op, u, x), 0.5 * 3.0 - 2.0, rtol=1e-12)


def test_two_point_jump_on_square():
    # symmetric atoms +-s e1 with total rate 2m: S x^2 = 2m * s^2
    op = opm.two_point_jump(1, size=0.5, mass=1.5)
    x = np.array([[0.1], [-0.3]])
    local = opm.apply_local(op, square(), x)
    jump = opm.apply_nonlocal(op, square(), x)
    np.testing.assert_allclose(local, 1.0)
    np.testing.assert_allclose(jump, 3.0 * 0.25, rtol=1e-12)


def test_constants_are_annihilated():
    for op in (opm.truncated_stable(2), opm.two_point_jump(2), opm.anisotropic()):
        x = np.random.default_rng(0).uniform(-0.5, 0.5, size=(5, op.dim))
        np.testing.assert_allclose(opm.apply(op, opm.constant_field(2.0), x), 0.0, atol=1e-12)


def test_truncated_stable_is_symmetric_with_finite_mass():
    k = opm.truncated_stable(2).kernel
    assert np.all(k.compensator() == 0.0)
    assert 0 < k.intensity_bound < np.inf
    assert k.ball_mass(0.05) <= k.ball_mass(0.5) <= k.intensity_bound + 1e-12


def test_scaled_operator_is_linear():
    op = opm.two_point_jump(2, c=1.0)
    u = opm.quadratic_field(np.diag([1.0, 2.0]), [0.3, 0.0], 1.0)
    x = np.random.default_rng(2).uniform(-1, 1, size=(6, 2))
    np.testing.assert_allclose(opm.apply(op.scaled(3.0), u, x), 3.0 * opm.apply(op, u, x), rtol=1e-10)


def test_operator_bounds_anisotropic():
    b = opm.operator_bounds(opm.anisotropic(), Ball((0.0, 0.0), 1.0))
    assert b.lam == pytest.approx(1.0)
    assert b.trace_q == pytest.approx(3.0)


def test_ellipticity_failure_raises():
    op = opm.OperatorSpec(opm.constant_coefficients(np.zeros((1, 1))), opm.ZeroKernel(1))
    with pytest.raises(opm.EllipticityError):
        opm.operator_bounds(op, Box((-1.0,), (1.0,)))


def test_contracts():
    with pytest.raises(opm.ContractError):
        opm.laplacian(1).with_c(lambda x: np.ones(x.shape[0]))
    with pytest.raises(opm.ContractError):
        opm.laplacian(1, c=-1.0)
    with pytest.raises(opm.ContractError):
        opm.formal_adjoint(opm.two_point_jump(1), lambda x: np.zeros(x.shape[0]), 0.0)
    with pytest.raises(opm.ContractError):
        opm.formal_adjoint(opm.laplacian(1), lambda x: -np.ones(x.shape[0]), 1.0)


def test_formal_adjoint_flips_drift_and_adds_divergence():
    op = opm.variable_drift(lambda x: 0.5 * x + 0.3, [0.8], 1)
    adj = opm.formal_adjoint(op, lambda x: np.full(x.shape[0], 0.5), 0.5, 0.5)
    x = np.array([[0.2]])
    assert adj.coeffs.b(x)[0, 0] == pytest.approx(-(0.1 + 0.3))
    assert adj.coeffs.c(x)[0] == pytest.approx(0.5)


def test_vmo_modulus_of_constant_is_zero():
    dom = Ball((0.0, 0.0), 1.0)
    assert opm.vmo_modulus(lambda x: np.ones(x.shape[0]), 0.1, dom, n_centers=50, n_inner=16) == pytest.approx(0.0)
    osc = opm.vmo_modulus(lambda x: np.sign(x[:, 0]), 0.1, dom, n_centers=200, n_inner=32)
    assert osc > 0
