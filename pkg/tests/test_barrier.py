import numpy as np
import pytest

from hopflab import barrier as bar
from hopflab import operator as opm
from hopflab.geometry import Ball, Box

INTERVAL = Box((-1.0,), (1.0,))
DISC = Ball((0.0, 0.0), 1.0)


def test_gamma_formula_and_radii():
    c1 = bar.choose_constants(opm.laplacian(1, c=1.0), 1.0, region=INTERVAL)
    assert c1.gamma == pytest.approx(4.0)
    assert c1.r0 == pytest.approx(0.0625)
    # killing only enters the lower bound, so dropping it allows a larger radius
    assert bar.choose_constants(opm.laplacian(1), 1.0, region=INTERVAL).r0 > c1.r0
    c2 = bar.choose_constants(opm.laplacian(2), 1.0, region=DISC)
    assert c2.gamma == pytest.approx(8.0)
    assert c2.r0 == pytest.approx(2.0 ** -9)


@pytest.mark.parametrize("op,dom", [(opm.laplacian(1), INTERVAL), (opm.laplacian(2), DISC),
                                    (opm.two_point_jump(1), INTERVAL), (opm.drifted(2), DISC)])
def test_barrier_reaches_target(op, dom):
    consts = bar.choose_constants(op, 1.0, region=dom)
    assert consts.lower_bound > 1.0
    chk = bar.verify_barrier(op, consts.params(dom.anchor()), 1.0)
    assert chk.passed and chk.min_value >= consts.lower_bound - 1e-9


def test_eta_vanishes_on_outer_sphere():
    p = bar.choose_constants(opm.laplacian(2), region=DISC).params([0.1, 0.0])
    e = bar.eta(p)
    pts = np.array([[0.1 + p.r, 0.0], [0.1, p.r]])
    np.testing.assert_allclose(e(pts), 0.0, atol=1e-14)
    assert e(np.array([[0.1, 0.0]]))[0] > 0


def test_eta_derivatives_match_differences():
    p = bar.choose_constants(opm.laplacian(2), region=DISC).params([0.0, 0.0])
    e = bar.eta(p)
    x = np.array([[0.6 * p.r, 0.3 * p.r]])
    step = 1e-4 * p.r
    g = np.array([(e(x + step * np.eye(2)[i]) - e(x - step * np.eye(2)[i]))[0] / (2 * step) for i in range(2)])
    np.testing.assert_allclose(e.grad(x)[0], g, rtol=1e-6)


def test_constant_search_fails_loudly_when_unreachable():
    with pytest.raises(bar.ConstantSelectionError):
        bar.choose_constants(opm.two_point_jump(2), 1.0, region=DISC)


def test_radius_contract():
    consts = bar.choose_constants(opm.laplacian(1), region=INTERVAL)
    with pytest.raises(opm.ContractError):
        consts.params([0.0], r=2 * consts.r0)


def test_exit_probability_bound_is_a_probability():
    eb = bar.exit_probability_bound(opm.laplacian(2, c=1.0), [0.0, 0.0], 0.5, 1.0)
    assert 0 < eb.a_star < 1 and not eb.vacuous
    assert np.all(np.diff(eb.bounds) >= 0)


def test_rho_modulus_nondecreasing():
    nodes = np.linspace(-0.99, 0.99, 199)[:, None]
    w = 1 - nodes[:, 0] ** 2
    rho = bar.rho_modulus(w, nodes, INTERVAL, [0.1, 0.3, 0.5])
    assert np.all(np.diff(rho) >= 0)
    np.testing.assert_allclose(rho, 1 - (1 - np.array([0.1, 0.3, 0.5])) ** 2, atol=0.02)


def test_exterior_barrier_is_superharmonic_off_centre():
    psi = bar.exterior_barrier([2.0, 0.0], 1.0, 1.0)
    margin, _, ok = bar.verify_exterior_barrier(opm.laplacian(2), psi, DISC, n_samples=512)
    assert ok and margin >= 0
