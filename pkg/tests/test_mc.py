import numpy as np
import pytest

from hopflab import mc
from hopflab import operator as opm
from hopflab.geometry import Annulus, Ball, Box

import oracles

INTERVAL = Box((-1.0,), (1.0,))
DISC = Ball((0.0, 0.0), 1.0)


def test_exit_time_interval():
    est = mc.estimate_exit_time(opm.laplacian(1), INTERVAL, [0.3], mc.PathConfig(1e-4, 20000, seed=1))
    ref = oracles.exit_time_interval(0.3)
    # discrete monitoring overshoots by O(sqrt(dt))
    assert abs(est.value - ref) <= 3 * est.ci + 0.02
    assert not est.biased


def test_exit_time_ball():
    est = mc.estimate_exit_time(opm.laplacian(2), DISC, [0.2, 0.1], mc.PathConfig(1e-4, 10000, seed=2))
    ref = oracles.exit_time_ball([0.2, 0.1])[0]
    assert abs(est.value - ref) <= 3 * est.ci + 0.02


def test_gauge_interval():
    est = mc.estimate_gauge(opm.laplacian(1, c=1.0), INTERVAL, [0.0], mc.PathConfig(1e-4, 20000, seed=3))
    assert abs(est.extra["w"] - oracles.gauge_w0(1.0)) <= 3 * est.ci + 0.02


def test_jump_dominated_exit_is_exponential():
    # negligible diffusion and jumps that always leave the interval
    co = opm.constant_coefficients(1e-8 * np.eye(1))
    kern = opm.AtomicKernel(np.array([[3.0], [-3.0]]), np.array([0.5, 0.5]), 2.0)
    op = opm.OperatorSpec(co, kern, "jump-only")
    batch = mc.simulate(op, INTERVAL, [0.0], mc.PathConfig(1e-3, 20000, seed=4, t_max=30.0))
    assert np.all(np.abs(batch.x_tau[:, 0]) > 1.5)
    mean = batch.tau.mean()
    ci = mc.Z95 * batch.tau.std(ddof=1) / np.sqrt(batch.tau.size)
    assert abs(mean - oracles.exponential_mean(2.0)) <= 3 * ci + 1e-3


def test_survival_decay_matches_eigenvalue():
    cfg = mc.PathConfig(1e-3, 20000, seed=5)
    curve = mc.estimate_survival(opm.laplacian(1), INTERVAL, [0.0], np.linspace(0, 3, 13), cfg)
    rate, se = curve.decay_rate(1.0, 3.0)
    assert abs(rate - oracles.survival_decay_rate_interval()) <= 3 * se + 0.05
    assert np.all(np.diff(curve.p) <= 0)


def test_compiled_and_generic_engines_agree():
    for op, dom, x0 in ((opm.two_point_jump(2, c=0.5), DISC, [0.1, 0.0]),
                        (opm.truncated_stable(2), DISC, [0.0, 0.2]),
                        (opm.drifted(1, drift=[0.7]), INTERVAL, [0.0]),
                        (opm.laplacian(2), Annulus((0.0, 0.0), 0.3, 1.0), [0.6, 0.0])):
        cfg = mc.PathConfig(1e-3, 300, seed=9)
        a = mc.simulate(op, dom, x0, cfg, engine="compiled")
        b = mc.simulate(op, dom, x0, cfg, engine="generic")
        np.testing.assert_allclose(a.tau, b.tau, atol=1e-12)
        np.testing.assert_allclose(a.x_tau, b.x_tau, atol=1e-12)
        np.testing.assert_allclose(a.c_integral, b.c_integral, atol=1e-12)


def test_single_path_replay():
    op = opm.two_point_jump(1)
    cfg = mc.PathConfig(1e-3, 50, seed=11)
    batch = mc.simulate(op, INTERVAL, [0.0], cfg)
    one = mc.simulate_path(op, INTERVAL, [0.0], cfg, 37)
    assert one.tau == batch.tau[37]
    np.testing.assert_array_equal(one.x_tau, batch.x_tau[37])


def test_antithetic_pairs_mirror_each_other():
    cfg = mc.PathConfig(1e-3, 200, seed=12, antithetic=True)
    batch = mc.simulate(opm.laplacian(1), INTERVAL, [0.0], cfg)
    np.testing.assert_array_equal(batch.tau[0::2], batch.tau[1::2])
    np.testing.assert_allclose(batch.x_tau[0::2], -batch.x_tau[1::2])


def test_source_integral_gives_exit_time_with_trapezoid():
    cfg = mc.PathConfig(1e-3, 2000, seed=13)
    est = mc.estimate_feynman_kac(opm.laplacian(1), INTERVAL, [0.0], cfg, f=1.0)
    batch = mc.simulate(opm.laplacian(1), INTERVAL, [0.0], cfg, f=1.0)
    np.testing.assert_allclose(batch.source_integral, batch.tau, atol=1e-12)
    assert est.value == pytest.approx(batch.tau.mean())


def test_horizon_flags_bias():
    cfg = mc.PathConfig(1e-3, 500, seed=14, t_max=0.05)
    est = mc.estimate_gauge(opm.laplacian(1, c=1.0), INTERVAL, [0.0], cfg)
    assert est.biased and est.hit_fraction > 0.9


def test_default_horizon_and_start_contract():
    assert mc.default_horizon(opm.laplacian(1), INTERVAL) == pytest.approx(200.0)
    with pytest.raises(opm.ContractError):
        mc.simulate(opm.laplacian(1), INTERVAL, [2.0], mc.PathConfig(1e-3, 10))
    with pytest.raises(opm.ContractError):
        mc.PathConfig(0.0, 10)


def test_diffusion_factor_reproduces_matrix():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    L = mc.diffusion_factor(Q)
    np.testing.assert_allclose(L @ L.T, Q, atol=1e-12)
