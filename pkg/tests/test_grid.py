import numpy as np
import pytest
import scipy.sparse as sp

from hopflab import grid as gr
from hopflab import operator as opm
from hopflab.geometry import Ball, Box, Implicit

import oracles

INTERVAL = Box((-1.0,), (1.0,))
DISC = Ball((0.0, 0.0), 1.0)


def test_scheme_is_monotone_and_irreducible():
    for op in (opm.laplacian(2), opm.anisotropic(), opm.two_point_jump(2), opm.truncated_stable(2),
               opm.drifted(2)):
        _, disc = gr.assemble(op, DISC, 1 / 8)
        off = disc.A_int - sp.diags(disc.A_int.diagonal())
        assert off.min() >= -gr.MONO_TOL
        assert gr.irreducible(disc)
        gr.certify_alpha_zero(disc)


def test_principal_eigenvalue_interval():
    _, disc = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 100)
    ep = gr.principal_eigenpair(disc)
    assert ep.lam == pytest.approx(oracles.dirichlet_lambda_interval(), rel=1e-3)
    x = disc.grid.nodes[:, 0]
    assert np.max(np.abs(ep.phi - oracles.dirichlet_phi_interval(x))) < 5e-3
    assert np.all(ep.phi > 0)


def test_exit_time_interval_is_exact_for_quadratics():
    _, disc = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 50)
    u = gr.resolvent(disc, 0.0, np.ones(disc.n))
    np.testing.assert_allclose(u, oracles.exit_time_interval(disc.grid.nodes[:, 0]), atol=1e-10)


def test_exit_time_ball():
    _, disc = gr.assemble(opm.laplacian(2), DISC, 1 / 32)
    u = gr.resolvent(disc, 0.0, np.ones(disc.n))
    err = np.max(np.abs(u - oracles.exit_time_ball(disc.grid.nodes)))
    assert err < 0.02


def test_gauge_interval():
    _, disc = gr.assemble(opm.laplacian(1, c=1.0), INTERVAL, 1 / 200)
    w = gr.gauge_grid(disc)
    x = disc.grid.nodes[:, 0]
    np.testing.assert_allclose(w, 1 - oracles.gauge_interval(x, 1.0), atol=1e-4)


def test_drift_dirichlet_matches_scale_function():
    b = 0.8
    _, disc = gr.assemble(opm.drifted(1, drift=[b]), INTERVAL, 1 / 200)
    g = (disc.grid.ext_nodes[:, 0] > 0).astype(float)
    u = gr.resolvent(disc, 0.0, None, g)
    x = disc.grid.nodes[:, 0]
    assert np.max(np.abs(u - oracles.linear_drift_dirichlet(x, b))) < 5e-3


def test_semigroup_of_eigenfunction():
    _, disc = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 100)
    ep = gr.principal_eigenpair(disc)
    v = gr.semigroup(disc, 0.7, ep.phi)
    np.testing.assert_allclose(v, np.exp(-0.7 * ep.lam) * ep.phi, atol=1e-6)


def test_resolvent_kernel_nonnegative_and_consistent():
    _, disc = gr.assemble(opm.two_point_jump(1, size=0.3), INTERVAL, 1 / 40)
    K = gr.resolvent_kernel(disc, 0.5)
    assert K.min() > 0
    f = np.random.default_rng(0).random(disc.n)
    np.testing.assert_allclose(K @ f * disc.grid.cell, gr.resolvent(disc, 0.5, f), rtol=1e-10)


def test_minorization_and_transpose_duality():
    _, disc = gr.assemble(opm.two_point_jump(2), DISC, 1 / 8)
    m = gr.minorization(disc, 1.0)
    assert m.gap() >= -1e-12
    assert np.all(m.psi > 0) and np.all(m.chi > 0)
    assert gr.duality_residual(disc, disc.transpose_adjoint(), 1.0) < 1e-10


def test_analytic_adjoint_residual_decreases():
    op = opm.variable_drift(lambda x: 0.5 * x + 0.3, [0.8], 1)
    adj = opm.formal_adjoint(op, lambda x: np.full(x.shape[0], 0.5), 0.5, 0.5)
    res = []
    for h in (1 / 20, 1 / 40, 1 / 80):
        _, a = gr.assemble(op, INTERVAL, h)
        _, b = gr.assemble(adj, INTERVAL, h)
        res.append(gr.duality_residual(a, b, 1.0))
    assert res[0] > res[1] > res[2]


def test_boundary_fitted_cusp_assembles():
    grid, disc = gr.assemble(opm.laplacian(2), Implicit("twin-cusp"), 0.05)
    assert grid.n > 0 and disc.min_offdiag >= -gr.MONO_TOL


def test_export_coo(tmp_path):
    _, disc = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 10)
    path = tmp_path / "a.txt"
    gr.export_coo(disc.A_int, path)
    assert path.read_text().strip()
