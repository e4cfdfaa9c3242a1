"""Invariants checked over randomized inputs."""
import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from hopflab import barrier as bar
from hopflab import config as cfgm
from hopflab import geometry as geo
from hopflab import grid as gr
from hopflab import mc
from hopflab import operator as opm
from hopflab import verify as V
from hopflab.geometry import Ball, Box
from hopflab.reports import dumps

INTERVAL = Box((-1.0,), (1.0,))
DISC = Ball((0.0, 0.0), 1.0)
_, D1 = gr.assemble(opm.two_point_jump(1, size=0.4), INTERVAL, 1 / 40)
_, D2 = gr.assemble(opm.truncated_stable(2), DISC, 1 / 8)

FAST = settings(max_examples=25, deadline=None)
SLOW = settings(max_examples=8, deadline=None)

seeds = st.integers(0, 2 ** 32 - 1)


@FAST
@given(seed=seeds, alpha=st.floats(0.0, 5.0))
def test_resolvent_preserves_sign(seed, alpha):
    # discrete maximum principle: f, g >= 0 give u >= 0
    rs = np.random.default_rng(seed)
    disc = D1.with_killing(rs.random(D1.n))
    u = gr.resolvent(disc, alpha, rs.random(D1.n), rs.random(D1.grid.ext_nodes.shape[0]))
    assert u.min() >= -1e-12


@FAST
@given(seed=seeds, scale=st.floats(0.01, 10.0))
def test_gauge_bounded_and_monotone_in_killing(seed, scale):
    rs = np.random.default_rng(seed)
    c = scale * rs.random(D2.n)
    w_lo = gr.gauge_grid(D2.with_killing(c))
    w_hi = gr.gauge_grid(D2.with_killing(c + rs.random(D2.n)))
    assert np.all((w_lo >= -1e-12) & (w_lo <= 1 + 1e-12))
    assert np.all(w_hi >= w_lo - 1e-12)


@FAST
@given(seed=st.integers(0, 10 ** 6))
def test_weak_max_margin_nonnegative(seed):
    rep = V.check_weak_max(V.gen_subsolution(D2, seed=seed))
    assert rep.margin >= -1e-9 and rep.verdict == V.PASS


@SLOW
@given(seed=seeds, block=st.integers(1, 97))
def test_mc_independent_of_blocking(seed, block):
    op = opm.two_point_jump(1, c=0.5)
    a = mc.simulate(op, INTERVAL, [0.2], mc.PathConfig(1e-3, 60, seed=seed))
    b = mc.simulate(op, INTERVAL, [0.2], mc.PathConfig(1e-3, 60, seed=seed, block=block, workers=2))
    np.testing.assert_array_equal(a.tau, b.tau)
    np.testing.assert_array_equal(a.x_tau, b.x_tau)


@SLOW
@given(seed=seeds)
def test_antithetic_mean_is_pair_mean(seed):
    op = opm.laplacian(1, c=1.0)
    cfg = mc.PathConfig(1e-3, 200, seed=seed, antithetic=True)
    batch = mc.simulate(op, INTERVAL, [0.3], cfg)
    est = mc.estimate_gauge(op, INTERVAL, [0.3], cfg, batch=batch)
    pairs = 0.5 * (np.exp(-batch.c_integral[0::2]) + np.exp(-batch.c_integral[1::2]))
    assert abs(est.value - pairs.mean()) < 1e-12
    assert 0 <= est.value <= 1


@SLOW
@given(seed=seeds)
def test_feynman_kac_monotone_in_killing(seed):
    # same paths, larger c: exp(-int c) can only shrink
    cfg = mc.PathConfig(1e-3, 100, seed=seed)
    a = mc.simulate(opm.laplacian(1, c=0.5), INTERVAL, [0.0], cfg)
    b = mc.simulate(opm.laplacian(1, c=2.0), INTERVAL, [0.0], cfg)
    assert np.all(np.exp(-b.c_integral) <= np.exp(-a.c_integral) + 1e-15)


def test_dt_refinement_reduces_exit_bias():
    op = opm.laplacian(1)
    errs = []
    for dt in (4e-3, 1e-3, 2.5e-4):
        est = mc.estimate_exit_time(op, INTERVAL, [0.0], mc.PathConfig(dt, 20000, seed=77))
        errs.append(est.value - 1.0)
    assert errs[0] > errs[2] > -0.02


@FAST
@given(k=st.floats(0.5, 50.0), dk=st.floats(0.0, 50.0))
def test_alpha0_monotone_in_target(k, dk):
    op = opm.laplacian(1)
    b = opm.operator_bounds(op, INTERVAL)
    a = bar.choose_constants(op, k, bounds=b)
    c = bar.choose_constants(op, k + dk, bounds=b)
    assert c.alpha0 >= a.alpha0


@FAST
@given(p=st.lists(st.floats(-2, 2), min_size=2, max_size=2), q=st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_distance_is_lipschitz(p, q):
    dom = geo.domain_from_dict({"variant": "annulus", "center": [0, 0], "r_in": 0.3, "r_out": 1.0})
    dp, dq = geo.delta_D(dom, [p])[0], geo.delta_D(dom, [q])[0]
    assert abs(dp - dq) <= np.linalg.norm(np.subtract(p, q)) + 1e-12


@FAST
@given(slope=st.floats(-5, 5), h=st.floats(1e-3, 0.2))
def test_normal_derivative_of_linear_field(slope, h):
    nd = geo.lower_normal_derivative(lambda x: slope * x[:, 0], [1.0, 0.0], [1.0, 0.0], h / 8, h)
    assert abs(nd.value - slope) <= 1e-9 * (1 + abs(slope))


@FAST
@given(st.dictionaries(st.text(min_size=1, max_size=5),
                       st.one_of(st.floats(allow_nan=False), st.integers(), st.booleans(), st.text(max_size=5)),
                       max_size=6))
def test_dumps_is_canonical(obj):
    s = dumps(obj)
    assert dumps(json.loads(s)) == s


@FAST
@given(h=st.floats(0.001, 1.0), n=st.integers(1, 10 ** 6))
def test_overrides_round_trip(h, n):
    conf = cfgm.load(None, [f"grid.h={h!r}", f"mc.n_paths={n}"])
    assert conf["grid"]["h"] == h and conf["mc"]["n_paths"] == n
