import numpy as np
import pytest

from hopflab import barrier as bar
from hopflab import grid as gr
from hopflab import operator as opm
from hopflab import suite
from hopflab import verify as V
from hopflab.geometry import Ball, Box
from hopflab.mc import PathConfig

INTERVAL = Box((-1.0,), (1.0,))
BALL1 = Ball((0.0,), 1.0)
DISC = Ball((0.0, 0.0), 1.0)


@pytest.fixture(scope="module")
def disc2():
    return gr.assemble(opm.two_point_jump(2), DISC, 1 / 16)[1]


def test_generated_cases_are_certified(disc2):
    for s in range(5):
        case = V.gen_subsolution(disc2, seed=s)
        assert case.certified
        # subsolution: (A - c) u >= 0 in D
        assert np.min(disc2.apply(case.u, case.g)) >= -case.tol


def test_weak_and_strong_max_pass(disc2):
    for s in range(10):
        case = V.gen_subsolution(disc2, seed=s)
        assert V.check_weak_max(case).verdict == V.PASS
        assert V.check_strong_max(case).ok


def test_uncertified_input_fails_with_reason(disc2):
    x = disc2.grid.nodes
    bad = V.from_values(disc2, 1.0 + np.exp(-4 * np.sum(x ** 2, axis=1)), np.zeros(disc2.grid.ext_nodes.shape[0]))
    assert not bad.certified
    rep = V.check_weak_max(bad)
    assert rep.verdict == V.FAIL


def test_comparison_gap_nonnegative(disc2):
    rs = np.random.default_rng(0)
    lo = rs.random(disc2.n)
    g = rs.random(disc2.grid.ext_nodes.shape[0])
    assert V.comparison_gap(disc2, lo, lo + rs.random(disc2.n), g) >= -1e-12


def test_hopf_closed_form_reference():
    consts = bar.choose_constants(opm.laplacian(2), region=DISC)
    rep = V.hopf_closed_form(consts, DISC, 2.0, lambda p: np.sum(p ** 2, axis=1), np.array([1.0, 0.0]))
    assert rep.verdict == V.PASS and rep.details["rhs"] > 0


def test_hopf_on_random_case():
    op = opm.drifted(1, drift=[0.3])
    _, disc = gr.assemble(op, BALL1, 1 / 100)
    base = V.gen_subsolution(disc, seed=3)
    case = V.gen_subsolution(disc, f=base.f, g=np.abs(base.g) + 0.1, seed=3)
    assert V.check_hopf(case, bar.choose_constants(op, region=BALL1)).verdict == V.PASS


def test_quantitative_checks_on_1d_ball():
    op = opm.laplacian(1, c=1.0)
    _, disc = gr.assemble(op, BALL1, 1 / 100)
    free = disc.without_killing()
    ep = gr.principal_eigenpair(free)
    minor = gr.minorization(free, 1.0)
    consts = bar.choose_constants(op, region=BALL1)
    for s in range(3):
        base = V.gen_subsolution(disc, seed=s)
        case = V.gen_subsolution(disc, f=base.f, g=np.abs(base.g) + 0.1, seed=s)
        for rep in (V.check_qhl_IA(case, consts), V.check_qhl_IIA(case, ep, minor), V.check_qhl_IIB(case, ep)):
            assert rep.verdict == V.PASS, rep.details


def test_delta_bound_1d_matches_one_plus_abs_x():
    _, disc = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 200)
    rep = V.check_delta_bound(disc, np.ones(disc.n))
    assert rep.details["a_fit"] >= 0.9 and rep.verdict == V.PASS
    assert V.check_delta_bound(disc, np.zeros(disc.n)).verdict == V.NOT_APPLICABLE


def test_bony_true_and_false_claims():
    _, disc = gr.assemble(opm.laplacian(2), DISC, 1 / 16)
    x = disc.grid.nodes
    ge = disc.grid.ext_nodes
    assert V.check_bony(disc, -np.sum(x ** 2, axis=1), -np.sum(ge ** 2, axis=1)).ok
    rep = V.check_bony(disc, np.sum(x ** 2, axis=1), np.ones(ge.shape[0]), xh=np.zeros(2))
    assert rep.verdict == V.FAIL


def test_weak_harnack_on_supersolutions(disc2):
    minor = gr.minorization(disc2.without_killing(), 1.0)
    mask = V.interior_mask(disc2, 0.25)
    for s in range(5):
        base = V.gen_subsolution(disc2, seed=s, kind="super")
        case = V.gen_subsolution(disc2, f=base.f, g=np.abs(base.g), seed=s, kind="super")
        assert V.check_weak_harnack(case, mask, minor).verdict == V.PASS


def test_mc_vs_grid_detects_wrong_operator():
    cfg = PathConfig(1e-3, 4000, seed=5)
    good = V.mc_vs_grid(opm.laplacian(1), INTERVAL, [0.0], cfg, 1 / 50, f=1.0)
    bad = V.mc_vs_grid(opm.laplacian(1), INTERVAL, [0.0], cfg, 1 / 50, f=1.0, grid_op=opm.drifted(1, drift=[1.0]))
    assert good.verdict == V.PASS and bad.verdict == V.FAIL


def test_negative_controls_all_fail():
    reps = suite.negative_controls()
    assert len(reps) == 11
    assert all(r.verdict == V.FAIL for r in reps), [(r.check, r.verdict) for r in reps]


def test_report_serializes():
    _, disc = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 20)
    d = V.check_weak_max(V.gen_subsolution(disc, seed=0)).to_dict()
    assert {"check", "inputs_digest", "margin", "tol", "verdict", "details"} <= set(d)
