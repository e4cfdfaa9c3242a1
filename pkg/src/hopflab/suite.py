"""The acceptance matrix as runnable rows.

Each row builds its problems from library primitives, compares against closed
forms or checker verdicts, and returns an :class:`Outcome` with deterministic
values and CSV tables.  Presets: "paper-core" runs every row at full size,
"smoke" a reduced subset.
"""
from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import barrier as bar
from . import grid as gr
from . import operator as opm
from . import verify as V
from .geometry import Ball, Box, Implicit
from .mc import PathConfig, estimate_gauge, estimate_survival
from .reports import Outcome, Table

LAMBDA_1D = np.pi ** 2 / 8
GAUGE_W0 = 1.0 - 1.0 / np.cosh(np.sqrt(2.0))

INTERVAL = Box((-1.0,), (1.0,))
BALL1 = Ball((0.0,), 1.0)
BALL2 = Ball((0.0, 0.0), 1.0)


def _reports(reps) -> list:
    return [r.to_dict() for r in reps]


def _all_ok(reps) -> bool:
    return all(r.ok for r in reps)


def _positive_g(case: V.SubsolutionCase) -> np.ndarray:
    return np.abs(case.g) + 0.1


def _compact_c(x):
    return np.maximum(0.0, 1.0 - 4.0 * np.sum(x ** 2, axis=1))


# ---------------------------------------------------------------------------

def row_eigen(quick: bool = False) -> Outcome:
    _, disc = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 200)
    ep = gr.principal_eigenpair(disc)
    x = disc.grid.nodes[:, 0]
    exact = np.cos(np.pi * x / 2)
    rel = abs(ep.lam - LAMBDA_1D) / LAMBDA_1D
    err = float(np.max(np.abs(ep.phi - exact)))
    tab = Table("eigenfunction_1d", ["x", "phi", "exact"], list(zip(x, ep.phi, exact)), "curve",
                "principal eigenfunction")
    return Outcome("1-eigenpair", rel <= 0.01 and err <= 0.01,
                   {"lambda": ep.lam, "lambda_exact": LAMBDA_1D, "rel_error": rel, "phi_sup_error": err,
                    "iterations": ep.iterations}, tables=[tab])


def row_gauge(quick: bool = False) -> Outcome:
    op = opm.laplacian(1, c=1.0)
    _, disc = gr.assemble(op, INTERVAL, 1 / 200)
    w = gr.gauge_grid(disc)
    k = disc.grid.nearest([0.0])
    w_grid = float(w[k])
    n, dt = (10_000, 1e-3) if quick else (100_000, 1e-4)
    est = estimate_gauge(op, INTERVAL, [0.0], PathConfig(dt=dt, n_paths=n, seed=20201))
    w_mc = est.extra["w"]
    budget = 3 * est.ci + 0.02
    ok = abs(w_grid - GAUGE_W0) <= 1e-3 and abs(w_mc - GAUGE_W0) <= budget and not est.biased
    x = disc.grid.nodes[:, 0]
    exact = 1 - np.cosh(np.sqrt(2) * x) / np.cosh(np.sqrt(2))
    tab = Table("gauge_1d", ["x", "w", "exact"], list(zip(x, w, exact)), "curve", "gauge w")
    return Outcome("2-gauge", ok, {"w_grid": w_grid, "w_mc": w_mc, "ci95": est.ci, "w_exact": GAUGE_W0,
                                   "mc_budget": budget, "n_paths": n, "dt": dt}, tables=[tab])


def fk_scenarios():
    """(name, operator, f, g) on (-1, 1) from x0 = 0."""
    return [
        ("pure-diffusion", opm.laplacian(1), 1.0, 0.0),
        ("drifted-diffusion", opm.drifted(1, drift=[0.5]), 0.0, lambda x: (x[:, 0] > 0).astype(float)),
        ("two-point-jump", opm.two_point_jump(1, size=0.5), 0.5, lambda x: x[:, 0] ** 2),
    ]


def row_feynman_kac(quick: bool = False) -> Outcome:
    n, dt = (5_000, 1e-3) if quick else (40_000, 2.5e-4)
    reps = []
    rows = []
    for i, (name, op, f, g) in enumerate(fk_scenarios()):
        r = V.mc_vs_grid(op, INTERVAL, [0.0], PathConfig(dt=dt, n_paths=n, seed=300 + i), 1 / 100, f=f, g=g)
        r.details["scenario"] = name
        reps.append(r)
        rows.append((i, r.details["mc"], r.details["ci95"], r.details["grid"], r.details["budget"]))
    tab = Table("feynman_kac", ["scenario", "mc", "ci95", "grid", "budget"], rows)
    return Outcome("3-feynman-kac", _all_ok(reps), {"n_paths": n, "dt": dt}, _reports(reps), [tab])


def weak_max_presets():
    return [
        ("laplacian", opm.laplacian(2)),
        ("drifted", opm.drifted(2)),
        ("anisotropic", opm.anisotropic()),
        ("two-point-jump", opm.two_point_jump(2)),
        ("truncated-stable", opm.truncated_stable(2)),
    ]


def row_weak_max(quick: bool = False) -> Outcome:
    n_cases = 20 if quick else 200
    reps = []
    margins = []
    for name, op in weak_max_presets():
        _, disc0 = gr.assemble(op, BALL2, 1 / 16)
        for s in range(n_cases):
            rs = np.random.default_rng(10_000 + s)
            disc = disc0 if s % 2 == 0 else disc0.with_killing(2.0 * rs.random(disc0.n))
            case = V.gen_subsolution(disc, seed=s)
            r = V.check_weak_max(case)
            r.details["preset"] = name
            reps.append(r)
            margins.append((name, s, r.margin))
    worst = min(m[2] for m in margins)
    ok = _all_ok(reps) and worst >= -1e-9
    tab = Table("weak_max_margins", ["preset", "seed", "margin"], margins, "histogram", "weak maximum margins")
    return Outcome("4-weak-max", ok, {"cases": len(reps), "min_margin": worst}, _reports(reps), [tab])


def barrier_presets():
    return [("laplacian-1d", opm.laplacian(1), INTERVAL),
            ("laplacian-2d", opm.laplacian(2), BALL2),
            ("two-point-jump-1d", opm.two_point_jump(1), INTERVAL)]


def row_barrier(quick: bool = False) -> Outcome:
    values = {}
    ok = True
    rows = []
    for name, op, dom in barrier_presets():
        consts = bar.choose_constants(op, 1.0, region=dom)
        params = consts.params(dom.anchor())
        chk = bar.verify_barrier(op, params, 1.0)
        ok &= chk.passed
        values[name] = {"gamma": consts.gamma, "alpha0": consts.alpha0, "M": consts.M, "r0": consts.r0,
                        "lower_bound": consts.lower_bound, "min_value": chk.min_value, "passed": chk.passed}
        rows += [(name, float(np.linalg.norm(p - params.ybar)) / params.r, v)
                 for p, v in zip(chk.points[::25], chk.values[::25])]
    tab = Table("barrier_values", ["preset", "radius_over_r", "value"], rows)
    return Outcome("5-barrier", ok, values, tables=[tab])


def row_hopf(quick: bool = False) -> Outcome:
    reps = []
    consts = bar.choose_constants(opm.laplacian(2), region=BALL2)
    ref = V.hopf_closed_form(consts, BALL2, 2.0, lambda p: np.sum(p ** 2, axis=1), np.array([1.0, 0.0]))
    ok_ref = ref.verdict == V.PASS and ref.details["rhs"] > 0
    reps.append(ref)
    n_cases = 10 if quick else 50
    rows = []
    for s in range(n_cases):
        rs = np.random.default_rng(600 + s)
        d = 1 + s % 2
        drift = rs.uniform(-1, 1, size=d)
        op = opm.drifted(d, drift=drift)
        dom = BALL1 if d == 1 else BALL2
        _, disc = gr.assemble(op, dom, 1 / 100 if d == 1 else 1 / 16)
        base = V.gen_subsolution(disc, seed=s)
        case = V.gen_subsolution(disc, f=base.f, g=_positive_g(base), seed=s)
        c = bar.choose_constants(op, region=dom)
        r = V.check_hopf(case, c)
        r.details["dim"] = d
        reps.append(r)
        rows.append((s, d, r.details.get("lhs", np.nan), r.details.get("rhs", np.nan), r.margin))
    ok = ok_ref and all(r.verdict == V.PASS for r in reps)
    tab = Table("hopf_margins", ["seed", "dim", "lhs", "rhs", "margin"], rows, "histogram", "Hopf margins")
    return Outcome("6-hopf", ok, {"reference_lhs": 2.0, "reference_rhs": ref.details["rhs"],
                                  "cases": n_cases}, _reports(reps), [tab])


def row_quantitative_hopf(quick: bool = False) -> Outcome:
    n_cases = 10 if quick else 50
    reps = []
    rows = []
    for d, dom, h in ((1, BALL1, 1 / 100), (2, BALL2, 1 / 16)):
        op = opm.laplacian(d, c=1.0)
        _, disc = gr.assemble(op, dom, h)
        free = disc.without_killing()
        ep = gr.principal_eigenpair(free)
        minor = gr.minorization(free, 1.0)
        consts = bar.choose_constants(op, region=dom)
        op_b = opm.laplacian(d).with_c(_compact_c, 1.0, 0.0)
        _, disc_b = gr.assemble(op_b, dom, h)
        consts_b = bar.choose_constants(op_b, region=dom)
        w_b = gr.gauge_grid(disc_b)
        for s in range(n_cases):
            base = V.gen_subsolution(disc, seed=s)
            case = V.gen_subsolution(disc, f=base.f, g=_positive_g(base), seed=s)
            base_b = V.gen_subsolution(disc_b, seed=s)
            case_b = V.gen_subsolution(disc_b, f=base_b.f, g=_positive_g(base_b), seed=s)
            for r in (V.check_qhl_IA(case, consts), V.check_qhl_IIA(case, ep, minor),
                      V.check_qhl_IIB(case, ep), V.check_qhl_IB(case_b, consts_b, w=w_b)):
                r.details["dim"] = d
                reps.append(r)
                rows.append((r.check, d, s, r.margin))
    ok = all(r.verdict == V.PASS for r in reps)
    tab = Table("qhl_margins", ["check", "dim", "seed", "margin"], rows, "histogram",
                "quantitative Hopf margins")
    return Outcome("7-quantitative-hopf", ok, {"cases_per_check": 2 * n_cases}, _reports(reps), [tab])


def row_delta(quick: bool = False) -> Outcome:
    _, disc = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 200)
    rep = V.check_delta_bound(disc, np.ones(disc.n))
    a_fit = rep.details["a_fit"]
    hs = [0.1, 0.05] if quick else [0.1, 0.05, 0.025]
    study = V.delta_refinement(opm.laplacian(2), Implicit("twin-cusp"), hs)
    fits = [a for _, a in study]
    degrades = all(b < a for a, b in zip(fits, fits[1:])) and fits[-1] < 0.1 * a_fit
    x = disc.grid.nodes[:, 0]
    Rf = gr.resolvent(disc, 0.0, np.ones(disc.n))
    tab = Table("delta_ratio_1d", ["x", "ratio", "exact"], list(zip(x, Rf / disc.grid.delta(), 1 + np.abs(x))),
                "curve", "R f / delta")
    tab2 = Table("delta_cusp_refinement", ["h", "a_fit"], study, "curve", "cusp domain a_fit")
    return Outcome("8-delta-bound", a_fit >= 0.9 and rep.verdict == V.PASS and degrades,
                   {"a_fit_1d": a_fit, "cusp_a_fit": study}, [rep.to_dict()], [tab, tab2],
                   ["cusp control: a_fit decreases under refinement"])


def row_weak_harnack(quick: bool = False) -> Outcome:
    n_cases = 20 if quick else 200
    reps = []
    rows = []
    for name, op in (("laplacian", opm.laplacian(2)), ("two-point-jump", opm.two_point_jump(2))):
        _, disc = gr.assemble(op, BALL2, 1 / 16)
        cbar = float(np.max(disc.c_vec))
        minor = gr.minorization(disc.without_killing(), cbar + 1.0)
        Vmask = V.interior_mask(disc, 0.25)
        for s in range(n_cases // 2):
            base = V.gen_subsolution(disc, seed=s, kind="super")
            case = V.gen_subsolution(disc, f=base.f, g=np.abs(base.g), seed=s, kind="super")
            r = V.check_weak_harnack(case, Vmask, minor)
            r.details["preset"] = name
            reps.append(r)
            rows.append((name, s, r.details.get("C_fit", np.nan), r.details.get("C_ref", np.nan)))
    ok = all(r.verdict == V.PASS for r in reps)
    tab = Table("weak_harnack", ["preset", "seed", "C_fit", "C_ref"], rows)
    return Outcome("9-weak-harnack", ok, {"cases": len(reps)}, _reports(reps), [tab])


def adjoint_pair():
    op = opm.variable_drift(lambda x: 0.5 * x + 0.3, [0.8], 1)
    adj = opm.formal_adjoint(op, lambda x: np.full(x.shape[0], 0.5), 0.5, 0.5)
    return op, adj


def row_structural(quick: bool = False) -> Outcome:
    values = {}
    _, disc = gr.assemble(opm.two_point_jump(2), BALL2, 1 / 16)
    rs = np.random.default_rng(1000)
    f = rs.random(disc.n)
    a, b = 0.5, 2.0
    lhs = gr.resolvent(disc, a, f) - gr.resolvent(disc, b, f)
    rhs = (b - a) * gr.resolvent(disc, a, gr.resolvent(disc, b, f))
    values["resolvent_identity"] = float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs)))
    _, d1 = gr.assemble(opm.laplacian(1), INTERVAL, 1 / 200)
    ep = gr.principal_eigenpair(d1)
    pt = gr.semigroup(d1, 1.0, ep.phi)
    values["eigen_identity"] = float(np.max(np.abs(pt - np.exp(-ep.lam) * ep.phi)))
    minor = gr.minorization(disc, 1.0)
    values["minorization_gap"] = minor.gap()
    values["minorization_min_psi"] = float(np.min(minor.psi))
    values["minorization_min_chi"] = float(np.min(minor.chi))
    values["transpose_duality"] = gr.duality_residual(disc, disc.transpose_adjoint(), 1.0)
    op, adj = adjoint_pair()
    hs = [1 / 20, 1 / 40, 1 / 80]
    res = []
    for h in hs:
        _, da = gr.assemble(op, INTERVAL, h)
        _, db = gr.assemble(adj, INTERVAL, h)
        res.append(gr.duality_residual(da, db, 1.0))
    slope = float(np.polyfit(np.log(hs), np.log(res), 1)[0])
    values["analytic_duality"] = res
    values["analytic_duality_slope"] = slope
    ok = (values["resolvent_identity"] <= 1e-8 and values["eigen_identity"] <= 1e-6
          and values["minorization_gap"] >= -1e-12 and values["minorization_min_psi"] > 0
          and values["transpose_duality"] <= 1e-10 and slope >= 0.75 and res[-1] < res[0])
    tab = Table("analytic_duality", ["h", "residual"], list(zip(hs, res)), "curve", "adjoint duality residual")
    return Outcome("10-structural", ok, values, tables=[tab])


# ---------------------------------------------------------------------------
# negative controls

def negative_controls() -> list:
    """Each checker on a hand-built violating input; every report should FAIL."""
    out = []
    _, d2 = gr.assemble(opm.laplacian(2), BALL2, 1 / 16)
    x = d2.grid.nodes
    bump = np.exp(-4 * np.sum(x ** 2, axis=1))
    g0 = np.zeros(d2.grid.ext_nodes.shape[0])
    out.append(V.check_weak_max(V.from_values(d2, 1.0 + bump, g0)))
    out.append(V.check_strong_max(V.from_values(d2, 1.0 + bump, g0)))
    # claimed maximum at a strict interior minimum
    out.append(V.check_bony(d2, np.sum(x ** 2, axis=1), np.ones_like(g0), xh=np.zeros(2)))

    _, d1 = gr.assemble(opm.laplacian(1, c=1.0), BALL1, 1 / 100)
    x1 = d1.grid.nodes[:, 0]
    flat = 1.0 - 0.1 * (1.0 - np.abs(x1)) ** 3
    g1 = np.ones(d1.grid.ext_nodes.shape[0])
    flat_case = V.from_values(d1, flat, g1)
    consts = bar.choose_constants(opm.laplacian(1, c=1.0), region=BALL1)
    out.append(V.check_hopf(flat_case, consts))
    out.append(V.check_qhl_IA(flat_case, consts))
    op_b = opm.laplacian(1).with_c(_compact_c, 1.0, 0.0)
    _, d1b = gr.assemble(op_b, BALL1, 1 / 100)
    out.append(V.check_qhl_IB(V.from_values(d1b, flat, g1), bar.choose_constants(op_b, region=BALL1)))
    free = d1.without_killing()
    ep = gr.principal_eigenpair(free)
    near = V.from_values(d1, np.full(d1.n, 1.0 - 1e-6), g1)
    out.append(V.check_qhl_IIA(near, ep, gr.minorization(free, 1.0)))
    out.append(V.check_qhl_IIB(near, ep))
    _, dc = gr.assemble(opm.laplacian(2), Implicit("twin-cusp"), 0.025)
    out.append(V.check_delta_bound(dc, np.ones(dc.n)))
    minor = gr.minorization(d2.without_killing(), 1.0)
    spike = np.where(np.abs(x[:, 0]) < 0.2, 1.0, 0.0)
    out.append(V.check_weak_harnack(V.from_values(d2, spike, g0, kind="super"), V.interior_mask(d2, 0.25), minor))
    wrong = opm.drifted(1, drift=[1.0])
    out.append(V.mc_vs_grid(opm.laplacian(1), INTERVAL, [0.0], PathConfig(1e-3, 4000, seed=5), 1 / 50,
                            f=1.0, grid_op=wrong))
    return out


def row_negative(quick: bool = False) -> Outcome:
    reps = negative_controls()
    failed = [r.verdict == V.FAIL for r in reps]
    rows = [(r.check, r.verdict, r.margin) for r in reps]
    tab = Table("negative_controls", ["check", "verdict", "margin"], rows)
    return Outcome("11-negative-controls", all(failed), {"checks": [r.check for r in reps]},
                   _reports(reps), [tab], ["every report is expected to FAIL"])


# ---------------------------------------------------------------------------

ROWS: dict = {
    "1-eigenpair": row_eigen,
    "2-gauge": row_gauge,
    "3-feynman-kac": row_feynman_kac,
    "4-weak-max": row_weak_max,
    "5-barrier": row_barrier,
    "6-hopf": row_hopf,
    "7-quantitative-hopf": row_quantitative_hopf,
    "8-delta-bound": row_delta,
    "9-weak-harnack": row_weak_harnack,
    "10-structural": row_structural,
    "11-negative-controls": row_negative,
}

PRESETS = {
    "paper-core": [(name, False) for name in ROWS],
    "smoke": [("1-eigenpair", True), ("2-gauge", True), ("4-weak-max", True), ("5-barrier", True),
              ("8-delta-bound", True), ("10-structural", True)],
}


def run_suite(preset: str, timings: dict = None, progress: Callable = None) -> list:
    if preset not in PRESETS:
        raise KeyError(preset)
    outcomes = []
    for name, quick in PRESETS[preset]:
        t0 = time.perf_counter()
        oc = ROWS[name](quick)
        if timings is not None:
            timings[name] = time.perf_counter() - t0
        if progress is not None:
            progress(oc, time.perf_counter() - t0)
        outcomes.append(oc)
    return outcomes
