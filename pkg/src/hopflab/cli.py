"""Command line entry point.

    hopflab run CONFIG [key=value ...]
    hopflab suite PRESET [--output DIR]
    hopflab list-presets
    hopflab validate CONFIG [key=value ...]

Exit status: 0 when every check passes (or is vacuous / not applicable),
1 on any failure, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import barrier as bar
from . import config as cfgm
from . import grid as gr
from . import mc
from . import operator as opm
from . import suite as suitem
from . import verify as V
from .reports import Outcome, OutputWriter, Table, rerender

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def output_root(conf: cfgm.ScenarioConfig = None, explicit: str = None, name: str = "scenario") -> Path:
    if explicit:
        return Path(explicit)
    if conf is not None and "output" in conf.data:
        return Path(conf["output"])
    base = Path(os.environ.get("HOPFLAB_OUTPUT", "hopflab-output"))
    return base / name


def _path_config(conf) -> mc.PathConfig:
    m = conf["mc"]
    return mc.PathConfig(dt=m["dt"], n_paths=m["n_paths"], seed=m["seed"], t_max=m.get("t_max"),
                         antithetic=m["antithetic"])


def _node_table(name, disc, values: dict, title: str) -> Table:
    nodes = disc.grid.nodes
    cols = ["x", "y", "z"][: disc.grid.dim]
    rows = [tuple(p) + tuple(v[i] for v in values.values()) for i, p in enumerate(nodes)]
    rows.sort()
    kind = "curve" if disc.grid.dim == 1 else ("heatmap" if disc.grid.dim == 2 else "")
    return Table(name, cols + list(values), rows, kind, title)


def _seeds(conf):
    a, b = conf["verify"]["seeds"]
    return range(a, b + 1)


# ---------------------------------------------------------------------------
# tasks

def task_operator_check(conf) -> list:
    op, dom = conf.operator(), conf.domain()
    b = opm.operator_bounds(op, dom, spacing=min(0.05, dom.diameter() / 40))
    values = {"lambda": b.lam, "M_A": b.m_a, "N_star": b.n_star, "trace_q": b.trace_q, "b_norm": b.b_norm,
              "c_norm": b.c_norm, "samples": b.n_samples}
    q = op.coeffs.q
    vmo = {f"q{i}{j}": opm.vmo_modulus(lambda x, i=i, j=j: q(x)[:, i, j], 0.1, dom, n_centers=400, n_inner=64)
           for i in range(op.dim) for j in range(i, op.dim)}
    values["vmo_r0.1"] = vmo
    return [Outcome("operator-check", b.lam > 0, values)]


def task_eigen(conf) -> list:
    _, disc = gr.assemble(conf.operator(), conf.domain(), conf["grid"]["h"], conf["grid"]["quad_level"])
    ep = gr.principal_eigenpair(disc.without_killing())
    tab = _node_table("eigenfunction", disc, {"phi": ep.phi}, "principal eigenfunction")
    return [Outcome("eigen", True, {"lambda": ep.lam, "residual": ep.residual, "iterations": ep.iterations,
                                    "nodes": disc.n}, tables=[tab])]


def task_gauge(conf) -> list:
    op, dom = conf.operator(), conf.domain()
    _, disc = gr.assemble(op, dom, conf["grid"]["h"], conf["grid"]["quad_level"])
    w = gr.gauge_grid(disc)
    x0 = conf.x0()
    est = mc.estimate_gauge(op, dom, x0, _path_config(conf))
    w_grid = float(w[disc.grid.nearest(x0)])
    tab = _node_table("gauge", disc, {"w": w}, "gauge w")
    return [Outcome("gauge", not est.biased,
                    {"w_grid": w_grid, "mc": est.to_dict(), "x0": x0}, tables=[tab])]


def task_simulate(conf) -> list:
    op, dom = conf.operator(), conf.domain()
    pc = _path_config(conf)
    x0 = conf.x0()
    f, g = conf.source(), conf.exterior()
    batch = mc.simulate(op, dom, x0, pc)
    fk = mc.estimate_feynman_kac(op, dom, x0, pc, f=None, g=g, batch=batch)
    gauge = mc.estimate_gauge(op, dom, x0, pc, batch=batch)
    free = mc.simulate(op.without_killing(), dom, x0, pc) if np.any(batch.c_integral) else batch
    tau = free.tau[~free.hit_horizon]
    surv = mc.estimate_survival(op, dom, x0, conf["problem"]["t_grid"], pc, batch=free)
    d = op.dim
    cols = ["path", "tau"] + [f"x_tau_{i}" for i in range(d)] + ["c_integral", "hit_horizon"]
    rows = [(i, batch.tau[i], *batch.x_tau[i], batch.c_integral[i], int(batch.hit_horizon[i]))
            for i in range(batch.tau.size)]
    values = {"mean_exit_time": float(np.mean(tau)) if tau.size else float("nan"),
              "exit_time_ci95": mc.Z95 * float(np.std(tau, ddof=1) / np.sqrt(tau.size)) if tau.size > 1 else 0.0,
              "gauge": gauge.to_dict(), "dirichlet_g": fk.to_dict(), "horizon": batch.t_max}
    if conf["problem"]["f"] != "zero":
        values["source_note"] = "source fields are evaluated on the generic engine"
        src = mc.estimate_feynman_kac(op, dom, x0, pc, f=f, g=g)
        values["feynman_kac"] = src.to_dict()
    tabs = [Table("paths", cols, rows),
            Table("survival", ["t", "p", "ci"], list(zip(surv.t, surv.p, surv.ci)), "survival",
                  "survival probability")]
    return [Outcome("simulate", not batch.hit_horizon.any(), values, tables=tabs)]


def task_barrier(conf) -> list:
    op, dom = conf.operator(), conf.domain()
    k = conf["barrier"]["k_target"]
    consts = bar.choose_constants(op, k, region=dom)
    ybar = conf["barrier"].get("ybar")
    params = consts.params(dom.anchor() if ybar is None else ybar)
    chk = bar.verify_barrier(op, params, k)
    r = np.linalg.norm(chk.points - params.ybar, axis=1) / params.r
    order = np.argsort(r)
    tab = Table("barrier", ["radius_over_r", "value"], list(zip(r[order][::10], chk.values[order][::10])),
                "curve", "(A - c) eta on the annulus")
    values = {"gamma": consts.gamma, "alpha0": consts.alpha0, "M": consts.M, "r0": consts.r0,
              "lower_bound": consts.lower_bound, "min_value": chk.min_value, "k_target": k}
    return [Outcome("barrier", chk.passed, values, tables=[tab])]


def task_verify(conf, check: str) -> list:
    op, dom = conf.operator(), conf.domain()
    h = conf["grid"]["h"]
    if check == "mc-vs-grid":
        rep = V.mc_vs_grid(op, dom, conf.x0(), _path_config(conf), h, f=conf.source(), g=conf.exterior())
        return [Outcome(f"verify-{check}", rep.ok, {}, [rep.to_dict()])]
    _, disc = gr.assemble(op, dom, h, conf["grid"]["quad_level"])
    if check == "delta-bound":
        rep = V.check_delta_bound(disc, conf.source()(disc.grid.nodes))
        return [Outcome(f"verify-{check}", rep.ok, {}, [rep.to_dict()])]
    if check == "bony":
        x = disc.grid.nodes
        u = -np.sum(x ** 2, axis=1)
        g = -np.sum(disc.grid.ext_nodes ** 2, axis=1)
        rep = V.check_bony(disc, u, g)
        return [Outcome(f"verify-{check}", rep.ok, {}, [rep.to_dict()])]
    free = disc.without_killing()
    cbar = float(np.max(disc.c_vec)) if disc.n else 0.0
    extra = {}
    if check in ("hopf", "qhl-ia", "qhl-ib"):
        extra["consts"] = bar.choose_constants(op, region=dom)
    if check in ("qhl-iia", "qhl-iib"):
        extra["eigen"] = gr.principal_eigenpair(free)
    if check == "qhl-iia":
        extra["minor"] = gr.minorization(free, cbar)
    if check == "weak-harnack":
        extra["minor"] = gr.minorization(free, cbar + 1.0)
        extra["V"] = V.interior_mask(disc, conf["verify"]["inner_margin"])
    reps = []
    for s in _seeds(conf):
        kind = "super" if check == "weak-harnack" else "sub"
        base = V.gen_subsolution(disc, seed=s, kind=kind)
        g = base.g if check in ("weak-max", "strong-max") else np.abs(base.g) + (0.0 if kind == "super" else 0.1)
        f = np.zeros(disc.n) if check == "harnack-ratio" else base.f
        case = V.gen_subsolution(disc, f=f, g=g, seed=s, kind=kind)
        if check == "weak-max":
            r = V.check_weak_max(case)
        elif check == "strong-max":
            r = V.check_strong_max(case)
        elif check == "hopf":
            r = V.check_hopf(case, extra["consts"])
        elif check == "qhl-ia":
            r = V.check_qhl_IA(case, extra["consts"])
        elif check == "qhl-ib":
            r = V.check_qhl_IB(case, extra["consts"])
        elif check == "qhl-iia":
            r = V.check_qhl_IIA(case, extra["eigen"], extra["minor"])
        elif check == "qhl-iib":
            r = V.check_qhl_IIB(case, extra["eigen"])
        elif check == "weak-harnack":
            r = V.check_weak_harnack(case, extra["V"], extra["minor"])
        else:
            r = V.check_harnack_corollary(case, conf.x0())
        r.details["seed"] = s
        reps.append(r)
    tab = Table(f"{check}_margins", ["seed", "verdict", "margin"],
                [(r.details["seed"], r.verdict, r.margin) for r in reps], "histogram", f"{check} margins")
    return [Outcome(f"verify-{check}", all(r.ok for r in reps), {"cases": len(reps)},
                    [r.to_dict() for r in reps], [tab])]


def dispatch(conf: cfgm.ScenarioConfig, writer: OutputWriter) -> list:
    task = conf.task
    if task == "suite":
        return suitem.run_suite(conf["suite"]["preset"], writer.timings, _progress)
    if task.startswith("verify-"):
        return task_verify(conf, task[len("verify-"):])
    table = {"operator-check": task_operator_check, "eigen": task_eigen, "gauge": task_gauge,
             "simulate": task_simulate, "barrier": task_barrier}
    return table[task](conf)


def _progress(oc, seconds):
    print(f"{oc.name:<28} {'PASS' if oc.passed else 'FAIL'}  {seconds:6.1f}s", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(args) -> int:
    try:
        conf = cfgm.load(args.config, args.overrides)
    except cfgm.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    root = output_root(conf, args.output, conf["name"])
    if conf.task == "report":
        if not (root / "data" / "plots.json").exists():
            print(f"configuration error: no data to render under {root}", file=sys.stderr)
            return EXIT_CONFIG
        for p in rerender(root):
            print(p)
        return EXIT_OK
    writer = OutputWriter(root, plots=not args.no_plots)
    try:
        outcomes = dispatch(conf, writer)
    except bar.ConstantSelectionError as exc:
        outcomes = [Outcome(conf.task, False, {}, notes=[f"barrier constants: {exc}"])]
    summary = writer.write(conf.task, conf.as_dict(), outcomes)
    print((root / "summary.txt").read_text(), end="")
    print(f"artifacts in {root}")
    return EXIT_OK if summary["passed"] else EXIT_FAIL


def cmd_suite(args) -> int:
    if args.preset not in suitem.PRESETS:
        print(f"configuration error: unknown suite preset {args.preset!r}; "
              f"valid: {', '.join(suitem.PRESETS)}", file=sys.stderr)
        return EXIT_CONFIG
    root = output_root(None, args.output, f"suite-{args.preset}")
    writer = OutputWriter(root, plots=not args.no_plots)
    outcomes = suitem.run_suite(args.preset, writer.timings, _progress)
    summary = writer.write("suite", {"suite": {"preset": args.preset}}, outcomes)
    print((root / "summary.txt").read_text(), end="")
    print(f"artifacts in {root}")
    return EXIT_OK if summary["passed"] else EXIT_FAIL


def cmd_list(args) -> int:
    print("operator presets: " + ", ".join(opm.PRESETS))
    print("suite presets:    " + ", ".join(suitem.PRESETS))
    print("tasks:            " + ", ".join(cfgm.TASKS))
    print("source fields:    " + ", ".join(cfgm.SOURCE_FIELDS))
    print("exterior fields:  " + ", ".join(cfgm.EXTERIOR_FIELDS))
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        conf = cfgm.load(args.config, args.overrides)
    except cfgm.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: task {conf.task}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hopflab", description="maximum principle laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    r.add_argument("overrides", nargs="*", help="section.key=value")
    r.add_argument("--output", help="output directory")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("suite", help="run an acceptance suite preset")
    s.add_argument("preset")
    s.add_argument("--output")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_suite)
    ls = sub.add_parser("list-presets", help="list presets, tasks and named fields")
    ls.set_defaults(func=cmd_list)
    v = sub.add_parser("validate", help="validate a config without running it")
    v.add_argument("config")
    v.add_argument("overrides", nargs="*")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
