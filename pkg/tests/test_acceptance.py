"""Acceptance criteria, re-checked from the artifacts of two CLI runs of "paper-core".

Tolerances are pinned here rather than read back from the package, so a
regression in the suite's own pass logic cannot hide a failure.
"""
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES

import oracles

LAMBDA = oracles.dirichlet_lambda_interval()
W0 = oracles.gauge_w0(1.0)

RUNTIME = {  # seconds
    "1-eigenpair": 5, "2-gauge": 60, "3-feynman-kac": 120, "4-weak-max": 60, "5-barrier": 30,
    "6-hopf": 60, "7-quantitative-hopf": 300, "8-delta-bound": 30, "9-weak-harnack": 60,
    "10-structural": 60,
}


def _run(out: Path):
    proc = subprocess.run([sys.executable, "-m", "hopflab", "suite", "paper-core", "--output", str(out)],
                          capture_output=True, text=True)
    return proc


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    a, b = base / "a", base / "b"
    pa, pb = _run(a), _run(b)
    return a, b, pa, pb


@pytest.fixture(scope="module")
def art(runs):
    a = runs[0]
    summary = json.loads((a / "summary.json").read_text())
    meta = json.loads((a / "metadata.json").read_text())
    reports: dict = {}
    for line in (a / "report.jsonl").read_text().splitlines():
        r = json.loads(line)
        reports.setdefault(r["task"], []).append(r)
    rows = {o["name"]: o for o in summary["outcomes"]}
    return rows, reports, meta["timings"]


def record(n, ok, text):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {text}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, text


def within_time(timings, name):
    t = timings[name]
    return t <= RUNTIME[name], f"{t:.1f}s <= {RUNTIME[name]}s"


def test_01_eigenpair(art):
    rows, _, tm = art
    v = rows["1-eigenpair"]["values"]
    rel = abs(v["lambda"] - LAMBDA) / LAMBDA
    t_ok, t_txt = within_time(tm, "1-eigenpair")
    ok = rel <= 0.01 and v["phi_sup_error"] <= 0.01 and t_ok
    record(1, ok, f"lambda={v['lambda']:.6f} (rel {rel:.1e} <= 1e-2), |phi-cos|={v['phi_sup_error']:.1e} <= 1e-2, {t_txt}")


def test_02_gauge(art):
    rows, _, tm = art
    v = rows["2-gauge"]["values"]
    g_err = abs(v["w_grid"] - W0)
    m_err = abs(v["w_mc"] - W0)
    budget = 3 * v["ci95"] + 0.02
    t_ok, t_txt = within_time(tm, "2-gauge")
    ok = g_err <= 1e-3 and m_err <= budget and v["n_paths"] == 100_000 and v["dt"] == 1e-4 and t_ok
    record(2, ok, f"grid err {g_err:.1e} <= 1e-3, MC err {m_err:.1e} <= {budget:.3e} (n=1e5, dt=1e-4), {t_txt}")


def test_03_feynman_kac(art):
    rows, reports, tm = art
    reps = reports["3-feynman-kac"]
    errs = [(abs(r["details"]["mc"] - r["details"]["grid"]), r["details"]["budget"]) for r in reps]
    t_ok, t_txt = within_time(tm, "3-feynman-kac")
    ok = len(reps) == 3 and all(r["verdict"] == "PASS" for r in reps) and all(e <= b for e, b in errs) and t_ok
    txt = ", ".join(f"{r['details']['scenario']} {e:.1e}<={b:.1e}" for r, (e, b) in zip(reps, errs))
    record(3, ok, f"{txt}, {t_txt}")


def test_04_weak_max(art):
    rows, reports, tm = art
    reps = reports["4-weak-max"]
    presets = {r["details"]["preset"] for r in reps}
    worst = min(r["margin"] for r in reps)
    per = min(sum(r["details"]["preset"] == p for r in reps) for p in presets)
    t_ok, t_txt = within_time(tm, "4-weak-max")
    ok = len(presets) == 5 and per >= 200 and worst >= -1e-9 and t_ok
    record(4, ok, f"{len(reps)} cases over {len(presets)} presets (>=200 each), min margin {worst:.2e} >= -1e-9, {t_txt}")


def test_05_barrier(art):
    rows, _, tm = art
    v = rows["5-barrier"]["values"]
    mins = {k: v[k]["min_value"] for k in ("laplacian-1d", "laplacian-2d", "two-point-jump-1d")}
    t_ok, t_txt = within_time(tm, "5-barrier")
    ok = all(m >= 1.0 for m in mins.values()) and t_ok
    record(5, ok, ", ".join(f"{k} min {m:.3g} >= 1" for k, m in mins.items()) + f", {t_txt}")


def test_06_hopf(art):
    rows, reports, tm = art
    v = rows["6-hopf"]["values"]
    reps = reports["6-hopf"]
    t_ok, t_txt = within_time(tm, "6-hopf")
    ok = v["reference_rhs"] > 0 and len(reps) == 51 and all(r["verdict"] == "PASS" for r in reps) and t_ok
    record(6, ok, f"reference lhs 2 vs rhs {v['reference_rhs']:.3e} > 0; "
                  f"{sum(r['verdict'] == 'PASS' for r in reps) - 1}/50 drifted cases PASS, {t_txt}")


def test_07_quantitative_hopf(art):
    rows, reports, tm = art
    reps = reports["7-quantitative-hopf"]
    counts = {}
    for r in reps:
        key = (r["check"], r["details"]["dim"])
        counts[key] = counts.get(key, 0) + 1
    bad = [r for r in reps if r["verdict"] != "PASS" or r["margin"] < -r["tol"]]
    t_ok, t_txt = within_time(tm, "7-quantitative-hopf")
    ok = len(counts) == 8 and min(counts.values()) >= 50 and not bad and t_ok
    record(7, ok, f"{len(reps)} reports (4 checks x 2 dims x >=50), {len(bad)} below -tol, {t_txt}")


def test_08_delta_bound(art):
    rows, _, tm = art
    v = rows["8-delta-bound"]["values"]
    fits = [a for _, a in v["cusp_a_fit"]]
    decreasing = all(b < a for a, b in zip(fits, fits[1:]))
    t_ok, t_txt = within_time(tm, "8-delta-bound")
    ok = v["a_fit_1d"] >= 0.9 and decreasing and t_ok
    record(8, ok, f"a_fit 1D {v['a_fit_1d']:.4f} >= 0.9; cusp a_fit " + " > ".join(f"{a:.2e}" for a in fits)
           + f", {t_txt}")


def test_09_weak_harnack(art):
    rows, reports, tm = art
    reps = reports["9-weak-harnack"]
    t_ok, t_txt = within_time(tm, "9-weak-harnack")
    ok = len(reps) >= 200 and all(r["verdict"] == "PASS" for r in reps) and t_ok
    record(9, ok, f"{sum(r['verdict'] == 'PASS' for r in reps)}/{len(reps)} supersolutions PASS on D_1/4, {t_txt}")


def test_10_structural(art):
    rows, _, tm = art
    v = rows["10-structural"]["values"]
    res = v["analytic_duality"]
    slope = math.log(res[0] / res[-1]) / math.log(4.0)
    t_ok, t_txt = within_time(tm, "10-structural")
    ok = (v["resolvent_identity"] <= 1e-8 and v["eigen_identity"] <= 1e-6 and v["minorization_gap"] >= -1e-12
          and v["transpose_duality"] <= 1e-10 and res[0] > res[1] > res[2] and slope >= 0.75 and t_ok)
    record(10, ok, f"resolvent {v['resolvent_identity']:.1e}<=1e-8, eigen {v['eigen_identity']:.1e}<=1e-6, "
                   f"minorization gap {v['minorization_gap']:.1e}>=-1e-12, transpose {v['transpose_duality']:.1e}<=1e-10, "
                   f"analytic slope {slope:.2f} (O(h)), {t_txt}")


def test_11_negative_controls_and_reproducibility(runs, art):
    a, b, pa, pb = runs
    _, reports, _ = art
    reps = reports["11-negative-controls"]
    all_fail = len(reps) == 11 and all(r["verdict"] == "FAIL" for r in reps)
    same = {name: (a / name).read_bytes() == (b / name).read_bytes() for name in ("report.jsonl", "summary.json")}
    csv_same = all((b / "data" / p.name).read_bytes() == p.read_bytes() for p in (a / "data").glob("*.csv"))
    ok = all_fail and all(same.values()) and csv_same and pa.returncode == 0 and pb.returncode == 0
    record(11, ok, f"{sum(r['verdict'] == 'FAIL' for r in reps)}/11 controls FAIL; report.jsonl identical "
                   f"{same['report.jsonl']}, summary.json identical {same['summary.json']}, CSVs identical {csv_same}")
