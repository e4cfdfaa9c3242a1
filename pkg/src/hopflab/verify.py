"""Certified discrete sub/supersolutions and numerical checks of the maximum
principle family: weak, strong and Bony maximum principles, Hopf-type bounds,
the distance-to-boundary lower bound and the weak Harnack inequality.

Every checker returns a :class:`VerificationReport`.  Inputs that fail the
residual recheck are never silently checked: the report carries verdict FAIL
with the reason, while the inequality margin is still computed for audit.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import LinearNDInterpolator

from . import barrier as bar
from . import grid as gr
from .geometry import delta_D, generalized_normals, interior_ball_radius, lower_normal_derivative
from .mc import PathConfig, estimate_feynman_kac
from .operator import ContractError, OperatorSpec, ZeroKernel

PASS = "PASS"
FAIL = "FAIL"
VACUOUS = "VACUOUS"
NOT_APPLICABLE = "NOT_APPLICABLE"
INFO = "INFO"


class CertificationError(RuntimeError):
    pass


def digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p, dtype=float).tobytes())
        else:
            h.update(json.dumps(p, sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]


@dataclass
class VerificationReport:
    check: str
    inputs_digest: str
    margin: float
    tol: float
    verdict: str
    details: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict in (PASS, VACUOUS, NOT_APPLICABLE, INFO)

    def to_dict(self) -> dict:
        return {"check": self.check, "inputs_digest": self.inputs_digest, "margin": _num(self.margin),
                "tol": _num(self.tol), "verdict": self.verdict,
                "details": {k: _num(v) for k, v in self.details.items()}, "artifacts": list(self.artifacts)}


def _num(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    return v


def _report(check, dig, margin, tol, details=None, verdict=None, certified=True):
    details = dict(details or {})
    if verdict is None:
        verdict = PASS if margin >= -tol else FAIL
    if not certified and verdict not in (NOT_APPLICABLE,):
        details["reason"] = "input failed the residual recheck"
        verdict = FAIL
    return VerificationReport(check, dig, float(margin), float(tol), verdict, details)


# ---------------------------------------------------------------------------
# certified cases

@dataclass
class SubsolutionCase:
    """Grid function u with exterior data g and recomputed residual (A - c)u.

    ``kind`` is "sub" (residual >= -tol) or "super" (residual <= tol).
    """

    disc: gr.DiscreteOperator
    u: np.ndarray
    g: np.ndarray
    residual: np.ndarray
    f: Optional[np.ndarray]
    seed: Optional[int]
    kind: str
    tol: float
    certified: bool

    @property
    def u_max(self) -> float:
        """max of u over interior nodes and exterior data."""
        return float(max(np.max(self.u), np.max(self.g) if self.g.size else -np.inf))

    def digest(self) -> str:
        return digest(self.u, self.g, self.kind)


def _certify(disc, u, g, kind, solve_res=0.0, f=None, seed=None) -> SubsolutionCase:
    res = disc.apply(u, g)
    scale = max(1.0, float(np.max(np.abs(u))), float(np.max(np.abs(g))) if g.size else 1.0)
    tol = max(1e-9, 10.0 * solve_res * scale)
    ok = bool(np.min(res) >= -tol) if kind == "sub" else bool(np.max(res) <= tol)
    return SubsolutionCase(disc, u, g, res, f, seed, kind, tol, ok)


def _random_inputs(disc, rs, f_scale=1.0):
    f = rs.random(disc.n) * f_scale
    f[rs.random(disc.n) < 0.3] = 0.0
    ext = disc.grid.ext_nodes
    if ext.shape[0]:
        k = rs.normal(size=ext.shape[1])
        g = np.tanh(ext @ k + rs.normal()) + 0.2 * rs.random(ext.shape[0])
    else:
        g = np.zeros(0)
    return f, g


def gen_subsolution(disc: gr.DiscreteOperator, f=None, g=None, seed: Optional[int] = None,
                    kind: str = "sub") -> SubsolutionCase:
    """Solve (A - c) u = f (sub) or -f (super) with exterior data g; recheck residual.

    Missing f or g are drawn from ``seed``.  f must be nonnegative.
    """
    rs = np.random.default_rng(seed)
    f0, g0 = _random_inputs(disc, rs)
    f = f0 if f is None else np.broadcast_to(np.asarray(f, dtype=float), (disc.n,)).copy()
    g = g0 if g is None else np.broadcast_to(np.asarray(g, dtype=float), (disc.grid.ext_nodes.shape[0],)).copy()
    if np.any(f < 0):
        raise ContractError("source f must be nonnegative")
    rhs = -f if kind == "sub" else f
    u = gr.resolvent(disc, 0.0, rhs, g)
    full = rhs + (disc.B_ext @ g if g.size else 0.0)
    solve_res = gr.solve_residual(disc, 0.0, u, full) if np.any(full) else 0.0
    case = _certify(disc, u, g, kind, solve_res, f, seed)
    if not case.certified:
        raise CertificationError(f"residual recheck failed (min {np.min(case.residual):.3e})")
    return case


def from_values(disc: gr.DiscreteOperator, u, g, kind: str = "sub") -> SubsolutionCase:
    """Wrap hand-built values; certification is recorded, not enforced."""
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float) if g is not None else np.zeros(disc.grid.ext_nodes.shape[0])
    return _certify(disc, u, g, kind)


def comparison_gap(disc: gr.DiscreteOperator, c_lo: np.ndarray, c_hi: np.ndarray, g: np.ndarray) -> float:
    """min(u_lo - u_hi) for f = 0, g >= 0 and c_lo <= c_hi; nonnegative by comparison."""
    u_lo = gr.resolvent(disc.with_killing(c_lo), 0.0, None, g)
    u_hi = gr.resolvent(disc.with_killing(c_hi), 0.0, None, g)
    return float(np.min(u_lo - u_hi))


# ---------------------------------------------------------------------------
# grid interpolation and boundary points

def grid_function(disc: gr.DiscreteOperator, u: np.ndarray, g: np.ndarray) -> Callable:
    """Piecewise-linear interpolant through interior nodes and boundary exterior nodes."""
    on_b = disc.grid.ext_on_boundary
    pts = np.vstack([disc.grid.nodes, disc.grid.ext_nodes[on_b]])
    vals = np.r_[u, g[on_b]] if g.size else u
    if disc.grid.dim == 1:
        order = np.argsort(pts[:, 0])
        xs, vs = pts[order, 0], vals[order]

        def f1(x):
            x = np.asarray(x, dtype=float).reshape(-1, 1)[:, 0]
            out = np.interp(x, xs, vs)
            out[(x < xs[0] - 1e-12) | (x > xs[-1] + 1e-12)] = np.nan
            return out

        return f1
    interp = LinearNDInterpolator(pts, vals)
    return lambda x: interp(np.asarray(x, dtype=float).reshape(-1, pts.shape[1]))


def project_to_boundary(dom, x: np.ndarray, iters: int = 8) -> np.ndarray:
    x = np.asarray(x, dtype=float).copy()
    eps = 1e-7
    d = x.size
    for _ in range(iters):
        s = float(dom.sdf(x[None, :])[0])
        if abs(s) < 1e-12:
            break
        grad = np.array([(dom.sdf((x + eps * e)[None, :])[0] - dom.sdf((x - eps * e)[None, :])[0]) / (2 * eps)
                         for e in np.eye(d)])
        x = x - s * grad / max(np.dot(grad, grad), 1e-300)
    return x


def boundary_argmax(case: SubsolutionCase):
    """Boundary exterior node of largest u, projected onto the boundary; None if none."""
    on_b = case.disc.grid.ext_on_boundary
    if not np.any(on_b):
        return None, -np.inf
    idx = np.flatnonzero(on_b)
    k = idx[int(np.argmax(case.g[idx]))]
    return project_to_boundary(case.disc.grid.domain, case.disc.grid.ext_nodes[k]), float(case.g[k])


# ---------------------------------------------------------------------------
# maximum principles

def check_weak_max(case: SubsolutionCase) -> VerificationReport:
    """max_D u <= sup of g (c = 0) or of g^+ (c >= 0) over the exterior nodes."""
    killing = bool(np.any(case.disc.c_vec > 0))
    g = case.g
    bound = (np.max(np.maximum(g, 0.0)) if killing else np.max(g)) if g.size else 0.0
    umax = float(np.max(case.u))
    return _report("weak_max", case.digest(), bound - umax, case.tol,
                   {"max_u": umax, "exterior_bound": bound, "uses_positive_part": killing},
                   certified=case.certified and case.kind == "sub")


def check_strong_max(case: SubsolutionCase, tol_const: Optional[float] = None) -> VerificationReport:
    """Interior maximum M >= 0 dominating the exterior forces u to be constant."""
    tol_const = 1e3 * case.tol if tol_const is None else tol_const
    u = case.u
    M = float(np.max(u))
    k = int(np.argmax(u))
    B = case.disc.B_ext
    strictly_inner = B.shape[1] == 0 or B.getrow(k).nnz == 0
    ext_max = float(np.max(case.g)) if case.g.size else -np.inf
    details = {"max_u": M, "argmax_node": k, "exterior_max": ext_max, "strictly_interior": strictly_inner}
    if not case.certified:
        return _report("strong_max", case.digest(), -(np.ptp(u)), tol_const, details, certified=False)
    if M < 0 or not strictly_inner or ext_max > M + case.tol:
        return _report("strong_max", case.digest(), 0.0, tol_const, details, verdict=NOT_APPLICABLE)
    spread = float(np.ptp(u))
    details["spread"] = spread
    return _report("strong_max", case.digest(), -spread, tol_const, details)


def check_bony(disc: gr.DiscreteOperator, u: np.ndarray, g: np.ndarray, xh=None,
               radii: Sequence[float] = (0.5, 0.25, 0.125), tol: float = 1e-9) -> VerificationReport:
    """At an interior maximum the essential lim inf of Au is <= 0.

    Margin is -min over the smallest neighbourhood of Au; that minimum is the
    largest over the shrinking family.
    """
    nodes = disc.grid.nodes
    dig = digest(u, g, list(radii))
    kern = disc.op.kernel
    if not isinstance(kern, ZeroKernel) and kern.intensity_bound > 0 and g.size:
        leaves = ~disc.grid.ext_on_boundary
        if np.any(leaves) and np.any(np.abs(disc.B_ext[:, np.flatnonzero(leaves)]).sum(axis=0) > 0):
            return _report("bony", dig, 0.0, tol, {"reason": "jumps leave the closure of D"},
                           verdict=NOT_APPLICABLE)
    claimed = xh is not None
    k = disc.grid.nearest(xh) if claimed else int(np.argmax(u))
    is_max = u[k] >= np.max(u) and not (g.size and np.max(g) > u[k])
    if not is_max and not claimed:
        return _report("bony", dig, 0.0, tol, {"reason": "no interior maximum"}, verdict=NOT_APPLICABLE)
    Au = disc.apply_A(u, g)
    dist = np.sqrt(np.sum((nodes - nodes[k]) ** 2, axis=1))
    mins = [float(np.min(Au[dist <= max(r, disc.grid.h * (1 + 1e-9))])) for r in radii]
    margin = -mins[-1]
    details = {"min_Au": mins, "radii": list(radii), "node": k}
    if not is_max:
        # a claimed maximum that is not one: the inequality is evaluated and usually fails
        details["reason"] = "claimed point is not a maximum"
    return _report("bony", dig, margin, tol, details)


# ---------------------------------------------------------------------------
# Hopf-type bounds

def _normal_derivatives(case, xh, normals):
    h = case.disc.grid.h
    ufun = grid_function(case.disc, case.u, case.g)
    dom = case.disc.grid.domain

    def safe(x):
        v = ufun(x)
        return np.where(np.isnan(v), np.inf, v)

    out = []
    for n in normals:
        nd = lower_normal_derivative(safe, xh, n, h / 4, 2 * h, dom)
        q = nd.quotients[np.isfinite(nd.quotients)]
        out.append(float(q.min()) if q.size else np.nan)
    return np.array(out)


def _boundary_setup(case, xh):
    dom = case.disc.grid.domain
    if xh is None:
        xh, uhat = boundary_argmax(case)
        if xh is None:
            return None
    else:
        xh = project_to_boundary(dom, np.asarray(xh, dtype=float))
        uhat = float(grid_function(case.disc, case.u, case.g)(xh[None, :])[0])
    normals = generalized_normals(dom, xh)
    return xh, uhat, normals


def hopf_constant(consts: bar.BarrierConstants, r: float) -> float:
    """a = alpha r exp(-alpha r^2) with alpha r^2 = gamma."""
    return consts.gamma / r * np.exp(-consts.gamma)


def check_hopf(case: SubsolutionCase, consts: bar.BarrierConstants, xh=None) -> VerificationReport:
    """lower normal derivative at the boundary maximum >= a inf_{D_{r/2}} (u(xh) - u)."""
    setup = _boundary_setup(case, xh)
    dig = case.digest()
    if setup is None:
        return _report("hopf", dig, 0.0, case.tol, {"reason": "no boundary node"}, verdict=NOT_APPLICABLE)
    xh, uhat, normals = setup
    dom = case.disc.grid.domain
    if uhat < case.u_max - case.tol or uhat < 0:
        return _report("hopf", dig, 0.0, case.tol, {"reason": "maximum not attained on the boundary"},
                       verdict=NOT_APPLICABLE)
    if np.ptp(np.r_[case.u, case.g]) <= case.tol:
        return _report("hopf", dig, 0.0, case.tol, {"reason": "constant"}, verdict=NOT_APPLICABLE)
    r = min(consts.r0, interior_ball_radius(dom, xh))
    a = hopf_constant(consts, r)
    sel = delta_D(dom, case.disc.grid.nodes) > r / 2
    if not np.any(sel):
        return _report("hopf", dig, 0.0, case.tol, {"reason": "no node in D_{r/2}"}, verdict=NOT_APPLICABLE)
    rhs = a * float(np.min(uhat - case.u[sel]))
    lhs = _normal_derivatives(case, xh, normals)
    tol = case.tol + case.disc.grid.h ** 2 * max(1.0, float(np.max(np.abs(case.u))))
    margin = float(np.nanmin(lhs) - rhs)
    return _report("hopf", dig, margin, tol,
                   {"lhs": float(np.nanmin(lhs)), "rhs": rhs, "a": a, "r": r, "x_hat": xh},
                   certified=case.certified and case.kind == "sub")


def hopf_closed_form(consts: bar.BarrierConstants, dom, lhs: float, u: Callable, xh, n_samples: int = 20000,
                     seed: int = 0) -> VerificationReport:
    """Hopf check with a closed-form left side and the right side sampled on D_{r/2}."""
    xh = np.asarray(xh, dtype=float)
    r = min(consts.r0, interior_ball_radius(dom, xh))
    a = hopf_constant(consts, r)
    lo, hi = dom.bbox
    rs = np.random.default_rng(seed)
    pts = rs.uniform(lo, hi, size=(n_samples, dom.dim))
    pts = pts[delta_D(dom, pts) > r / 2]
    uhat = float(u(xh[None, :])[0])
    rhs = a * float(np.min(uhat - u(pts)))
    return _report("hopf_closed_form", digest(xh, lhs, r), lhs - rhs, 1e-12,
                   {"lhs": lhs, "rhs": rhs, "a": a, "r": r})


def _ball_centre(xh, n, r):
    return np.asarray(xh) - r * np.asarray(n)


def check_qhl_IA(case: SubsolutionCase, consts: bar.BarrierConstants, xh=None) -> VerificationReport:
    """lower normal derivative > a u(xh) with a = (2C/r) e^{-C} a*, requires c >= c_low > 0."""
    dig = case.digest()
    op = case.disc.op
    c_low = float(np.min(case.disc.c_vec)) if case.disc.n else 0.0
    if c_low <= 0:
        return _report("qhl_IA", dig, 0.0, case.tol, {"reason": "killing rate not bounded below"},
                       verdict=NOT_APPLICABLE)
    setup = _boundary_setup(case, xh)
    if setup is None:
        return _report("qhl_IA", dig, 0.0, case.tol, {"reason": "no boundary node"}, verdict=NOT_APPLICABLE)
    xh, uhat, normals = setup
    if uhat <= 0:
        return _report("qhl_IA", dig, 0.0, case.tol, {"u_hat": uhat}, verdict=VACUOUS,
                       certified=case.certified)
    if uhat < case.u_max - case.tol:
        return _report("qhl_IA", dig, 0.0, case.tol, {"reason": "maximum not attained on the boundary"},
                       verdict=NOT_APPLICABLE)
    dom = case.disc.grid.domain
    r = min(consts.r0, interior_ball_radius(dom, xh))
    C = consts.gamma
    ex = bar.exit_probability_bound(op.without_killing(), _ball_centre(xh, normals[0], r), r / 2, c_low)
    a = 2 * C / r * np.exp(-C) * ex.a_star
    lhs = float(np.nanmin(_normal_derivatives(case, xh, normals)))
    tol = case.tol + case.disc.grid.h ** 2 * max(1.0, float(np.max(np.abs(case.u))))
    return _report("qhl_IA", dig, lhs - a * uhat, tol,
                   {"lhs": lhs, "rhs": a * uhat, "a": a, "a_star": ex.a_star, "r": r, "u_hat": uhat},
                   certified=case.certified and case.kind == "sub")


def check_qhl_IB(case: SubsolutionCase, consts: bar.BarrierConstants, xh=None,
                 w: Optional[np.ndarray] = None) -> VerificationReport:
    """lower normal derivative > (2C/r) e^{-C} rho(r/2) u(xh), rho the gauge modulus."""
    dig = case.digest()
    if not np.any(case.disc.c_vec > 0):
        return _report("qhl_IB", dig, 0.0, case.tol, {"reason": "c = 0 gives rho = 0"}, verdict=VACUOUS,
                       certified=case.certified)
    setup = _boundary_setup(case, xh)
    if setup is None:
        return _report("qhl_IB", dig, 0.0, case.tol, {"reason": "no boundary node"}, verdict=NOT_APPLICABLE)
    xh, uhat, normals = setup
    if uhat <= 0:
        return _report("qhl_IB", dig, 0.0, case.tol, {"u_hat": uhat}, verdict=VACUOUS,
                       certified=case.certified)
    if uhat < case.u_max - case.tol:
        return _report("qhl_IB", dig, 0.0, case.tol, {"reason": "maximum not attained on the boundary"},
                       verdict=NOT_APPLICABLE)
    dom = case.disc.grid.domain
    r = min(consts.r0, interior_ball_radius(dom, xh))
    w = gr.gauge_grid(case.disc) if w is None else w
    rho = float(bar.rho_modulus(w, case.disc.grid.nodes, dom, [r / 2])[0])
    if not np.isfinite(rho):
        return _report("qhl_IB", dig, 0.0, case.tol, {"reason": "no node in D_{r/2}"}, verdict=NOT_APPLICABLE)
    C = consts.gamma
    a = 2 * C / r * np.exp(-C)
    lhs = float(np.nanmin(_normal_derivatives(case, xh, normals)))
    tol = case.tol + case.disc.grid.h ** 2 * max(1.0, float(np.max(np.abs(case.u))))
    return _report("qhl_IB", dig, lhs - a * rho * uhat, tol,
                   {"lhs": lhs, "rhs": a * rho * uhat, "a": a, "rho": rho, "r": r, "u_hat": uhat},
                   certified=case.certified and case.kind == "sub")


def check_qhl_IIA(case: SubsolutionCase, eigen: gr.EigenPair, minor: gr.Minorization) -> VerificationReport:
    """u(xh) - u(x) >= c_low phi u(xh) / (2e |phi| (lam + c_low)) + psi <(A - c)u, chi>, every node.

    ``eigen`` belongs to the operator without killing; ``minor`` to it at
    alpha = sup c.
    """
    dig = case.digest()
    M = case.u_max
    if M < 0:
        return _report("qhl_IIA", dig, 0.0, case.tol, {"reason": "negative maximum"}, verdict=NOT_APPLICABLE)
    c = case.disc.c_vec
    c_low = float(np.min(c))
    phi = eigen.phi
    first = c_low * phi * M / (2 * np.e * np.max(phi) * (eigen.lam + c_low))
    pairing = float(np.dot(case.residual, minor.chi) * case.disc.grid.cell)
    rhs = first + minor.psi * pairing
    gap = (M - case.u) - rhs
    k = int(np.argmin(gap))
    tol = case.tol * (1 + float(np.max(minor.psi)) * float(np.sum(minor.chi)) * case.disc.grid.cell)
    return _report("qhl_IIA", dig, float(gap[k]), tol,
                   {"u_hat": M, "pairing": pairing, "worst_node": k, "lam": eigen.lam},
                   certified=case.certified and case.kind == "sub")


def check_qhl_IIB(case: SubsolutionCase, eigen: gr.EigenPair) -> VerificationReport:
    """u(xh) - u(x) >= phi/(2e|phi|) [c_low u(xh)/(lam + c_low) + min residual/(lam + |c|)]."""
    dig = case.digest()
    M = case.u_max
    if M < 0:
        return _report("qhl_IIB", dig, 0.0, case.tol, {"reason": "negative maximum"}, verdict=NOT_APPLICABLE)
    c = case.disc.c_vec
    c_low, c_sup = float(np.min(c)), float(np.max(c))
    phi = eigen.phi
    ess = float(np.min(case.residual))
    bracket = c_low * M / (eigen.lam + c_low) + ess / (eigen.lam + c_sup)
    rhs = phi / (2 * np.e * np.max(phi)) * bracket
    gap = (M - case.u) - rhs
    k = int(np.argmin(gap))
    return _report("qhl_IIB", dig, float(gap[k]), case.tol,
                   {"u_hat": M, "essinf_residual": ess, "worst_node": k, "lam": eigen.lam},
                   certified=case.certified and case.kind == "sub")


# ---------------------------------------------------------------------------
# distance bound, weak Harnack, Harnack ratio

def check_delta_bound(disc: gr.DiscreteOperator, f: np.ndarray, alpha: float = 0.0,
                      threshold: Optional[float] = None) -> VerificationReport:
    """a_fit = min R_alpha f / delta_D over interior nodes; PASS iff above the grid tolerance."""
    f = np.broadcast_to(np.asarray(f, dtype=float), (disc.n,))
    dig = digest(np.asarray(f), alpha, disc.grid.h)
    if not np.any(f > 0):
        return _report("delta_bound", dig, 0.0, 0.0, {"a_fit": 0.0, "reason": "trivial f"},
                       verdict=NOT_APPLICABLE)
    Rf = gr.resolvent(disc, alpha, f)
    delta = disc.grid.delta()
    ratio = Rf / delta
    k = int(np.argmin(ratio))
    a_fit = float(ratio[k])
    threshold = disc.grid.h if threshold is None else threshold
    return _report("delta_bound", dig, a_fit - threshold, 0.0,
                   {"a_fit": a_fit, "threshold": threshold, "worst_node": k,
                    "worst_point": disc.grid.nodes[k]})


def delta_refinement(op: OperatorSpec, dom, hs: Sequence[float], alpha: float = 0.0) -> list:
    """a_fit for f = 1 on a sequence of grids."""
    out = []
    for h in hs:
        _, disc = gr.assemble(op, dom, h)
        rep = check_delta_bound(disc, np.ones(disc.n), alpha)
        out.append((float(h), rep.details["a_fit"]))
    return out


def interior_mask(disc: gr.DiscreteOperator, margin: float) -> np.ndarray:
    """Nodes of D_margin, used as the compact subset V."""
    return disc.grid.delta() > margin


def check_weak_harnack(case: SubsolutionCase, V: np.ndarray, minor: gr.Minorization) -> VerificationReport:
    """min_V u >= C sum_V u chi h^d with C = min_V psi from the minorization at sup c + 1."""
    dig = case.digest()
    if case.kind != "super":
        return _report("weak_harnack", dig, 0.0, case.tol, {"reason": "needs a supersolution"},
                       verdict=NOT_APPLICABLE)
    if not np.any(V):
        return _report("weak_harnack", dig, 0.0, case.tol, {"reason": "empty V"}, verdict=NOT_APPLICABLE)
    u = case.u
    integral = float(np.sum(u[V] * minor.chi[V]) * case.disc.grid.cell)
    c_ref = float(np.min(minor.psi[V]))
    umin = float(np.min(u[V]))
    nonneg = bool(np.min(u) >= -case.tol and (case.g.size == 0 or np.min(case.g) >= -case.tol))
    if integral <= 0:
        return _report("weak_harnack", dig, umin, case.tol, {"C_ref": c_ref, "integral": integral},
                       verdict=PASS if umin >= -case.tol else FAIL, certified=case.certified and nonneg)
    c_fit = umin / integral
    margin = umin - c_ref * integral
    return _report("weak_harnack", dig, margin, case.tol * (1 + c_ref),
                   {"C_fit": c_fit, "C_ref": c_ref, "min_V_u": umin, "integral": integral},
                   certified=case.certified and nonneg)


def check_harnack_corollary(case: SubsolutionCase, x0, xh=None) -> VerificationReport:
    """Informational ratio lower-normal-derivative / (u(xh) - u(x0))."""
    dig = case.digest()
    setup = _boundary_setup(case, xh)
    if setup is None or np.ptp(np.r_[case.u, case.g]) <= case.tol:
        return _report("harnack_ratio", dig, 0.0, 0.0, {"reason": "constant or no boundary"},
                       verdict=NOT_APPLICABLE)
    xh, uhat, normals = setup
    k = case.disc.grid.nearest(x0)
    drop = uhat - case.u[k]
    lhs = float(np.nanmin(_normal_derivatives(case, xh, normals)))
    ratio = lhs / drop if drop > 0 else np.nan
    return _report("harnack_ratio", dig, ratio, 0.0, {"lhs": lhs, "drop": drop, "x0": case.disc.grid.nodes[k]},
                   verdict=INFO)


# ---------------------------------------------------------------------------
# Monte Carlo against grid

def _node_values(fn: Union[float, Callable], pts: np.ndarray) -> np.ndarray:
    if callable(fn):
        return np.asarray(fn(pts), dtype=float)
    return np.full(pts.shape[0], float(fn))


def grid_dirichlet(op: OperatorSpec, dom, h: float, f=0.0, g=0.0):
    _, disc = gr.assemble(op, dom, h)
    fv = _node_values(f, disc.grid.nodes)
    gv = _node_values(g, disc.grid.ext_nodes)
    return disc, gr.resolvent(disc, 0.0, fv, gv)


def mc_vs_grid(op: OperatorSpec, dom, x0, cfg: PathConfig, h: float, f=0.0, g=0.0,
               grid_op: Optional[OperatorSpec] = None) -> VerificationReport:
    """|MC - grid| <= 3 CI + tol_grid with tol_grid = |u_h - u_2h| + 2 sqrt(dt) max(1, |u_h|).

    ``grid_op`` solves the grid side with another operator (negative controls).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    gop = op if grid_op is None else grid_op
    disc, u = grid_dirichlet(gop, dom, h, f, g)
    disc2, u2 = grid_dirichlet(gop, dom, 2 * h, f, g)
    uh = float(u[disc.grid.nearest(x0)])
    u2h = float(u2[disc2.grid.nearest(x0)])
    est = estimate_feynman_kac(op, dom, x0, cfg, f=f, g=g)
    tol_grid = abs(uh - u2h) + 2 * np.sqrt(cfg.dt) * max(1.0, abs(uh))
    budget = 3 * est.ci + tol_grid
    diff = abs(est.value - uh)
    return _report("mc_vs_grid", digest(x0, h, cfg.dt, cfg.n_paths, cfg.seed, op.name), budget - diff, 0.0,
                   {"mc": est.value, "ci95": est.ci, "grid": uh, "grid_coarse": u2h, "tol_grid": tol_grid,
                    "budget": budget, "horizon_fraction": est.hit_fraction})
