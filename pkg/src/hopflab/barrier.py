"""Gaussian barrier functions, their constants, and the moduli feeding the Hopf constants."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from .geometry import annuli, delta_D
from .operator import (ContractError, OperatorBounds, OperatorSpec, SmoothField, apply,
                       operator_bounds)

DOUBLING_CAP = 2.0 ** 40


class ConstantSelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BarrierParams:
    alpha: float
    ybar: np.ndarray
    r: float
    gamma: float
    r0: float
    M: float

    def __post_init__(self):
        if not (0 < self.r <= 1.0):
            raise ContractError("barrier radius must lie in (0, 1]")
        if abs(self.alpha * self.r ** 2 - self.gamma) > 1e-9 * self.gamma:
            raise ContractError("alpha r^2 must equal gamma")

    @property
    def C(self) -> float:
        return self.gamma


def eta(params: BarrierParams) -> SmoothField:
    """eta(x) = exp(-alpha|x-ybar|^2) - exp(-alpha r^2) with exact derivatives."""
    a, yb = params.alpha, np.asarray(params.ybar, dtype=float)
    floor = np.exp(-a * params.r ** 2)

    def value(x):
        z = x - yb
        return np.exp(-a * np.sum(z * z, axis=1)) - floor

    def grad(x):
        z = x - yb
        return -2 * a * z * np.exp(-a * np.sum(z * z, axis=1))[:, None]

    def hess(x):
        z = x - yb
        e = np.exp(-a * np.sum(z * z, axis=1))
        eye = np.eye(x.shape[1])
        return e[:, None, None] * (4 * a * a * z[:, :, None] * z[:, None, :] - 2 * a * eye)

    return SmoothField(value, grad, hess)


def local_floor(gamma: float, lam: float, trace_q: float, b_norm: float) -> float:
    """min over s in [1/2, 3/2] of exp(-gamma s^2)(2 lam gamma s^2 - Tr - 2|b| s).

    A lower bound for L eta / alpha on the annulus V^*, valid for r <= 1.
    """
    s = np.linspace(0.5, 1.5, 2001)
    vals = np.exp(-gamma * s ** 2) * (2 * lam * gamma * s ** 2 - trace_q - 2 * b_norm * s)
    return float(vals.min())


@dataclass
class BarrierConstants:
    """Output of the constant search; ``params`` builds a barrier for r <= r0."""

    gamma: float
    alpha0: float
    M: float
    r0: float
    lam: float
    trace_q: float
    b_norm: float
    jump_mass: float
    c_norm: float
    k_target: float
    lower_bound: float
    steps: list = field(default_factory=list)

    def params(self, ybar, r: Optional[float] = None) -> BarrierParams:
        r = self.r0 if r is None else float(r)
        if r > self.r0 * (1 + 1e-12):
            raise ContractError(f"radius {r} exceeds r0 = {self.r0}")
        return BarrierParams(self.gamma / r ** 2, np.atleast_1d(np.asarray(ybar, dtype=float)), r,
                             self.gamma, self.r0, self.M)


def a_est_bound(alpha: float, M: float, gamma: float, ell: float, ball_mass, jump_mass: float,
                c_norm: float) -> tuple:
    """Lower bound for (A - c) eta on V^* and its three bracket terms."""
    r = np.sqrt(gamma / alpha)
    s2 = ball_mass(M * r)
    s3 = (3.0 + np.sqrt(np.pi / gamma)) * jump_mass / M
    bracket = ell - s2 - s3
    return alpha * bracket - 2 * jump_mass - c_norm, s2, s3


def choose_constants(op: OperatorSpec, k_target: float = 1.0, region=None,
                     bounds: Optional[OperatorBounds] = None, M0: float = 16.0) -> BarrierConstants:
    """Pick gamma, then double M or alpha until the lower bound exceeds k_target.

    The doubling rule does not look at k_target, so the search visits the same
    sequence of (alpha, M) for every target and alpha0 is monotone in it.
    """
    if bounds is None:
        if region is None:
            raise ContractError("need a region to sample the ellipticity constant")
        bounds = operator_bounds(op, region)
    lam = bounds.lam
    if lam <= 0:
        raise ContractError("ellipticity constant must be positive")
    kern = op.kernel
    gamma = 4.0 / lam * (bounds.trace_q + 1.5 * bounds.b_norm)
    ell = local_floor(gamma, lam, bounds.trace_q, bounds.b_norm)
    jump_mass = float(kern.intensity_bound)
    if not np.isfinite(jump_mass):
        raise ConstantSelectionError("kernel has infinite total mass; use a truncated kernel")
    alpha, M = gamma, M0
    steps = []
    while True:
        lb, s2, s3 = a_est_bound(alpha, M, gamma, ell, kern.ball_mass, jump_mass, bounds.c_norm)
        steps.append((alpha, M, lb))
        if lb > k_target:
            break
        if alpha / gamma > DOUBLING_CAP or M > DOUBLING_CAP:
            tail = [kern.ball_mass(M * np.sqrt(gamma / alpha) * 2.0 ** -k) for k in range(4)]
            raise ConstantSelectionError(
                f"no admissible constants below the doubling cap; small-jump modulus tail {tail}")
        if s3 >= 0.5 * ell:
            M *= 2.0
        else:
            alpha *= 2.0
    return BarrierConstants(gamma, alpha, M, float(np.sqrt(gamma / alpha)), lam, bounds.trace_q,
                            bounds.b_norm, jump_mass, bounds.c_norm, k_target, lb, steps)


def annulus_samples(params: BarrierParams, per_axis: int = 32, n_quasi: int = 10_000,
                    seed: int = 7) -> np.ndarray:
    """Lattice plus Halton points inside V^*(ybar; r)."""
    _, outer = annuli(params.ybar, params.r)
    d = outer.dim
    yb = np.asarray(params.ybar, dtype=float)
    half = 1.5 * params.r
    axes = [np.linspace(-half, half, per_axis) for _ in range(d)]
    lat = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d) + yb
    halton = qmc.Halton(d, seed=seed).random(n_quasi) * 2 * half - half + yb
    pts = np.vstack([lat, halton])
    return pts[outer.contains(pts)]


@dataclass
class BarrierCheck:
    margin: float
    min_value: float
    k_target: float
    tol: float
    passed: bool
    worst_point: np.ndarray
    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def verify_barrier(op: OperatorSpec, params: BarrierParams, k_target: float = 1.0,
                   per_axis: int = 32, n_quasi: int = 10_000, tol: float = 1e-9) -> BarrierCheck:
    """Sampled minimum of (A - c) eta over V^*; passes when it reaches k_target."""
    pts = annulus_samples(params, per_axis, n_quasi)
    e = eta(params)
    vals = apply(op, e, pts) - op.coeffs.c(pts) * e.value(pts)
    i = int(np.argmin(vals))
    mn = float(vals[i])
    return BarrierCheck(mn - k_target, mn, k_target, tol, mn >= k_target - tol, pts[i], pts, vals)


# ---------------------------------------------------------------------------

def exterior_barrier(y0, r: float, sigma: float, scale: float = 1.0, m_out: float = 10.0) -> SmoothField:
    """psi = scale (r^-s - |x-y0|^-s), with the radius clamped to [r/10, m_out]."""
    y0 = np.asarray(y0, dtype=float)
    lo, hi = r / 10.0, m_out

    def value(x):
        rho = np.clip(np.linalg.norm(x - y0, axis=1), lo, hi)
        return scale * (r ** -sigma - rho ** -sigma)

    def grad(x):
        z = x - y0
        rho = np.linalg.norm(z, axis=1)
        g = scale * sigma * rho ** (-sigma - 2)
        g = np.where((rho > lo) & (rho < hi), g, 0.0)
        return g[:, None] * z

    def hess(x):
        z = x - y0
        rho = np.linalg.norm(z, axis=1)
        d = x.shape[1]
        f = scale * sigma * rho ** (-sigma - 2)
        f = np.where((rho > lo) & (rho < hi), f, 0.0)
        zz = z[:, :, None] * z[:, None, :] / rho[:, None, None] ** 2
        return f[:, None, None] * (np.eye(d)[None] - (sigma + 2) * zz)

    return SmoothField(value, grad, hess)


def verify_exterior_barrier(op: OperatorSpec, psi: SmoothField, dom, n_samples: int = 4096,
                            seed: int = 3, tol: float = 1e-9):
    """Sampled minimum of -A psi on D; returns (margin, worst point)."""
    lo, hi = dom.bbox
    pts = qmc.scale(qmc.Halton(dom.dim, seed=seed).random(n_samples), lo, hi)
    pts = pts[dom.contains(pts)]
    vals = -apply(op, psi, pts)
    i = int(np.argmin(vals))
    return float(vals[i]), pts[i], bool(vals[i] >= -tol)


def rho_modulus(w: np.ndarray, nodes: np.ndarray, dom, r_values) -> np.ndarray:
    """inf of w over nodes of D_r, for each r; NaN where no node lies in D_r."""
    dist = delta_D(dom, nodes)
    out = []
    for r in np.atleast_1d(r_values):
        sel = dist > r
        out.append(float(np.min(w[sel])) if np.any(sel) else np.nan)
    return np.array(out)


@dataclass
class ExitBound:
    sup_negative: float
    a: float
    t_grid: np.ndarray
    bounds: np.ndarray
    a_star: float
    t_star: float
    vacuous: bool

    def bound(self, t):
        return np.asarray(t, dtype=float) * self.sup_negative / self.a


def gaussian_bump(center, r: float) -> SmoothField:
    """rho(x) = exp(-|x-center|^2 / r^2)."""
    c = np.asarray(center, dtype=float)
    k = 1.0 / r ** 2

    def value(x):
        z = x - c
        return np.exp(-k * np.sum(z * z, axis=1))

    def grad(x):
        return -2 * k * (x - c) * value(x)[:, None]

    def hess(x):
        z = x - c
        return value(x)[:, None, None] * (4 * k * k * z[:, :, None] * z[:, None, :]
                                          - 2 * k * np.eye(x.shape[1])[None])

    return SmoothField(value, grad, hess)


def exit_probability_bound(op: OperatorSpec, xbar, r: float, c_low: float,
                           n_t: int = 400, per_axis: int = 41, n_quasi: int = 4096) -> ExitBound:
    """Upper bound (t/a) sup_B (A rho)^- on P(exit from B(xbar, r) before t), and a*.

    a* = max over a t-grid of (1 - exp(-c_low t)) (1 - bound(t)).
    """
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    d = xbar.size
    rho = gaussian_bump(xbar, r)
    axes = [np.linspace(-r, r, per_axis) for _ in range(d)]
    lat = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    hal = qmc.Halton(d, seed=11).random(n_quasi) * 2 * r - r
    pts = np.vstack([lat, hal, np.zeros((1, d))])
    pts = pts[np.sum(pts ** 2, axis=1) < r * r] + xbar
    sup_neg = float(np.max(np.maximum(-apply(op, rho, pts), 0.0)))
    a = 1.0 - np.exp(-1.0)
    if sup_neg > 0:
        t_hi = a / sup_neg
    else:
        t_hi = 50.0 / max(c_low, 1e-12)
    t = np.linspace(0.0, t_hi, n_t)
    b = t * sup_neg / a
    obj = (1 - np.exp(-c_low * t)) * (1 - b)
    k = int(np.argmax(obj))
    a_star, t_star = float(obj[k]), float(t[k])
    if c_low > 0 and sup_neg > 0:
        res = minimize_scalar(lambda s: -(1 - np.exp(-c_low * s)) * (1 - s * sup_neg / a),
                              bounds=(0.0, t_hi), method="bounded")
        if -res.fun > a_star:
            a_star, t_star = float(-res.fun), float(res.x)
    return ExitBound(sup_neg, a, t, b, a_star, t_star, a_star <= 0)
