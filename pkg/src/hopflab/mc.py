"""Euler scheme for the jump-diffusion generated by A, with killing and sources.

Randomness comes from the counter-based generator in :mod:`hopflab.rng`, keyed
by (seed, path index), so each path is reproducible on its own.  Constant
coefficient problems on analytic domains run through a compiled per-path
kernel; everything else goes through a vectorized engine that consumes the
same random numbers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numba as nb
import numpy as np

from . import rng
from .geometry import Annulus, Ball, Box
from .operator import (AtomicKernel, ContractError, EllipticityError, OperatorSpec, ShellKernel,
                       TruncatedStableKernel, ZeroKernel, as_points, operator_bounds)

Z95 = 1.959963984540054


@dataclass(frozen=True)
class PathConfig:
    dt: float
    n_paths: int
    seed: int = 0
    t_max: Optional[float] = None
    antithetic: bool = False
    block: int = 8192
    workers: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.n_paths < 1:
            raise ContractError("need dt > 0 and n_paths >= 1")
        if self.t_max is not None and self.t_max <= 0:
            raise ContractError("t_max must be positive")


@dataclass
class PathOutcome:
    tau: float
    x_tau: np.ndarray
    c_integral: float
    hit_horizon: bool
    source_integral: float = 0.0


@dataclass
class PathBatch:
    tau: np.ndarray
    x_tau: np.ndarray
    c_integral: np.ndarray
    source_integral: np.ndarray
    hit_horizon: np.ndarray
    dt: float
    t_max: float
    antithetic: bool

    def outcome(self, i: int) -> PathOutcome:
        return PathOutcome(float(self.tau[i]), self.x_tau[i].copy(), float(self.c_integral[i]),
                           bool(self.hit_horizon[i]), float(self.source_integral[i]))


@dataclass
class Estimate:
    value: float
    ci: float
    n_paths: int
    dt: float
    hit_fraction: float
    biased: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"estimate": self.value, "ci95": self.ci, "n_paths": self.n_paths, "dt": self.dt,
               "horizon_fraction": self.hit_fraction, "horizon_bias": self.biased}
        out.update(self.extra)
        return out


# ---------------------------------------------------------------------------
# compiled kernel

@nb.njit(cache=True, inline="always")
def _outside(x, code, prm):
    d = x.size
    if code == 0:
        s = 0.0
        for i in range(d):
            s += (x[i] - prm[i]) ** 2
        return s >= prm[d] ** 2
    if code == 1:
        for i in range(d):
            if x[i] <= prm[i] or x[i] >= prm[d + i]:
                return True
        return False
    s = 0.0
    for i in range(d):
        s += (x[i] - prm[i]) ** 2
    return s >= prm[d + 1] ** 2 or s <= prm[d] ** 2


@nb.njit(cache=True, inline="always")
def _poisson(u, mu):
    p = np.exp(-mu)
    cdf = p
    k = 0
    while u > cdf and k < rng.MAX_JUMPS:
        k += 1
        p *= mu / k
        cdf += p
    return k


@nb.njit(cache=True, inline="always")
def _jump(out, u1, u2, u3, code, atoms, cum, kp):
    d = out.size
    if code == 1:
        k = 0
        while k < cum.size - 1 and u1 >= cum[k]:
            k += 1
        for i in range(d):
            out[i] = atoms[k, i]
        return
    if code == 2:
        rad = (kp[0] ** d + u1 * (kp[1] ** d - kp[0] ** d)) ** (1.0 / d)
    else:
        a = kp[1] ** (-kp[0])
        b = kp[2] ** (-kp[0])
        rad = (a - u1 * (a - b)) ** (-1.0 / kp[0])
    if d == 1:
        out[0] = rad if u2 < 0.5 else -rad
    elif d == 2:
        th = 2.0 * np.pi * u2
        out[0] = rad * np.cos(th)
        out[1] = rad * np.sin(th)
    else:
        z = 2.0 * u2 - 1.0
        th = 2.0 * np.pi * u3
        s = np.sqrt(max(0.0, 1.0 - z * z))
        out[0] = rad * s * np.cos(th)
        out[1] = rad * s * np.sin(th)
        out[2] = rad * z


@nb.njit(cache=True, nogil=True)
def _simulate_constant(seed, streams, signs, x0, dt, n_max, L, b, c, fval, dom_code, dom_prm,
                       kern_code, lam_bar, atoms, cum, kp):
    n = streams.size
    d = x0.size
    tau = np.empty(n)
    xt = np.empty((n, d))
    cint = np.empty(n)
    fint = np.empty(n)
    hit = np.zeros(n, dtype=np.bool_)
    sq = np.sqrt(dt)
    mu = lam_bar * dt
    decay = np.exp(-c * dt)
    x = np.empty(d)
    xn = np.empty(d)
    z = np.empty(d)
    y = np.empty(d)
    buf = np.empty(4)
    for p in range(n):
        s_id = streams[p]
        sg = signs[p]
        for i in range(d):
            x[i] = x0[i]
        e = 1.0
        fi = 0.0
        done = False
        step = 0
        j = 0
        while step < n_max:
            # normals are consumed in order j, j+1, ...; refill from block j // 4
            for i in range(d):
                if j % 4 == 0:
                    buf[0], buf[1], buf[2], buf[3] = rng.normals4(seed, s_id, j // 4)
                z[i] = buf[j % 4]
                j += 1
            for i in range(d):
                acc = 0.0
                for k in range(d):
                    acc += L[i, k] * z[k]
                xn[i] = x[i] + b[i] * dt + sg * sq * acc
            if kern_code > 0:
                u0, _, _, _ = rng.uniforms4(seed, s_id, rng.TAG_COUNT, step)
                kj = _poisson(u0, mu)
                for q in range(kj):
                    _, u1, u2, u3 = rng.uniforms4(seed, s_id, rng.TAG_JUMP, step * rng.MAX_JUMPS + q)
                    _jump(y, u1, u2, u3, kern_code, atoms, cum, kp)
                    for i in range(d):
                        xn[i] += y[i]
            e_new = e * decay
            step += 1
            for i in range(d):
                x[i] = xn[i]
            if _outside(xn, dom_code, dom_prm):
                fi += e * fval * dt
                done = True
                break
            fi += 0.5 * (e + e_new) * fval * dt
            e = e_new
        tau[p] = step * dt
        for i in range(d):
            xt[p, i] = x[i]
        cint[p] = c * dt * step
        fint[p] = fi
        hit[p] = not done
    return tau, xt, cint, fint, hit


# ---------------------------------------------------------------------------
# setup

def _domain_code(dom):
    if isinstance(dom, Ball):
        return 0, np.r_[np.asarray(dom.center, float), dom.radius]
    if isinstance(dom, Box):
        return 1, np.r_[np.asarray(dom.lo, float), np.asarray(dom.hi, float)]
    if isinstance(dom, Annulus):
        return 2, np.r_[np.asarray(dom.center, float), dom.r_in, dom.r_out]
    return None, None


def _kernel_code(kern, d):
    atoms = np.zeros((1, d))
    cum = np.ones(1)
    kp = np.zeros(3)
    if isinstance(kern, ZeroKernel) or kern.intensity_bound == 0:
        return 0, atoms, cum, kp
    if isinstance(kern, AtomicKernel):
        return 1, kern.jumps.copy(), np.cumsum(kern.probs), kp
    if isinstance(kern, ShellKernel):
        return 2, atoms, cum, np.array([kern.r_in, kern.r_out, 0.0])
    if isinstance(kern, TruncatedStableKernel):
        return 3, atoms, cum, np.array([kern.sigma, kern.eps, kern.R])
    raise ContractError(f"unsupported kernel {type(kern).__name__}")


def diffusion_factor(Q: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = Q; eigen square root for singular PSD Q."""
    try:
        return np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(Q)
        if np.min(w) < -1e-12 * max(1.0, np.max(np.abs(w))):
            raise EllipticityError("diffusion matrix is not positive semidefinite")
        return V * np.sqrt(np.clip(w, 0, None))[..., None, :]


def default_horizon(op: OperatorSpec, dom) -> float:
    try:
        lam = operator_bounds(op, dom, spacing=dom.diameter() / 20).lam
    except EllipticityError:
        lam = None
    diam = dom.diameter()
    if lam is None or lam <= 0:
        return 50.0 * max(diam, 1.0)
    return 50.0 * diam ** 2 / lam


def _streams(indices: np.ndarray, antithetic: bool):
    if antithetic:
        return indices // 2, np.where(indices % 2 == 1, -1.0, 1.0)
    return indices.copy(), np.ones(indices.size)


def _fast_path_ok(op, dom, f):
    code, _ = _domain_code(dom)
    kern = op.kernel
    rate_ok = not (isinstance(kern, AtomicKernel) and kern.rate_field is not None)
    return op.coeffs.constant and code is not None and rate_ok and (f is None or np.isscalar(f))


def _run_constant(op, dom, x0, cfg, f, indices, t_max):
    d = op.dim
    xq = x0[None, :]
    L = diffusion_factor(op.q_eff(xq)[0])
    b = op.coeffs.b(xq)[0] - op.kernel.compensator()
    c = float(op.coeffs.c(xq)[0])
    code, prm = _domain_code(dom)
    kcode, atoms, cum, kp = _kernel_code(op.kernel, d)
    n_max = int(np.ceil(t_max / cfg.dt - 1e-9))
    streams, signs = _streams(indices, cfg.antithetic)
    return _simulate_constant(np.uint64(cfg.seed), streams.astype(np.int64), signs, x0, cfg.dt, n_max,
                              L, b, c, 0.0 if f is None else float(f), code, prm, kcode,
                              float(op.kernel.intensity_bound), atoms, cum, kp)


def _sample_jumps(kern, u, d):
    out = np.zeros((u.shape[0], d))
    kcode, atoms, cum, kp = _kernel_code(kern, d)
    for p in range(u.shape[0]):
        _jump(out[p], u[p, 1], u[p, 2], u[p, 3], kcode, atoms, cum, kp)
    return out


def _run_generic(op, dom, x0, cfg, f, indices, t_max):
    """Vectorized Euler over active paths; same random numbers as the compiled kernel."""
    d = op.dim
    n = indices.size
    streams, signs = _streams(indices, cfg.antithetic)
    streams = streams.astype(np.int64)
    seed = np.uint64(cfg.seed)
    x = np.tile(x0, (n, 1))
    ci = np.zeros(n)
    fi = np.zeros(n)
    tau = np.full(n, np.nan)
    hit = np.zeros(n, dtype=bool)
    active = np.arange(n)
    kern = op.kernel
    lam_bar = float(kern.intensity_bound)
    fun = (lambda z: np.full(z.shape[0], 0.0 if f is None else float(f))) if (f is None or np.isscalar(f)) else f
    n_max = int(np.ceil(t_max / cfg.dt - 1e-9))
    sq = np.sqrt(cfg.dt)
    step = 0
    while active.size and step < n_max:
        xa = x[active]
        z = rng.normals_for(seed, streams[active], step * d, d)
        L = diffusion_factor(op.q_eff(xa))
        b = op.coeffs.b(xa) - kern.compensator()[None, :]
        xn = xa + b * cfg.dt + (signs[active] * sq)[:, None] * np.einsum("nij,nj->ni", L, z)
        if lam_bar > 0:
            u0 = rng.uniforms_for(seed, streams[active], rng.TAG_COUNT, step)[:, 0]
            counts = np.array([_poisson(u, lam_bar * cfg.dt) for u in u0])
            rate = kern.intensity(xa) / lam_bar
            for q in range(int(counts.max()) if counts.size else 0):
                sel = np.flatnonzero(counts > q)
                u = rng.uniforms_for(seed, streams[active[sel]], rng.TAG_JUMP, step * rng.MAX_JUMPS + q)
                keep = u[:, 0] < rate[sel] if isinstance(kern, AtomicKernel) and kern.rate_field is not None \
                    else np.ones(sel.size, dtype=bool)
                jumps = _sample_jumps(kern, u, d)
                xn[sel[keep]] += jumps[keep]
        e0 = np.exp(-ci[active])
        fa = fun(xa)
        ci_new = ci[active] + op.coeffs.c(xa) * cfg.dt
        step += 1
        out = dom.sdf(xn) >= 0
        fnew = fun(xn)
        inc = np.where(out, e0 * fa * cfg.dt, 0.5 * (e0 * fa + np.exp(-ci_new) * fnew) * cfg.dt)
        fi[active] += inc
        ci[active] = ci_new
        x[active] = xn
        done = active[out]
        tau[done] = step * cfg.dt
        active = active[~out]
    tau[active] = step * cfg.dt
    hit[active] = True
    return tau, x, ci, fi, hit


def simulate(op: OperatorSpec, dom, x0, cfg: PathConfig, f: Union[None, float, Callable] = None,
             indices: Optional[np.ndarray] = None, engine: str = "auto") -> PathBatch:
    """Simulate paths ``indices`` (default 0..n_paths-1) started at x0 in D."""
    x0 = as_points(x0, op.dim)[0].astype(float)
    if not bool(dom.contains(x0[None, :])[0]):
        raise ContractError("starting point must lie in D")
    t_max = cfg.t_max if cfg.t_max is not None else default_horizon(op, dom)
    idx = np.arange(cfg.n_paths, dtype=np.int64) if indices is None else np.asarray(indices, dtype=np.int64)
    fast = _fast_path_ok(op, dom, f) if engine == "auto" else engine == "compiled"
    runner = _run_constant if fast else _run_generic
    blocks = [idx[i:i + cfg.block] for i in range(0, idx.size, cfg.block)]
    if cfg.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda blk: runner(op, dom, x0, cfg, f, blk, t_max), blocks))
    else:
        parts = [runner(op, dom, x0, cfg, f, blk, t_max) for blk in blocks]
    tau, xt, ci, fi, hit = (np.concatenate([p[k] for p in parts]) for k in range(5))
    return PathBatch(tau, xt, ci, fi, hit, cfg.dt, t_max, cfg.antithetic)


def simulate_path(op: OperatorSpec, dom, x0, cfg: PathConfig, path_index: int) -> PathOutcome:
    return simulate(op, dom, x0, cfg, indices=np.array([path_index])).outcome(0)


# ---------------------------------------------------------------------------
# estimators

def _mean_ci(samples: np.ndarray, antithetic: bool):
    if antithetic and samples.size >= 4:
        m = samples.size // 2 * 2
        pairs = 0.5 * (samples[:m:2] + samples[1:m:2])
        if samples.size > m:
            pairs = np.r_[pairs, samples[m:]]
        return float(np.mean(samples)), float(Z95 * np.std(pairs, ddof=1) / np.sqrt(pairs.size))
    if samples.size < 2:
        return float(np.mean(samples)), float("inf")
    return float(np.mean(samples)), float(Z95 * np.std(samples, ddof=1) / np.sqrt(samples.size))


def _finish(samples, batch: PathBatch, extra=None) -> Estimate:
    keep = ~batch.hit_horizon
    frac = float(np.mean(batch.hit_horizon))
    vals = samples[keep]
    if vals.size == 0:
        return Estimate(float("nan"), float("inf"), int(batch.tau.size), batch.dt, frac, True, extra or {})
    m, ci = _mean_ci(vals, batch.antithetic and frac == 0)
    return Estimate(m, ci, int(batch.tau.size), batch.dt, frac, frac > 0, extra or {})


def estimate_feynman_kac(op: OperatorSpec, dom, x0, cfg: PathConfig, f=0.0,
                         g: Union[float, Callable] = 0.0, batch: Optional[PathBatch] = None) -> Estimate:
    """E[e_c(tau) g(X_tau) + int_0^tau e_c(s) f(X_s) ds]; estimates u with (-A+c)u = f, u = g outside."""
    if batch is None:
        batch = simulate(op, dom, x0, cfg, f=f)
    gv = np.full(batch.tau.size, float(g)) if np.isscalar(g) else np.asarray(g(batch.x_tau), dtype=float)
    samples = np.exp(-batch.c_integral) * gv + batch.source_integral
    return _finish(samples, batch)


def estimate_gauge(op: OperatorSpec, dom, x0, cfg: PathConfig, batch: Optional[PathBatch] = None) -> Estimate:
    """v(x0) = E exp(-int_0^tau c); w = 1 - v is reported alongside."""
    if batch is None:
        batch = simulate(op, dom, x0, cfg)
    est = _finish(np.exp(-batch.c_integral), batch)
    est.extra = {"w": 1.0 - est.value}
    return est


def estimate_exit_time(op: OperatorSpec, dom, x0, cfg: PathConfig) -> Estimate:
    return estimate_feynman_kac(op.without_killing(), dom, x0, cfg, f=1.0, g=0.0)


@dataclass
class SurvivalCurve:
    t: np.ndarray
    p: np.ndarray
    ci: np.ndarray
    n_paths: int
    horizon_fraction: float

    def decay_rate(self, t_lo: float, t_hi: float) -> tuple:
        """Least-squares slope of log p over [t_lo, t_hi] and its standard error."""
        sel = (self.t >= t_lo) & (self.t <= t_hi) & (self.p > 0)
        tt, lp = self.t[sel], np.log(self.p[sel])
        A = np.vstack([tt, np.ones_like(tt)]).T
        coef, *_ = np.linalg.lstsq(A, lp, rcond=None)
        w = self.p[sel] * self.n_paths
        resid_var = 1.0 / np.maximum(w, 1.0)
        cov = np.linalg.inv(A.T @ (A / resid_var[:, None]))
        return float(-coef[0]), float(np.sqrt(cov[0, 0]))


def estimate_survival(op: OperatorSpec, dom, x0, t_grid, cfg: PathConfig,
                      batch: Optional[PathBatch] = None) -> SurvivalCurve:
    """Empirical P(tau > t) with normal-approximation 95% intervals."""
    if batch is None:
        batch = simulate(op.without_killing(), dom, x0, cfg)
    t = np.asarray(t_grid, dtype=float)
    n = batch.tau.size
    p = np.array([np.mean(batch.tau > s) if s > 0 else 1.0 for s in t])
    ci = Z95 * np.sqrt(p * (1 - p) / n)
    return SurvivalCurve(t, p, ci, n, float(np.mean(batch.hit_horizon)))
