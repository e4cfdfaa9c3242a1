"""Integro-differential operators A = L + S with a Levy jump kernel.

Coefficient fields are vectorized callables acting on arrays of shape
``(n, d)``.  Sup norms are recorded by the caller and never inferred from
samples, since the structural constants must be true bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as _gamma_fn
from scipy.stats import qmc


class ContractError(ValueError):
    """Raised when a caller breaks an operation's precondition."""


class EllipticityError(ValueError):
    """Raised when the diffusion matrix fails to be positive definite."""


class QuadratureError(RuntimeError):
    """Raised when kernel quadrature does not settle between refinement levels."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


def as_points(x, d: int) -> np.ndarray:
    """Coerce a point or a batch of points into a float array of shape (n, d)."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(1, -1) if pts.shape[0] == d else pts.reshape(-1, 1)
    if pts.shape[1] != d:
        raise ContractError(f"expected points of dimension {d}, got shape {pts.shape}")
    return pts


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * np.pi ** (d / 2.0) / _gamma_fn(d / 2.0)


@dataclass(frozen=True)
class SmoothField:
    """Scalar field with optional gradient and Hessian oracles.

    ``value`` maps (n, d) -> (n,), ``grad`` maps (n, d) -> (n, d) and
    ``hess`` maps (n, d) -> (n, d, d).
    """

    value: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)


def constant_field(value: float) -> SmoothField:
    return SmoothField(
        value=lambda x: np.full(x.shape[0], float(value)),
        grad=lambda x: np.zeros_like(x),
        hess=lambda x: np.zeros((x.shape[0], x.shape[1], x.shape[1])),
    )


def quadratic_field(matrix, vector=None, const: float = 0.0) -> SmoothField:
    """u(x) = x^T M x + v.x + const with exact derivatives."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    S = 0.5 * (M + M.T)
    v = np.zeros(M.shape[0]) if vector is None else np.asarray(vector, dtype=float)
    return SmoothField(
        value=lambda x: np.einsum("ni,ij,nj->n", x, S, x) + x @ v + const,
        grad=lambda x: 2.0 * x @ S + v,
        hess=lambda x: np.broadcast_to(2.0 * S, (x.shape[0],) + S.shape).copy(),
    )


def linear_field(vector, const: float = 0.0) -> SmoothField:
    v = np.asarray(vector, dtype=float)
    return quadratic_field(np.zeros((v.size, v.size)), v, const)


# ---------------------------------------------------------------------------
# coefficients

@dataclass(frozen=True)
class CoefficientField:
    """Diffusion Q, drift b and killing c together with their recorded bounds."""

    dim: int
    q: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    c: Callable[[np.ndarray], np.ndarray]
    q_norm: np.ndarray
    b_norm: np.ndarray
    c_norm: float
    c_low: float = 0.0
    constant: bool = False
    diagonal_q: bool = False
    name: str = "custom"

    def trace_q_norm(self) -> float:
        return float(np.sum(np.diag(self.q_norm)))

    def drift_norm(self) -> float:
        """Upper bound on sup |b(x)| in the Euclidean norm."""
        return float(np.sqrt(np.sum(self.b_norm ** 2)))


def constant_coefficients(q, b=None, c: float = 0.0, name: str = "constant") -> CoefficientField:
    Q = np.atleast_2d(np.asarray(q, dtype=float))
    d = Q.shape[0]
    if not np.allclose(Q, Q.T):
        raise ContractError("diffusion matrix must be symmetric")
    bv = np.zeros(d) if b is None else np.asarray(b, dtype=float).reshape(d)
    if c < 0:
        raise ContractError("killing rate must be nonnegative")
    return CoefficientField(
        dim=d,
        q=lambda x: np.broadcast_to(Q, (x.shape[0], d, d)).copy(),
        b=lambda x: np.broadcast_to(bv, (x.shape[0], d)).copy(),
        c=lambda x: np.full(x.shape[0], float(c)),
        q_norm=np.abs(Q),
        b_norm=np.abs(bv),
        c_norm=float(c),
        c_low=float(c),
        constant=True,
        diagonal_q=bool(np.allclose(Q, np.diag(np.diag(Q)))),
        name=name,
    )


def with_killing(coeffs: CoefficientField, c, c_norm: Optional[float] = None,
                 c_low: Optional[float] = None) -> CoefficientField:
    """Swap the killing rate; ``c`` is a scalar or a vectorized callable."""
    if np.isscalar(c):
        value = float(c)
        if value < 0:
            raise ContractError("killing rate must be nonnegative")
        return replace(coeffs, c=lambda x: np.full(x.shape[0], value),
                       c_norm=value, c_low=value)
    if c_norm is None:
        raise ContractError("a callable killing rate needs a recorded sup norm")
    return replace(coeffs, c=c, c_norm=float(c_norm),
                   c_low=0.0 if c_low is None else float(c_low), constant=False)


# ---------------------------------------------------------------------------
# kernels

@dataclass(frozen=True)
class ZeroKernel:
    dim: int

    intensity_bound = 0.0
    support_radius = 0.0
    n_star = 0.0
    symmetric = True
    is_atomic = True

    def intensity(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(x.shape[0])

    def ball_mass(self, r: float) -> float:
        return 0.0

    def diffusion_correction(self) -> np.ndarray:
        return np.zeros((self.dim, self.dim))

    def compensator(self) -> np.ndarray:
        return np.zeros(self.dim)

    def nodes(self, level: int = 0):
        return np.zeros((0, self.dim)), np.zeros(0)


@dataclass(frozen=True)
class AtomicKernel:
    """N(x, dy) = lam(x) * sum_k p_k delta_{y_k}(dy), with lam(x) <= rate."""

    jumps: np.ndarray
    probs: np.ndarray
    rate: float
    rate_field: Optional[Callable[[np.ndarray], np.ndarray]] = None
    is_atomic = True

    def __post_init__(self):
        jumps = np.atleast_2d(np.asarray(self.jumps, dtype=float))
        probs = np.asarray(self.probs, dtype=float).ravel()
        if jumps.shape[0] != probs.size:
            raise ContractError("one probability per atom is required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ContractError("atom probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return self.jumps.shape[1]

    @property
    def intensity_bound(self) -> float:
        return float(self.rate)

    @property
    def support_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.jumps, axis=1)))

    @property
    def n_star(self) -> float:
        sq = np.sum(self.jumps ** 2, axis=1)
        return float(self.rate * np.sum(self.probs * np.minimum(1.0, sq)))

    @property
    def symmetric(self) -> bool:
        return bool(np.allclose(self.compensator(), 0.0, atol=1e-15))

    def intensity(self, x: np.ndarray) -> np.ndarray:
        if self.rate_field is None:
            return np.full(x.shape[0], self.rate)
        lam = np.asarray(self.rate_field(x), dtype=float)
        if np.any(lam > self.rate * (1 + 1e-12)) or np.any(lam < 0):
            raise ContractError("jump intensity exceeds its recorded bound")
        return lam

    def ball_mass(self, r: float) -> float:
        inside = np.linalg.norm(self.jumps, axis=1) <= r
        return float(self.rate * np.sum(self.probs[inside]))

    def diffusion_correction(self) -> np.ndarray:
        return np.zeros((self.dim, self.dim))

    def compensator(self) -> np.ndarray:
        sq = np.sum(self.jumps ** 2, axis=1)
        return self.rate * np.sum((self.probs / (1.0 + sq))[:, None] * self.jumps, axis=0)

    def nodes(self, level: int = 0):
        return self.jumps, self.rate * self.probs


def _polar_nodes(d: int, n_radial: int, n_angular: int, r_lo: float, r_hi: float,
                 radial_weight: Callable[[np.ndarray], np.ndarray], log_radial: bool):
    """Polar product rule: Gauss-Legendre in radius, midpoint in angle."""
    t, wt = np.polynomial.legendre.leggauss(n_radial)
    if log_radial:
        a, b = np.log(r_lo), np.log(r_hi)
        s = np.exp(0.5 * (b - a) * t + 0.5 * (b + a))
        ws = 0.5 * (b - a) * wt * s
    else:
        s = 0.5 * (r_hi - r_lo) * t + 0.5 * (r_hi + r_lo)
        ws = 0.5 * (r_hi - r_lo) * wt
    ws = ws * radial_weight(s) * s ** (d - 1)
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
        wd = np.array([1.0, 1.0])
    elif d == 2:
        th = (np.arange(n_angular) + 0.5) * 2 * np.pi / n_angular
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        wd = np.full(n_angular, 2 * np.pi / n_angular)
    elif d == 3:
        nz = max(n_angular // 2, 2)
        z = -1 + (np.arange(nz) + 0.5) * 2.0 / nz
        th = (np.arange(n_angular) + 0.5) * 2 * np.pi / n_angular
        Z, TH = np.meshgrid(z, th, indexing="ij")
        rho = np.sqrt(1 - Z ** 2)
        dirs = np.stack([rho * np.cos(TH), rho * np.sin(TH), Z], axis=-1).reshape(-1, 3)
        wd = np.full(dirs.shape[0], 4 * np.pi / dirs.shape[0])
    else:
        raise ContractError("density kernels are supported for d <= 3")
    ys = (s[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    ws_all = (ws[:, None] * wd[None, :]).ravel()
    return ys, ws_all


QUAD_LEVELS = ((16, 32), (32, 64))


@dataclass(frozen=True)
class ShellKernel:
    """Finite-activity kernel: rate times the uniform law on r_in <= |y| <= r_out."""

    dim: int
    rate: float
    r_out: float
    r_in: float = 0.0
    is_atomic = False
    symmetric = True

    def __post_init__(self):
        if not (0 <= self.r_in < self.r_out):
            raise ContractError("need 0 <= r_in < r_out")

    @property
    def intensity_bound(self) -> float:
        return float(self.rate)

    @property
    def support_radius(self) -> float:
        return float(self.r_out)

    def _norm(self) -> float:
        return sphere_area(self.dim) * (self.r_out ** self.dim - self.r_in ** self.dim) / self.dim

    def density(self, y: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(y, axis=-1)
        return np.where((r >= self.r_in) & (r <= self.r_out), 1.0 / self._norm(), 0.0)

    @property
    def n_star(self) -> float:
        d = self.dim
        lo, hi = self.r_in, self.r_out
        # E min(1,|Y|^2) with |Y| having density proportional to s^(d-1)
        a1 = min(max(lo, 0.0), 1.0)
        b1 = min(hi, 1.0)
        near = (b1 ** (d + 2) - a1 ** (d + 2)) / (d + 2) if b1 > a1 else 0.0
        far = (hi ** d - max(lo, 1.0) ** d) / d if hi > 1.0 else 0.0
        return float(self.rate * (near + far) * d / (hi ** d - lo ** d))

    def intensity(self, x: np.ndarray) -> np.ndarray:
        return np.full(x.shape[0], self.rate)

    def ball_mass(self, r: float) -> float:
        d = self.dim
        rr = np.clip(r, self.r_in, self.r_out)
        return float(self.rate * (rr ** d - self.r_in ** d) / (self.r_out ** d - self.r_in ** d))

    def diffusion_correction(self) -> np.ndarray:
        return np.zeros((self.dim, self.dim))

    def compensator(self) -> np.ndarray:
        return np.zeros(self.dim)

    def nodes(self, level: int = 0):
        nr, na = QUAD_LEVELS[level] if level < len(QUAD_LEVELS) else (8 * 2 ** level, 16 * 2 ** level)
        w = self.rate / self._norm()
        return _polar_nodes(self.dim, nr, na, self.r_in, self.r_out,
                            lambda s: np.full_like(s, w), log_radial=False)

    def radius_from_uniform(self, u):
        d = self.dim
        return (self.r_in ** d + u * (self.r_out ** d - self.r_in ** d)) ** (1.0 / d)


@dataclass(frozen=True)
class TruncatedStableKernel:
    """Density scale*|y|^(-d-sigma) on eps < |y| <= R.

    Jumps below eps are removed and replaced by the Gaussian correction
    ``diffusion_correction()``, the second moment of the removed part.
    """

    dim: int
    sigma: float
    scale: float
    R: float
    eps: float
    is_atomic = False
    symmetric = True

    def __post_init__(self):
        if not (0 < self.sigma < 2):
            raise ContractError("stability index must lie in (0, 2)")
        if not (0 < self.eps < self.R):
            raise ContractError("need 0 < eps < R")

    @property
    def intensity_bound(self) -> float:
        s = self.sigma
        return float(self.scale * sphere_area(self.dim) * (self.eps ** -s - self.R ** -s) / s)

    @property
    def support_radius(self) -> float:
        return float(self.R)

    @property
    def n_star(self) -> float:
        s, lo, hi = self.sigma, self.eps, self.R
        total = 0.0
        if lo < 1.0:
            b = min(hi, 1.0)
            total += (b ** (2 - s) - lo ** (2 - s)) / (2 - s)
        if hi > 1.0:
            a = max(lo, 1.0)
            total += (a ** -s - hi ** -s) / s
        return float(self.scale * sphere_area(self.dim) * total)

    def density(self, y: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(y, axis=-1)
        inside = (r > self.eps) & (r <= self.R)
        return np.where(inside, self.scale * np.maximum(r, self.eps) ** (-self.dim - self.sigma), 0.0)

    def intensity(self, x: np.ndarray) -> np.ndarray:
        return np.full(x.shape[0], self.intensity_bound)

    def ball_mass(self, r: float) -> float:
        if r <= self.eps:
            return 0.0
        rr = min(r, self.R)
        s = self.sigma
        return float(self.scale * sphere_area(self.dim) * (self.eps ** -s - rr ** -s) / s)

    def diffusion_correction(self) -> np.ndarray:
        s = self.sigma
        v = self.scale * sphere_area(self.dim) * self.eps ** (2 - s) / (self.dim * (2 - s))
        return v * np.eye(self.dim)

    def compensator(self) -> np.ndarray:
        return np.zeros(self.dim)

    def nodes(self, level: int = 0):
        nr, na = QUAD_LEVELS[level] if level < len(QUAD_LEVELS) else (8 * 2 ** level, 16 * 2 ** level)
        sc, p = self.scale, self.dim + self.sigma
        return _polar_nodes(self.dim, nr, na, self.eps, self.R,
                            lambda s: sc * s ** (-p), log_radial=True)

    def radius_from_uniform(self, u):
        s = self.sigma
        a, b = self.eps ** -s, self.R ** -s
        return (a - u * (a - b)) ** (-1.0 / s)


LevyKernel = object  # any of the kernel classes above


# ---------------------------------------------------------------------------
# operator

@dataclass(frozen=True)
class OperatorSpec:
    coeffs: CoefficientField
    kernel: object
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.coeffs.dim

    def q_eff(self, x: np.ndarray) -> np.ndarray:
        """Diffusion matrix including the small-jump correction."""
        return self.coeffs.q(x) + self.kernel.diffusion_correction()[None, :, :]

    def q_eff_norm(self) -> np.ndarray:
        return self.coeffs.q_norm + np.abs(self.kernel.diffusion_correction())

    def m_a(self) -> float:
        return float(np.sum(self.q_eff_norm()) + np.sum(self.coeffs.b_norm) + self.kernel.n_star)

    def with_c(self, c, c_norm=None, c_low=None) -> "OperatorSpec":
        return replace(self, coeffs=with_killing(self.coeffs, c, c_norm, c_low))

    def without_killing(self) -> "OperatorSpec":
        return self.with_c(0.0)

    def scaled(self, s: float) -> "OperatorSpec":
        """The operator s*A (s > 0), realized by scaling coefficients and kernel rate."""
        co = self.coeffs
        q, b, c = co.q, co.b, co.c
        new = replace(co, q=lambda x: s * q(x), b=lambda x: s * b(x), c=lambda x: s * c(x),
                      q_norm=s * co.q_norm, b_norm=s * co.b_norm, c_norm=s * co.c_norm,
                      c_low=s * co.c_low)
        k = self.kernel
        if isinstance(k, AtomicKernel):
            k = replace(k, rate=s * k.rate)
        elif isinstance(k, ShellKernel):
            k = replace(k, rate=s * k.rate)
        elif isinstance(k, TruncatedStableKernel):
            k = replace(k, scale=s * k.scale)
        return replace(self, coeffs=new, kernel=k)


def apply_local(op: OperatorSpec, u: SmoothField, x) -> np.ndarray:
    """0.5 tr(Q H u) + b . grad u, with Q including any small-jump correction."""
    if u.hess is None or u.grad is None:
        raise ContractError("the local part needs gradient and Hessian oracles")
    pts = as_points(x, op.dim)
    Q = op.q_eff(pts)
    H = u.hess(pts)
    return 0.5 * np.einsum("nij,nij->n", Q, H) + np.einsum("ni,ni->n", op.coeffs.b(pts), u.grad(pts))


def _jump_integral(op, u, pts, level):
    kern = op.kernel
    ys, ws = kern.nodes(level)
    if ys.shape[0] == 0:
        return np.zeros(pts.shape[0]), np.zeros(pts.shape[0])
    n, m, d = pts.shape[0], ys.shape[0], op.dim
    ux = u.value(pts)
    tgt = (pts[:, None, :] + ys[None, :, :]).reshape(-1, d)
    diff = u.value(tgt).reshape(n, m) - ux[:, None]
    if u.grad is not None:
        comp = ys / (1.0 + np.sum(ys ** 2, axis=1))[:, None]
        diff = diff - u.grad(pts) @ comp.T
    elif not kern.symmetric:
        raise ContractError("non-symmetric kernels need a gradient oracle")
    rate = kern.intensity(pts) / max(kern.intensity_bound, 1e-300)
    integrand = diff * ws[None, :]
    return rate * integrand.sum(axis=1), rate * np.abs(integrand).sum(axis=1)


def apply_nonlocal(op: OperatorSpec, u: SmoothField, x, rtol: float = 1e-6) -> np.ndarray:
    """Jump part S u(x); exact for atoms, two-level polar quadrature otherwise."""
    pts = as_points(x, op.dim)
    kern = op.kernel
    if kern.intensity_bound == 0.0:
        return np.zeros(pts.shape[0])
    if kern.is_atomic:
        return _jump_integral(op, u, pts, 0)[0]
    coarse, _ = _jump_integral(op, u, pts, 0)
    fine, mass = _jump_integral(op, u, pts, 1)
    err = np.abs(fine - coarse)
    scale = np.maximum(np.abs(fine), mass)
    bad = err > rtol * np.maximum(scale, 1e-300)
    if np.any(bad):
        achieved = float(np.max(err / np.maximum(scale, 1e-300)))
        raise QuadratureError(f"kernel quadrature did not settle (relative change {achieved:.2e})",
                              achieved)
    return fine


def apply(op: OperatorSpec, u: SmoothField, x, rtol: float = 1e-6) -> np.ndarray:
    return apply_local(op, u, x) + apply_nonlocal(op, u, x, rtol)


@dataclass(frozen=True)
class OperatorBounds:
    lam: float
    m_a: float
    n_star: float
    trace_q: float
    b_norm: float
    c_norm: float
    n_samples: int
    spacing: float


def _sample_region(region, spacing: float) -> np.ndarray:
    lo, hi = (np.asarray(v, dtype=float) for v in region.bbox)
    axes = [np.arange(np.ceil(l / spacing), np.floor(h / spacing) + 1) * spacing for l, h in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    inside = mesh[region.contains_closed(mesh)] if mesh.size else mesh
    if inside.shape[0] == 0:
        inside = np.asarray(region.anchor(), dtype=float).reshape(1, -1)
    return inside


def operator_bounds(op: OperatorSpec, region, spacing: float = 0.05) -> OperatorBounds:
    """Sampled ellipticity constant over a region, plus recorded bounds.

    Samples lie on the lattice spacing*Z^d, so nested regions share samples.
    """
    pts = _sample_region(region, spacing)
    Q = op.q_eff(pts)
    if not np.allclose(Q, np.transpose(Q, (0, 2, 1)), atol=1e-12):
        raise ContractError("diffusion matrix is not symmetric at a sampled point")
    lam = float(np.min(np.linalg.eigvalsh(Q)))
    if lam <= 0:
        raise EllipticityError(f"sampled minimum eigenvalue {lam:.3e} is not positive")
    co = op.coeffs
    return OperatorBounds(
        lam=lam, m_a=op.m_a(), n_star=op.kernel.n_star,
        trace_q=float(np.sum(np.diag(op.q_eff_norm()))), b_norm=co.drift_norm(),
        c_norm=co.c_norm, n_samples=int(pts.shape[0]), spacing=spacing)


def vmo_modulus(f: Callable[[np.ndarray], np.ndarray], r: float, region, n_centers: int = 4000,
                n_inner: int = 256, seed: int = 0) -> float:
    """Largest sampled mean oscillation of f over balls of radius <= r centred in region."""
    if r <= 0:
        raise ContractError("radius must be positive")
    d = len(region.bbox[0])
    lo, hi = (np.asarray(v, dtype=float) for v in region.bbox)
    step = r / 2.0
    axes = [np.arange(np.ceil(l / step), np.floor(h / step) + 1) * step for l, h in zip(lo, hi)]
    n_lat = int(np.prod([a.size for a in axes]))
    if n_lat <= n_centers:
        centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    else:
        centers = qmc.scale(qmc.Halton(d, seed=seed).random(n_centers), lo, hi)
    centers = centers[region.contains_closed(centers)]
    # quasi-random points in the unit ball
    raw = qmc.Halton(d, seed=seed + 1).random(4 * n_inner) * 2 - 1
    unit = raw[np.sum(raw ** 2, axis=1) <= 1][:n_inner]
    worst = 0.0
    for rad in (r, r / 2, r / 4):
        for chunk in np.array_split(centers, max(1, centers.shape[0] // 256)):
            pts = chunk[:, None, :] + rad * unit[None, :, :]
            vals = np.asarray(f(pts.reshape(-1, d)), dtype=float).reshape(chunk.shape[0], -1)
            osc = np.mean(np.abs(vals - vals.mean(axis=1, keepdims=True)), axis=1)
            if osc.size:
                worst = max(worst, float(osc.max()))
    return worst


# ---------------------------------------------------------------------------
# presets

def _anisotropic_q(x: np.ndarray) -> np.ndarray:
    out = np.zeros((x.shape[0], 2, 2))
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = 1.0 + np.minimum(np.abs(x[:, 0]), 1.0)
    return out


def laplacian(d: int = 2, c: float = 0.0) -> OperatorSpec:
    """One half of the Laplacian."""
    return OperatorSpec(constant_coefficients(np.eye(d), None, c, "laplacian"), ZeroKernel(d), "laplacian")


def anisotropic(c: float = 0.0) -> OperatorSpec:
    co = CoefficientField(
        dim=2, q=_anisotropic_q, b=lambda x: np.zeros((x.shape[0], 2)),
        c=lambda x: np.full(x.shape[0], float(c)), q_norm=np.diag([1.0, 2.0]),
        b_norm=np.zeros(2), c_norm=float(c), c_low=float(c), constant=False,
        diagonal_q=True, name="anisotropic")
    return OperatorSpec(co, ZeroKernel(2), "anisotropic")


def two_point_jump(d: int = 2, c: float = 0.0, size: float = 1.0, mass: float = 1.0) -> OperatorSpec:
    """Brownian part plus unit-mass jumps of +-size*e1."""
    e1 = np.zeros(d)
    e1[0] = size
    kern = AtomicKernel(np.stack([e1, -e1]), np.array([0.5, 0.5]), 2.0 * mass)
    return OperatorSpec(constant_coefficients(np.eye(d), None, c, "two-point-jump"), kern, "two-point-jump")


def truncated_stable(d: int = 2, c: float = 0.0, sigma: float = 1.0, scale: float = 0.2,
                     R: float = 1.0, eps: float = 0.1) -> OperatorSpec:
    kern = TruncatedStableKernel(d, sigma, scale, R, eps)
    return OperatorSpec(constant_coefficients(np.eye(d), None, c, "truncated-stable"), kern,
                        "truncated-stable")


def drifted(d: int = 2, c: float = 0.0, drift=None) -> OperatorSpec:
    """One half of the Laplacian plus a constant drift (default 0.5 e1)."""
    b = np.zeros(d)
    if drift is None:
        b[0] = 0.5
    else:
        b[:] = np.asarray(drift, dtype=float).reshape(d)
    return OperatorSpec(constant_coefficients(np.eye(d), b, c, "drifted"), ZeroKernel(d), "drifted")


def variable_drift(b: Callable, b_norm, d: int = 1, name: str = "variable-drift") -> OperatorSpec:
    """One half of the Laplacian plus a position-dependent drift b(x)."""
    co = CoefficientField(
        dim=d, q=lambda x: np.broadcast_to(np.eye(d), (x.shape[0], d, d)).copy(), b=b,
        c=lambda x: np.zeros(x.shape[0]), q_norm=np.eye(d), b_norm=np.abs(np.asarray(b_norm, float)),
        c_norm=0.0, c_low=0.0, constant=False, diagonal_q=True, name=name)
    return OperatorSpec(co, ZeroKernel(d), name)


def formal_adjoint(op: OperatorSpec, div_b: Callable, div_norm: float, div_low: float = 0.0) -> OperatorSpec:
    """Lebesgue adjoint of a constant-Q, jump-free operator: drift -b, killing c + div b.

    The killing must stay nonnegative, so div b >= 0 is required.
    """
    if not isinstance(op.kernel, ZeroKernel):
        raise ContractError("formal adjoint is only built for operators without jumps")
    co = op.coeffs
    b, c = co.b, co.c
    probe = np.zeros((1, co.dim))
    if np.any(div_b(probe) < 0) or div_low < 0:
        raise ContractError("div b must be nonnegative for the adjoint killing rate")
    new = replace(co, b=lambda x: -b(x), c=lambda x: c(x) + div_b(x), c_norm=co.c_norm + div_norm,
                  c_low=co.c_low + div_low, constant=False, name=co.name + "-adjoint")
    return replace(op, coeffs=new, name=op.name + "-adjoint")


PRESETS = {
    "laplacian": laplacian,
    "drifted": drifted,
    "anisotropic": anisotropic,
    "two-point-jump": two_point_jump,
    "truncated-stable": truncated_stable,
}
