"""Bounded domains and the geometric queries used by the maximum-principle checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .operator import AtomicKernel, ContractError, ZeroKernel, as_points

BOUNDARY_TOL = 1e-9


class DomainBase:
    """Shared behaviour: everything is expressed through the signed distance."""

    dim: int

    def sdf(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def is_empty(self) -> bool:
        return False

    def contains(self, x) -> np.ndarray:
        return self.sdf(as_points(x, self.dim)) < 0

    def contains_closed(self, x, tol: float = BOUNDARY_TOL) -> np.ndarray:
        return self.sdf(as_points(x, self.dim)) <= tol

    def anchor(self) -> np.ndarray:
        lo, hi = self.bbox
        return 0.5 * (np.asarray(lo) + np.asarray(hi))

    def diameter(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))

    def to_dict(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(DomainBase):
    center: tuple
    radius: float

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def is_empty(self) -> bool:
        return self.radius <= 0

    @property
    def bbox(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def sdf(self, x):
        x = as_points(x, self.dim)
        return np.linalg.norm(x - np.asarray(self.center), axis=1) - self.radius

    def anchor(self):
        return np.asarray(self.center, dtype=float)

    def to_dict(self):
        return {"variant": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box(DomainBase):
    lo: tuple
    hi: tuple

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def is_empty(self) -> bool:
        return bool(np.any(np.asarray(self.hi) <= np.asarray(self.lo)))

    @property
    def bbox(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def sdf(self, x):
        x = as_points(x, self.dim)
        lo, hi = self.bbox
        q = np.maximum(lo - x, x - hi)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside

    def to_dict(self):
        return {"variant": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Annulus(DomainBase):
    center: tuple
    r_in: float
    r_out: float

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def is_empty(self) -> bool:
        return self.r_out <= max(self.r_in, 0.0)

    @property
    def bbox(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.r_out, c + self.r_out

    def sdf(self, x):
        x = as_points(x, self.dim)
        r = np.linalg.norm(x - np.asarray(self.center), axis=1)
        return np.maximum(r - self.r_out, self.r_in - r)

    def anchor(self):
        c = np.asarray(self.center, dtype=float).copy()
        c[0] += 0.5 * (self.r_in + self.r_out)
        return c

    def to_dict(self):
        return {"variant": "annulus", "center": list(self.center), "r_in": self.r_in, "r_out": self.r_out}


# Named signed-distance functions.  Each is a max of exact distance functions,
# so it equals -dist(x, complement) inside the domain.

def _twin_cusp(x):
    r = np.linalg.norm(x, axis=1)
    d1 = 1.0 - np.linalg.norm(x - np.array([1.0, 0.0]), axis=1)
    d2 = 1.0 - np.linalg.norm(x + np.array([1.0, 0.0]), axis=1)
    return np.maximum(r - 2.2, np.maximum(d1, d2))


def _notched_disk(x):
    r = np.linalg.norm(x, axis=1)
    # signed distance of the closed first quadrant
    inside_q = np.all(x >= 0, axis=1)
    sdf_q = np.where(inside_q, -np.min(x, axis=1), np.linalg.norm(x - np.maximum(x, 0.0), axis=1))
    return np.maximum(r - 2.0, -sdf_q)


def _inward_cusp(x):
    r = np.linalg.norm(x, axis=1)
    up = 1.0 - np.linalg.norm(x - np.array([0.0, 1.0]), axis=1)
    dn = 1.0 - np.linalg.norm(x + np.array([0.0, 1.0]), axis=1)
    horn = np.maximum(-x[:, 0], np.maximum(up, dn))
    return np.maximum(r - 1.5, -horn)


@dataclass(frozen=True)
class ImplicitShape:
    sdf: Callable[[np.ndarray], np.ndarray]
    bbox: tuple
    dim: int = 2


IMPLICIT_REGISTRY = {
    "twin-cusp": ImplicitShape(_twin_cusp, ((-2.2, -2.2), (2.2, 2.2))),
    "notched-disk": ImplicitShape(_notched_disk, ((-2.0, -2.0), (2.0, 2.0))),
    "inward-cusp": ImplicitShape(_inward_cusp, ((-1.5, -1.5), (1.5, 1.5))),
}


@dataclass(frozen=True)
class Implicit(DomainBase):
    """Registry domain; ``offset`` shifts the distance (used for shrinking)."""

    name: str
    offset: float = 0.0

    def _shape(self) -> ImplicitShape:
        try:
            return IMPLICIT_REGISTRY[self.name]
        except KeyError:
            raise ContractError(f"unknown implicit domain {self.name!r}; known: {sorted(IMPLICIT_REGISTRY)}")

    @property
    def dim(self) -> int:
        return self._shape().dim

    @property
    def bbox(self):
        lo, hi = self._shape().bbox
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    def sdf(self, x):
        return self._shape().sdf(as_points(x, self.dim)) + self.offset

    @property
    def is_empty(self) -> bool:
        lo, hi = self.bbox
        axes = [np.linspace(l, h, 201) for l, h in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return bool(np.min(self.sdf(pts)) >= 0)

    def anchor(self):
        lo, hi = self.bbox
        axes = [np.linspace(l, h, 81) for l, h in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return pts[np.argmin(self.sdf(pts))]

    def to_dict(self):
        return {"variant": "implicit", "name": self.name, "offset": self.offset}


DomainSpec = DomainBase


def domain_from_dict(data: dict) -> DomainBase:
    kind = data.get("variant")
    if kind == "ball":
        return Ball(tuple(float(v) for v in data["center"]), float(data["radius"]))
    if kind == "box":
        return Box(tuple(float(v) for v in data["lo"]), tuple(float(v) for v in data["hi"]))
    if kind == "annulus":
        return Annulus(tuple(float(v) for v in data["center"]), float(data["r_in"]), float(data["r_out"]))
    if kind == "implicit":
        dom = Implicit(str(data["name"]), float(data.get("offset", 0.0)))
        dom._shape()
        return dom
    raise ContractError(f"unknown domain variant {kind!r}; expected ball, box, annulus or implicit")


# ---------------------------------------------------------------------------
# queries

def delta_D(dom: DomainBase, x) -> np.ndarray:
    """dist(x, D^c); zero outside D."""
    return np.maximum(-dom.sdf(as_points(x, dom.dim)), 0.0)


def shrink(dom: DomainBase, r: float) -> DomainBase:
    """D_r = {x in D : dist(x, boundary) > r}."""
    if r < 0:
        raise ContractError("shrink radius must be nonnegative")
    if isinstance(dom, Ball):
        return Ball(dom.center, dom.radius - r)
    if isinstance(dom, Box):
        return Box(tuple(np.asarray(dom.lo) + r), tuple(np.asarray(dom.hi) - r))
    if isinstance(dom, Annulus):
        return Annulus(dom.center, dom.r_in + r, dom.r_out - r)
    if isinstance(dom, Implicit):
        return Implicit(dom.name, dom.offset + r)
    raise ContractError(f"cannot shrink {type(dom).__name__}")


def annuli(ybar, r: float):
    """The open annuli V_* = B(ybar,r)\\B(ybar,r/2) and V^* = B(ybar,3r/2)\\B(ybar,r/2)."""
    c = tuple(float(v) for v in np.atleast_1d(ybar))
    return Annulus(c, r / 2.0, r), Annulus(c, r / 2.0, 1.5 * r)


def _directions(d: int, n: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        th = np.arange(n) * 2 * np.pi / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    th = np.pi * (1 + 5 ** 0.5) * k
    rho = np.sqrt(1 - z ** 2)
    return np.stack([rho * np.cos(th), rho * np.sin(th), z], axis=1)


def _ball_inside(dom, centers, radii, n_check: int, outside: bool = False) -> np.ndarray:
    """Certify B(center, radius) within closure(D) (or within closure(D^c)).

    The centre test uses the distance oracle; a ring of boundary samples is
    checked as well so the certification density is explicit.
    """
    sgn = -1.0 if outside else 1.0
    ok = sgn * dom.sdf(centers) <= -radii * (1 - 1e-9) + 1e-12
    ring = _directions(dom.dim, n_check)
    pts = centers[:, None, :] + radii[:, None, None] * ring[None, :, :]
    vals = sgn * dom.sdf(pts.reshape(-1, dom.dim)).reshape(centers.shape[0], -1)
    return ok & np.all(vals <= 1e-9, axis=1)


def _analytic_normal(dom, xh: np.ndarray) -> Optional[np.ndarray]:
    if isinstance(dom, Ball):
        v = xh - np.asarray(dom.center)
        return v / np.linalg.norm(v)
    if isinstance(dom, Annulus):
        v = xh - np.asarray(dom.center)
        v = v / np.linalg.norm(v)
        r = np.linalg.norm(xh - np.asarray(dom.center))
        return v if abs(r - dom.r_out) <= abs(r - dom.r_in) else -v
    if isinstance(dom, Box):
        lo, hi = dom.bbox
        active = []
        for i in range(dom.dim):
            if abs(xh[i] - lo[i]) <= BOUNDARY_TOL:
                active.append((i, -1.0))
            if abs(xh[i] - hi[i]) <= BOUNDARY_TOL:
                active.append((i, 1.0))
        if len(active) != 1:
            return None
        n = np.zeros(dom.dim)
        n[active[0][0]] = active[0][1]
        return n
    return None


def _check_boundary(dom, xh):
    xh = np.asarray(xh, dtype=float).reshape(dom.dim)
    if abs(float(dom.sdf(xh[None, :])[0])) > 1e-7:
        raise ContractError("point is not on the boundary")
    return xh


@dataclass
class BallSearch:
    radius: float
    normals: list
    flag: str = ""
    density: int = 0


def _direction_search(dom, xh, n_dirs: int, n_check: int, r_min: float, outside: bool) -> list:
    dirs = _directions(dom.dim, n_dirs)
    hits = []
    for n in dirs:
        sgn = 1.0 if outside else -1.0

        def fits(rad):
            return _ball_inside(dom, (xh + sgn * rad * n)[None, :], np.array([rad]), n_check, outside)[0]

        if not fits(r_min):
            continue
        lo, hi = r_min, 1.0
        if fits(hi):
            hits.append((1.0, n))
            continue
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if fits(mid):
                lo = mid
            else:
                hi = mid
        hits.append((lo, n))
    return hits


def interior_balls(dom, xh, n_dirs: int = 256, n_check: int = 256, r_min: float = 1e-4) -> BallSearch:
    """Largest tangent interior ball (radius <= 1) at a boundary point, with its normals."""
    xh = _check_boundary(dom, xh)
    if isinstance(dom, Ball):
        return BallSearch(min(dom.radius, 1.0), [_analytic_normal(dom, xh)], density=0)
    if isinstance(dom, Annulus):
        return BallSearch(min(0.5 * (dom.r_out - dom.r_in), 1.0), [_analytic_normal(dom, xh)], density=0)
    if isinstance(dom, Box):
        n = _analytic_normal(dom, xh)
        if n is None:
            return BallSearch(0.0, [], "no tangent interior ball (edge or corner)")
        lo, hi = dom.bbox
        axis = int(np.argmax(np.abs(n)))
        others = [min(xh[j] - lo[j], hi[j] - xh[j]) for j in range(dom.dim) if j != axis]
        rad = min([1.0, 0.5 * (hi[axis] - lo[axis])] + others)
        if rad <= 0:
            return BallSearch(0.0, [], "no tangent interior ball (edge or corner)")
        return BallSearch(float(rad), [n])
    hits = _direction_search(dom, xh, n_dirs, n_check, r_min, outside=False)
    if not hits:
        return BallSearch(0.0, [], f"no interior ball of radius >= {r_min:g} found", n_check)
    best = max(h[0] for h in hits)
    return BallSearch(best, [h[1] for h in hits], density=n_check)


def interior_ball_radius(dom, xh, **kw) -> float:
    return interior_balls(dom, xh, **kw).radius


def generalized_normals(dom, xh, resolution: int = 256) -> np.ndarray:
    """Outward normals (xh - y)/r over the tangent interior balls found at xh."""
    found = interior_balls(dom, xh, n_dirs=resolution)
    if not found.normals:
        return np.zeros((0, dom.dim))
    normals = np.array(found.normals, dtype=float)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return normals


def exterior_ball(dom, xh, resolution: int = 256, r_min: float = 1e-4):
    """A tangent ball in the complement at xh, or None when none is certified."""
    xh = _check_boundary(dom, xh)
    if isinstance(dom, Ball):
        n = _analytic_normal(dom, xh)
        return xh + n, 1.0
    hits = _direction_search(dom, xh, resolution, resolution, r_min, outside=True)
    if not hits:
        return None
    rad, n = max(hits, key=lambda h: h[0])
    return xh + rad * n, float(rad)


def reachable_set_contains(dom, kernel, z) -> np.ndarray:
    """Membership of z in S(D) union closure(D); over-approximate for density kernels."""
    pts = as_points(z, dom.dim)
    closed = dom.contains_closed(pts)
    if isinstance(kernel, ZeroKernel) or kernel.intensity_bound == 0.0:
        return closed
    if isinstance(kernel, AtomicKernel):
        hit = np.zeros(pts.shape[0], dtype=bool)
        for y in kernel.jumps:
            hit |= dom.contains(pts - y)
        return closed | hit
    return closed | (dom.sdf(pts) <= kernel.support_radius)


@dataclass
class NormalDerivative:
    value: float
    hs: np.ndarray
    quotients: np.ndarray


def lower_normal_derivative(u: Callable[[np.ndarray], np.ndarray], xh, n, h_min: float, h_max: float,
                            dom: Optional[DomainBase] = None) -> NormalDerivative:
    """min over h = h_max 2^-k >= h_min of (u(xh) - u(xh - h n))/h."""
    xh = np.asarray(xh, dtype=float).ravel()
    n = np.asarray(n, dtype=float).ravel()
    hs = []
    h = h_max
    while h >= h_min * (1 - 1e-12):
        hs.append(h)
        h *= 0.5
    hs = np.array(hs)
    pts = xh[None, :] - hs[:, None] * n[None, :]
    if dom is not None and hs.size:
        keep = dom.contains(pts)
        hs, pts = hs[keep], pts[keep]
    if hs.size == 0:
        raise ContractError("no admissible step h in [h_min, h_max]")
    u0 = float(np.asarray(u(xh[None, :])).ravel()[0])
    q = (u0 - np.asarray(u(pts), dtype=float).ravel()) / hs
    return NormalDerivative(float(q.min()), hs, q)
