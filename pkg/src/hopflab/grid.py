"""Monotone lattice discretization of A on a domain with Dirichlet exterior data.

Interior nodes live on h Z^d.  Second differences use Shortley-Weller
boundary points when Q is diagonal, so the exterior nodes then sit exactly
on the boundary; jumps are spread over lattice nodes by multilinear weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

from .geometry import delta_D
from .operator import ContractError, OperatorSpec

MONO_TOL = 1e-12


class MonotonicityError(RuntimeError):
    pass


class IrreducibilityError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass
class Grid:
    h: float
    dim: int
    nodes: np.ndarray          # interior coordinates (N, d)
    ext_nodes: np.ndarray      # exterior coordinates (E, d)
    ext_on_boundary: np.ndarray  # bool (E,), node lies on the boundary
    domain: object

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def cell(self) -> float:
        return self.h ** self.dim

    def nearest(self, x) -> int:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return int(np.argmin(np.sum((self.nodes - x) ** 2, axis=1)))

    def delta(self) -> np.ndarray:
        return delta_D(self.domain, self.nodes)


@dataclass
class DiscreteOperator:
    grid: Grid
    A_int: sp.csr_matrix
    B_ext: sp.csr_matrix
    c_vec: np.ndarray
    op: OperatorSpec
    min_offdiag: float
    leaky: np.ndarray = field(repr=False, default=None)
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    def without_killing(self) -> "DiscreteOperator":
        return replace(self, c_vec=np.zeros_like(self.c_vec), op=self.op.without_killing(), _lu={})

    def with_killing(self, c_vec: np.ndarray) -> "DiscreteOperator":
        c_vec = np.asarray(c_vec, dtype=float)
        if np.any(c_vec < 0):
            raise ContractError("killing vector must be nonnegative")
        return replace(self, c_vec=c_vec, _lu={})

    def scaled(self, s: float) -> "DiscreteOperator":
        return replace(self, A_int=(s * self.A_int).tocsr(), B_ext=(s * self.B_ext).tocsr(),
                       c_vec=s * self.c_vec, _lu={})

    def transpose_adjoint(self) -> "DiscreteOperator":
        """Adjoint with respect to the h^d-weighted pairing: the matrix transpose."""
        return replace(self, A_int=self.A_int.T.tocsr(), B_ext=sp.csr_matrix((self.n, 0)), _lu={})

    def apply(self, u: np.ndarray, g: Optional[np.ndarray] = None) -> np.ndarray:
        """(A - c) u at interior nodes with exterior data g."""
        out = self.A_int @ u - self.c_vec * u
        if g is not None and self.B_ext.shape[1]:
            out = out + self.B_ext @ g
        return out

    def apply_A(self, u, g=None) -> np.ndarray:
        out = self.A_int @ u
        if g is not None and self.B_ext.shape[1]:
            out = out + self.B_ext @ g
        return out

    def system(self, alpha: float) -> sp.csc_matrix:
        return (sp.diags(alpha + self.c_vec) - self.A_int).tocsc()

    def lu(self, alpha: float):
        key = float(alpha)
        if key not in self._lu:
            if key == 0.0:
                certify_alpha_zero(self)
            self._lu[key] = splu(self.system(key))
        return self._lu[key]


# ---------------------------------------------------------------------------
# assembly helpers

def _lattice_keys(idx: np.ndarray, offset: int, base: int) -> np.ndarray:
    k = np.zeros(idx.shape[0], dtype=np.int64)
    for j in range(idx.shape[1]):
        k = k * base + (idx[:, j] + offset)
    return k


class _ExteriorTable:
    """Deduplicating store of exterior coordinates."""

    def __init__(self, h: float):
        self.h = h
        self.keys: dict = {}
        self.coords: list = []

    def add(self, pts: np.ndarray) -> np.ndarray:
        q = np.round(pts / self.h * 2 ** 20).astype(np.int64)
        uniq, first, inv = np.unique(q, axis=0, return_index=True, return_inverse=True)
        ids = np.empty(uniq.shape[0], dtype=np.int64)
        for u, (row, i) in enumerate(zip(map(tuple, uniq), first)):
            j = self.keys.get(row)
            if j is None:
                j = len(self.coords)
                self.keys[row] = j
                self.coords.append(pts[i])
            ids[u] = j
        return ids[np.asarray(inv).ravel()]


def _crossing(dom, x: np.ndarray, direction: np.ndarray, h: float) -> np.ndarray:
    """Fraction theta in (0, 1] with x + theta h e on the boundary (bisection)."""
    lo = np.zeros(x.shape[0])
    hi = np.ones(x.shape[0])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        inside = dom.sdf(x + (mid * h)[:, None] * direction) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return hi


def assemble(op: OperatorSpec, dom, h: float, quad_level: int = 0, boundary_fit: bool = True):
    """Build the grid and the monotone matrices [A_int | B_ext].

    Raises MonotonicityError when a negative off-diagonal appears.
    """
    d = op.dim
    if dom.dim != d:
        raise ContractError("operator and domain dimensions differ")
    lo, hi = dom.bbox
    ilo = np.floor(np.asarray(lo) / h).astype(int) - 1
    ihi = np.ceil(np.asarray(hi) / h).astype(int) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(ilo, ihi)]
    idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    pts = idx * h
    sdf = dom.sdf(pts)
    inside = sdf < -1e-12 * h
    idx, pts = idx[inside], pts[inside]
    N = idx.shape[0]
    if N == 0:
        raise ContractError("no interior nodes; decrease h")

    kern = op.kernel
    reach = int(np.ceil(kern.support_radius / h)) + 2
    offset = -int(min(ilo.min(), 0)) + reach + 2
    base = int(max(ihi.max(), 0) + offset + reach + 4)
    keys = _lattice_keys(idx, offset, base)
    order = np.argsort(keys)
    skeys = keys[order]

    def lookup(cand_idx):
        k = _lattice_keys(cand_idx, offset, base)
        pos = np.clip(np.searchsorted(skeys, k), 0, N - 1)
        hit = skeys[pos] == k
        return np.where(hit, order[pos], -1)

    ext = _ExteriorTable(h)
    flag_ids, flag_vals = [], []
    rows_i, cols_i, vals_i = [], [], []
    rows_e, cols_e, vals_e = [], [], []
    rows_all = np.arange(N)

    Q = op.q_eff(pts)
    b = op.coeffs.b(pts) - kern.compensator()[None, :]
    diag_q = bool(op.coeffs.diagonal_q) and np.allclose(kern.diffusion_correction(),
                                                       np.diag(np.diag(kern.diffusion_correction())))
    fit = boundary_fit and diag_q

    def couple(rows, target_idx, target_pts, weight, boundary_flag):
        j = lookup(target_idx)
        m_int = j >= 0
        rows_i.append(rows[m_int]); cols_i.append(j[m_int]); vals_i.append(weight[m_int])
        if np.any(~m_int):
            e = ext.add(target_pts[~m_int])
            flag_ids.append(e); flag_vals.append(boundary_flag[~m_int])
            rows_e.append(rows[~m_int]); cols_e.append(e); vals_e.append(weight[~m_int])

    for i in range(d):
        e_i = np.zeros(d, dtype=int)
        e_i[i] = 1
        qii = Q[:, i, i]
        # cross-term corrections to the axis weights
        cross = np.zeros(N)
        for j in range(d):
            if j != i:
                cross += np.abs(Q[:, i, j])
        if fit:
            hp = np.full(N, h)
            hm = np.full(N, h)
            tp = np.ones(N)
            tm = np.ones(N)
            jp = lookup(idx + e_i)
            jm = lookup(idx - e_i)
            if np.any(jp < 0):
                sel = jp < 0
                tp[sel] = _crossing(dom, pts[sel], e_i.astype(float), h)
            if np.any(jm < 0):
                sel = jm < 0
                tm[sel] = _crossing(dom, pts[sel], -e_i.astype(float), h)
            hp, hm = tp * h, tm * h
            w_p = qii / (hp * (hp + hm)) + np.maximum(b[:, i], 0) / hp
            w_m = qii / (hm * (hp + hm)) + np.maximum(-b[:, i], 0) / hm
            for sgn, jj, hh, w in ((1, jp, hp, w_p), (-1, jm, hm, w_m)):
                m_int = jj >= 0
                rows_i.append(rows_all[m_int]); cols_i.append(jj[m_int]); vals_i.append(w[m_int])
                if np.any(~m_int):
                    tgt = pts[~m_int] + sgn * hh[~m_int, None] * e_i[None, :]
                    e = ext.add(tgt)
                    flag_ids.append(e); flag_vals.append(np.ones(e.size, dtype=bool))
                    rows_e.append(rows_all[~m_int]); cols_e.append(e); vals_e.append(w[~m_int])
        else:
            w_axis = 0.5 * (qii - cross) / h ** 2
            w_p = w_axis + np.maximum(b[:, i], 0) / h
            w_m = w_axis + np.maximum(-b[:, i], 0) / h
            for sgn, w in ((1, w_p), (-1, w_m)):
                tgt_idx = idx + sgn * e_i
                tgt = tgt_idx * h
                couple(rows_all, tgt_idx, tgt, w, np.abs(dom.sdf(tgt)) <= 1e-12)
    if not fit:
        for i in range(d):
            for j in range(i + 1, d):
                qij = Q[:, i, j]
                if np.all(qij == 0):
                    continue
                w = 0.5 * np.abs(qij) / h ** 2
                e_i = np.zeros(d, dtype=int); e_i[i] = 1
                e_j = np.zeros(d, dtype=int); e_j[j] = 1
                pos = qij >= 0
                for s_i, s_j in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
                    use = pos if s_i == s_j else ~pos
                    if not np.any(use):
                        continue
                    tgt_idx = idx[use] + s_i * e_i + s_j * e_j
                    tgt = tgt_idx * h
                    couple(rows_all[use], tgt_idx, tgt, w[use], np.abs(dom.sdf(tgt)) <= 1e-12)

    # jumps: quadrature nodes snapped by multilinear weights
    if kern.intensity_bound > 0:
        ys, ws = kern.nodes(quad_level)
        rate = kern.intensity(pts) / kern.intensity_bound
        corners = np.stack(np.meshgrid(*([[0, 1]] * d), indexing="ij"), axis=-1).reshape(-1, d)
        for y, wy in zip(ys, ws):
            tgt = pts + y[None, :]
            base_idx = np.floor(tgt / h + 1e-12).astype(int)
            frac = tgt / h - base_idx
            frac = np.where(np.abs(frac) < 1e-12, 0.0, frac)
            for cvec in corners:
                wgt = np.prod(np.where(cvec[None, :] == 1, frac, 1 - frac), axis=1)
                keep = wgt > 0
                if not np.any(keep):
                    continue
                cidx = base_idx[keep] + cvec[None, :]
                cpts = cidx * h
                couple(rows_all[keep], cidx, cpts, wy * rate[keep] * wgt[keep],
                       np.abs(dom.sdf(cpts)) <= 1e-12)

    E = len(ext.coords)
    ri = np.concatenate(rows_i) if rows_i else np.zeros(0, int)
    ci = np.concatenate(cols_i) if cols_i else np.zeros(0, int)
    vi = np.concatenate(vals_i) if vals_i else np.zeros(0)
    A_off = sp.csr_matrix((vi, (ri, ci)), shape=(N, N))
    if rows_e:
        B = sp.csr_matrix((np.concatenate(vals_e), (np.concatenate(rows_e), np.concatenate(cols_e))),
                          shape=(N, E))
    else:
        B = sp.csr_matrix((N, 0))
    # self-couplings (a jump landing on its own node) cancel out of the generator
    self_w = A_off.diagonal()
    A_off = A_off - sp.diags(self_w)
    A_off.eliminate_zeros()
    off_min = float(min(A_off.data.min() if A_off.nnz else 0.0, B.data.min() if B.nnz else 0.0))
    if off_min < -MONO_TOL:
        bad = int(np.argmin(np.minimum(np.asarray(A_off.min(axis=1).todense()).ravel(),
                                       np.asarray(B.min(axis=1).todense()).ravel() if E else 0.0)))
        raise MonotonicityError(
            f"negative off-diagonal {off_min:.3e} at node {pts[bad].tolist()}; "
            "decrease h or use a diagonally dominant diffusion matrix")
    row_out = np.asarray(A_off.sum(axis=1)).ravel() + (np.asarray(B.sum(axis=1)).ravel() if E else 0.0)
    A_int = (A_off - sp.diags(row_out)).tocsr()
    A_int.sort_indices()
    ext_coords = np.array(ext.coords).reshape(E, d)
    flags = np.zeros(E, dtype=bool)
    if flag_ids:
        np.logical_or.at(flags, np.concatenate(flag_ids), np.concatenate(flag_vals))
    grid = Grid(h, d, pts, ext_coords, flags, dom)
    c_vec = np.asarray(op.coeffs.c(pts), dtype=float)
    leaky = (np.asarray(B.sum(axis=1)).ravel() > 0) if E else np.zeros(N, bool)
    return grid, DiscreteOperator(grid, A_int, B.tocsr(), c_vec, op, off_min, leaky)


# ---------------------------------------------------------------------------
# certificates

def certify_alpha_zero(disc: DiscreteOperator) -> None:
    """Every node must reach a row with strictly negative row sum."""
    leak = disc.leaky | (disc.c_vec > 0)
    if not np.any(leak):
        raise ContractError("no leaking row: the alpha = 0 system is singular")
    N = disc.n
    G = disc.A_int.copy()
    G.setdiag(0)
    G.eliminate_zeros()
    # reverse edges, add a super-node pointing at every leaky node
    pattern = (G != 0).T.tocoo()
    rows = np.concatenate([pattern.row, np.full(int(leak.sum()), N)])
    cols = np.concatenate([pattern.col, np.flatnonzero(leak)])
    R = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(N + 1, N + 1))
    reached = csgraph.breadth_first_order(R, N, directed=True, return_predecessors=False)
    if reached.size < N + 1:
        raise ContractError(f"{N + 1 - reached.size} nodes cannot reach the exterior or killing")


def irreducible(disc: DiscreteOperator) -> bool:
    G = disc.A_int.copy()
    G.setdiag(0)
    G.eliminate_zeros()
    n_comp, _ = csgraph.connected_components(G != 0, directed=True, connection="strong")
    return n_comp == 1


# ---------------------------------------------------------------------------
# linear maps

def resolvent(disc: DiscreteOperator, alpha: float, f: Optional[np.ndarray] = None,
              g: Optional[np.ndarray] = None) -> np.ndarray:
    """Solve (alpha - A_int + c) u = f + B_ext g."""
    if alpha < 0:
        raise ContractError("alpha must be nonnegative")
    rhs = np.zeros(disc.n) if f is None else np.array(f, dtype=float)
    if g is not None and disc.B_ext.shape[1]:
        rhs = rhs + disc.B_ext @ g
    if not np.any(rhs):
        return np.zeros(disc.n)
    return disc.lu(alpha).solve(rhs)


def resolvent_kernel(disc: DiscreteOperator, alpha: float, check: bool = True) -> np.ndarray:
    """Dense density r(x, y) with R f(x) = sum_y r(x, y) f(y) h^d."""
    K = disc.lu(alpha).solve(np.eye(disc.n)) / disc.grid.cell
    if check and np.min(K) <= 0:
        raise IrreducibilityError(f"resolvent kernel has a nonpositive entry ({np.min(K):.3e})")
    return K


def solve_residual(disc: DiscreteOperator, alpha: float, u: np.ndarray, rhs: np.ndarray) -> float:
    r = disc.system(alpha) @ u - rhs
    return float(np.max(np.abs(r)) / max(np.max(np.abs(rhs)), 1e-300))


def semigroup(disc: DiscreteOperator, t: float, f: np.ndarray, g: Optional[np.ndarray] = None,
              max_rate_time: float = 500.0) -> np.ndarray:
    """Uniformized exponential of the killed generator with exterior data frozen."""
    v = np.array(f, dtype=float)
    if t == 0:
        return v
    N = disc.n
    gvec = np.zeros(disc.B_ext.shape[1]) if g is None else np.asarray(g, dtype=float)
    drive = disc.B_ext @ gvec if disc.B_ext.shape[1] else np.zeros(N)
    diag = disc.A_int.diagonal() - disc.c_vec
    lam = float(np.max(-diag)) if N else 0.0
    if lam <= 0:
        return v
    P = (sp.eye(N) + (disc.A_int - sp.diags(disc.c_vec)) / lam).tocsr()
    d_drive = drive / lam
    n_sub = int(np.ceil(lam * t / max_rate_time))
    tau = t / n_sub
    mu = lam * tau
    kmax = int(mu + 12 * np.sqrt(mu) + 30)
    logw = -mu + np.arange(kmax + 1) * np.log(mu) - np.cumsum(np.r_[0.0, np.log(np.arange(1, kmax + 1))])
    weights = np.exp(logw)
    for _ in range(n_sub):
        acc = weights[0] * v
        cur = v
        for k in range(1, kmax + 1):
            cur = P @ cur + d_drive
            acc = acc + weights[k] * cur
        v = acc
    return v


@dataclass
class EigenPair:
    lam: float
    phi: np.ndarray
    residual: float
    iterations: int
    rho: float


def principal_eigenpair(disc: DiscreteOperator, tol: float = 1e-10, max_iter: int = 10_000) -> EigenPair:
    """Power iteration on f -> R_1 f; lambda = 1/rho - 1, phi normalized to sup 1."""
    if not irreducible(disc):
        raise IrreducibilityError("interior graph is not strongly connected")
    lu = disc.lu(1.0)
    x = np.ones(disc.n)
    mu_old = 0.0
    for it in range(1, max_iter + 1):
        y = lu.solve(x)
        mu = float(np.max(y))
        y /= mu
        dx = float(np.max(np.abs(y - x)))
        x = y
        if abs(mu - mu_old) < tol * mu and dx < 10 * tol:
            break
        mu_old = mu
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")
    if np.min(x) <= 0:
        raise IrreducibilityError("principal eigenvector has nonpositive entries")
    res = float(np.max(np.abs(lu.solve(x) - mu * x)))
    return EigenPair(1.0 / mu - 1.0, x, res, it, mu)


@dataclass
class Minorization:
    x0: int
    alpha: float
    psi_bar: np.ndarray
    phi_bar: np.ndarray
    psi: np.ndarray
    chi: np.ndarray
    kernel: np.ndarray = field(repr=False)

    def gap(self) -> float:
        """min over entries of r - psi_bar phi_bar^T."""
        return float(np.min(self.kernel - np.outer(self.psi_bar, self.phi_bar)))


def minorization(disc: DiscreteOperator, alpha: float, x0: Optional[int] = None) -> Minorization:
    """Rank-one lower bound r_alpha(x, y) >= psi_bar(x) phi_bar(y).

    Smoothing once more with R_{alpha+1} gives R_alpha f >= psi <chi, f>.
    """
    K = resolvent_kernel(disc, alpha)
    if x0 is None:
        x0 = disc.grid.nearest(disc.grid.nodes.mean(axis=0))
    phi_bar = K[x0].copy()
    psi_bar = np.min(K / phi_bar[None, :], axis=1)
    if not np.any(psi_bar > 0):
        raise IrreducibilityError("minorizing function vanishes identically")
    lu = disc.lu(alpha + 1.0)
    psi = lu.solve(psi_bar)
    chi = lu.solve(phi_bar, trans="T")
    return Minorization(int(x0), float(alpha), psi_bar, phi_bar, psi, chi, K)


def gauge_grid(disc: DiscreteOperator) -> np.ndarray:
    """w solving (-A + c) w = c with zero exterior data."""
    if not np.any(disc.c_vec > 0):
        return np.zeros(disc.n)
    return disc.lu(0.0).solve(disc.c_vec.copy())


def duality_residual(disc: DiscreteOperator, disc_hat: DiscreteOperator, alpha: float,
                     alpha_hat: Optional[float] = None, trials: int = 8, seed: int = 0) -> float:
    """max over random f, g >= 0 of |<R_hat f, g> - <f, R g>| / |<f, R g>|."""
    rng = np.random.default_rng(seed)
    alpha_hat = alpha if alpha_hat is None else alpha_hat
    worst = 0.0
    for _ in range(trials):
        f = rng.random(disc.n)
        g = rng.random(disc.n)
        lhs = np.dot(resolvent(disc_hat, alpha_hat, f), g) * disc.grid.cell
        rhs = np.dot(f, resolvent(disc, alpha, g)) * disc.grid.cell
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return worst


def export_coo(mat: sp.spmatrix, path) -> None:
    """Coordinate text format: header 'rows cols nnz', then 'i j value' per line."""
    coo = mat.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v!r}\n")
