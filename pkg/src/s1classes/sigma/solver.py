"""Discrete variational estimates of the singular energy.

The quantity inf_phi sum_cells h^2 |g - grad phi| (g the discrete vorticity)
is a total-variation type problem. It is solved by a primal-dual splitting
(ADMM with over-relaxation): the residual r = q - D phi is duplicated into a
copy carrying the per-node Euclidean norm and a copy carrying a per-edge
bound |r_e| <= max(cap, |q_e|). The bound keeps the optimal phase jump spread
over at least two edges, so the residual stays a principal-value increment.
The phi-update is a graph-Laplacian solve with a factorisation computed once.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .. import kernels
from ..errors import NumericError, ParameterError
from ..fields import S1Field
from ..geometry import Grid


@dataclass
class SolverSettings:
    rho: float = 0.1
    relaxation: float = 1.6
    cap: float = math.pi
    max_iters: int = 3000
    tol: float = 1e-4  # stop when primal - dual bound <= tol * |Omega|
    check_every: int = 25
    time_limit: float | None = None  # seconds

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class VariationalResult:
    value: float
    lower_bound: float
    iterations: int
    converged: bool
    phi: np.ndarray = field(repr=False)
    res_x: np.ndarray = field(repr=False)
    res_y: np.ndarray = field(repr=False)
    seconds: float = 0.0
    backend: str = kernels.BACKEND

    @property
    def gap(self) -> float:
        return max(self.value - self.lower_bound, 0.0)

    def __float__(self):
        return self.value

    def to_json(self) -> dict:
        return {"value": self.value, "lower_bound": self.lower_bound, "gap": self.gap,
                "iterations": self.iterations, "converged": self.converged,
                "seconds": self.seconds, "backend": self.backend}


class GridOperator:
    """Forward-difference operator on interior nodes.

    Slots are laid out as [x-slot of node 0..N-1 | y-slot of node 0..N-1]; the
    x-slot of a node is its edge to the right neighbour, the y-slot its edge to
    the upper neighbour. Slots whose edge is not valid are identically zero.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        m = grid.mask
        self.N = N = int(m.sum())
        idx = -np.ones(grid.shape, dtype=np.int64)
        idx[m] = np.arange(N)
        self.idx = idx
        ii, jj = np.nonzero(grid.edge_x)
        a, b = idx[ii, jj], idx[ii, jj + 1]
        ki, kj = np.nonzero(grid.edge_y)
        c, d = idx[ki, kj], idx[ki + 1, kj]
        rows = np.concatenate([a, a, N + c, N + c])
        cols = np.concatenate([a, b, c, d])
        vals = np.concatenate([-np.ones(len(a)), np.ones(len(a)), -np.ones(len(c)), np.ones(len(c))])
        self.D = sp.csr_matrix((vals, (rows, cols)), shape=(2 * N, N))
        self.DT = self.D.T.tocsr()
        self.valid = np.zeros(2 * N, dtype=bool)
        self.valid[a] = True
        self.valid[N + c] = True
        self._ex = (ii, jj, a)
        self._ey = (ki, kj, c)
        L = (self.DT @ self.D).tolil()
        adj = sp.csr_matrix((np.ones(len(a) + len(c)), (np.concatenate([a, c]), np.concatenate([b, d]))), shape=(N, N))
        ncomp, labels = connected_components(adj, directed=False)
        first = np.unique(labels, return_index=True)[1]
        for k in first:
            L[k, k] += 1.0  # pin one node per component
        self.ncomp = ncomp
        self._lu = spla.splu(L.tocsc(), permc_spec="MMD_AT_PLUS_A")

    def solve(self, rhs):
        return self._lu.solve(rhs)

    def stack(self, ex, ey):
        """Edge arrays (ny, nx-1), (ny-1, nx) -> slot vector."""
        q = np.zeros(2 * self.N)
        ii, jj, a = self._ex
        q[a] = ex[ii, jj]
        ki, kj, c = self._ey
        q[self.N + c] = ey[ki, kj]
        return q

    def unstack(self, q):
        g = self.grid
        ex = np.zeros((g.shape[0], g.shape[1] - 1))
        ey = np.zeros((g.shape[0] - 1, g.shape[1]))
        ii, jj, a = self._ex
        ex[ii, jj] = q[a]
        ki, kj, c = self._ey
        ey[ki, kj] = q[self.N + c]
        return ex, ey

    def to_nodes(self, phi):
        out = np.zeros(self.grid.shape)
        out[self.grid.mask] = phi
        return out


_OPERATORS: dict = {}


def grid_operator(grid: Grid) -> GridOperator:
    key = id(grid)
    op = _OPERATORS.get(key)
    if op is None or op.grid is not grid:
        if len(_OPERATORS) > 8:
            _OPERATORS.clear()
        op = GridOperator(grid)
        _OPERATORS[key] = op
    return op


def _node_norm_sum(v, N):
    return float(np.hypot(v[:N], v[N:]).sum())


def sigma_variational(u: S1Field, settings: SolverSettings | None = None) -> VariationalResult:
    """min over nodal phi of sum_n h |q_n - (D phi)_n|, q the lifted increments of u."""
    s = settings or SolverSettings()
    if s.rho <= 0 or not 0 < s.relaxation < 2 or s.cap <= 0:
        raise ParameterError("invalid solver settings")
    t0 = time.perf_counter()
    op = grid_operator(u.grid)
    h, N = u.grid.h, op.N
    q = op.stack(u.inc_x, u.inc_y)
    cap = np.where(op.valid, np.maximum(s.cap, np.abs(q)), 0.0)
    area = u.grid.n_interior * h * h
    phi = op.solve(op.DT @ q)  # least-squares warm start
    r = q - op.D @ phi
    z1 = r.copy()
    z2 = np.clip(r, -cap, cap)
    u1 = np.zeros(2 * N)
    u2 = np.zeros(2 * N)
    thresh = h / s.rho
    best = (math.inf, phi)
    lower = 0.0
    it = 0
    converged = False

    def certificate():
        chi = s.rho * (u1 + u2) / h
        chi = chi - op.D @ op.solve(op.DT @ chi)  # divergence-free part
        nx, ny = chi[:N], chi[N:]
        nrm = np.maximum(1.0, np.hypot(nx, ny))
        rem = chi - np.concatenate([nx / nrm, ny / nrm])
        return h * (float(chi @ q) - float((cap * np.abs(rem)).sum()))

    while True:
        val = h * _node_norm_sum(r, N)
        if val < best[0]:
            best = (val, phi.copy())
        if it % s.check_every == 0 or it >= s.max_iters:
            lower = max(lower, certificate())
            if best[0] - lower <= s.tol * area:
                converged = True
                break
        if it >= s.max_iters or (s.time_limit is not None and time.perf_counter() - t0 > s.time_limit):
            break
        rhs = op.DT @ (q - 0.5 * (z1 + z2) + 0.5 * (u1 + u2))
        phi = op.solve(rhs)
        r = q - op.D @ phi
        kernels.admm_step(r, z1, z2, u1, u2, cap, thresh, s.relaxation)
        it += 1
    value, phi = best
    if not np.isfinite(value):
        raise NumericError("variational solver produced a non-finite value")
    rx, ry = op.unstack(q - op.D @ phi)
    return VariationalResult(value, min(lower, value), it, converged, op.to_nodes(phi), rx, ry,
                             time.perf_counter() - t0, kernels.BACKEND)


@dataclass
class PInfimumResult:
    energy: float  # sum_cells h^2 |grad w|^p at the minimiser
    norm: float  # energy ** (1/p)
    p: float
    converged: bool
    phi: np.ndarray = field(repr=False)
    flags: tuple = ()

    def to_json(self) -> dict:
        return {"energy": self.energy, "norm": self.norm, "p": self.p, "converged": self.converged,
                "flags": list(self.flags)}


def p_infimum(u: S1Field, p: float, mu_steps: int = 4, max_iter: int = 400) -> PInfimumResult:
    """Minimise sum h^2 (|g - grad phi|^2 + mu^2)^{p/2} with mu = 10^-k h, k = 0..mu_steps-1."""
    from scipy.optimize import minimize

    from ..fields import _cell_sum, _core_correction

    if not 1 < p < 2:
        raise ParameterError("p must lie in (1, 2)")
    op = grid_operator(u.grid)
    h, N = u.grid.h, op.N
    q = op.stack(u.inc_x, u.inc_y)
    D, DT = op.D, op.DT
    phi = np.zeros(N)
    ok = True
    for k in range(mu_steps):
        eps2 = (10.0 ** (-k) * h * h) ** 2  # (mu h)^2 in increment units

        def fun(x, eps2=eps2):
            r = q - D @ x
            s2 = r[:N] ** 2 + r[N:] ** 2 + eps2
            w = s2 ** (p / 2 - 1)
            f = h ** (2 - p) * float((s2 * w).sum())
            g = -p * h ** (2 - p) * (DT @ (np.concatenate([w, w]) * r))
            return f, g

        res = minimize(fun, phi, jac=True, method="L-BFGS-B", options={"maxiter": max_iter, "gtol": 1e-10})
        phi = res.x
        ok = ok and (res.success or res.nit >= max_iter)
    # report with the same cell rule (and core model) as energy_lp
    rx, ry = op.unstack(q - D @ phi)
    energy = _cell_sum(u.grid, np.abs(rx), np.abs(ry), p)
    flags = []
    if u.cores:
        energy += _core_correction(u, p)
        flags.append("core-corrected")
    return PInfimumResult(energy, energy ** (1 / p), p, bool(ok), op.to_nodes(phi), tuple(flags))
