"""Geometric multigrid for the scalar Q2 Laplacian on the channel grids.

Coarse operators are Galerkin products ``P^T A P`` with the nested Q2
interpolation; wall rows of ``P`` are zeroed so the wall treatment carries
over. Smoother: damped Jacobi, two sweeps before and after the coarse
correction, so one V-cycle is a symmetric operator.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import LinearOperator

from ..errors import ConfigError
from ..fem_channel import MIN_LEVEL, _q2_1d, apply_dirichlet
from ..sparse_core import as_csr

COARSEST_LEVEL = MIN_LEVEL


def _level_of(n_s: int) -> int:
    nq = int(round(np.sqrt(n_s)))
    ne = (nq - 1) // 2
    if nq * nq != n_s or nq < 5 or ne & (ne - 1):
        raise ConfigError(f"no channel grid hierarchy for a scalar system of size {n_s}")
    return int(np.log2(ne)) + 1


def _wall_nodes(nq: int) -> np.ndarray:
    iy = np.arange(nq * nq) // nq
    return np.flatnonzero((iy == 0) | (iy == nq - 1))


def prolongation_1d(nq_coarse: int) -> sp.csr_matrix:
    """Q2 interpolation from ``nq_coarse`` to ``2*nq_coarse - 1`` nodes on [-1, 1]."""
    ne_c = (nq_coarse - 1) // 2
    nq_f = 2 * nq_coarse - 1
    t = np.linspace(-1.0, 1.0, nq_f)
    H = 2.0 / ne_c
    e = np.minimum(((t + 1.0) / H).astype(int), ne_c - 1)
    xi = 2.0 * (t + 1.0 - e * H) / H - 1.0
    val, _ = _q2_1d(xi)
    rows = np.repeat(np.arange(nq_f), 3)
    cols = (2 * e[:, None] + np.arange(3)[None, :]).ravel()
    P = sp.coo_matrix((val.ravel(), (rows, cols)), shape=(nq_f, nq_coarse))
    P = as_csr(P)
    P.data[np.abs(P.data) < 1e-15] = 0.0
    P.eliminate_zeros()
    return P


def prolongation(level_fine: int) -> sp.csr_matrix:
    """2-D interpolation from level ``level_fine - 1`` with wall rows/columns zeroed."""
    nq_c = 2 ** (level_fine - 1) + 1
    nq_f = 2 * nq_c - 1
    P1 = prolongation_1d(nq_c)
    P = sp.kron(P1, P1, format="csr")  # x runs fastest
    keep_f = np.ones(nq_f * nq_f)
    keep_f[_wall_nodes(nq_f)] = 0.0
    keep_c = np.ones(nq_c * nq_c)
    keep_c[_wall_nodes(nq_c)] = 0.0
    P = as_csr(sp.diags(keep_f) @ P @ sp.diags(keep_c))
    P.eliminate_zeros()
    return P


def _lambda_max(A, dinv, iters: int = 30) -> float:
    # deterministic power iteration on D^{-1} A
    x = np.cos(np.arange(A.shape[0]) * 1.234) + 1.5
    lam = 1.0
    for _ in range(iters):
        y = dinv * (A @ x)
        lam = np.linalg.norm(y) / np.linalg.norm(x)
        x = y / np.linalg.norm(y)
    return lam


class GeometricMultigrid(LinearOperator):
    """Fixed number of V-cycles from a zero initial guess.

    Parameters
    ----------
    A : sparse matrix
        Wall-modified scalar Laplacian on a channel grid (level >= 2).
    cycles : int
        V-cycles per application.
    smoothing : int
        Jacobi sweeps before and after each coarse correction.
    omega : float, optional
        Jacobi damping; by default ``4 / (3 lambda_max(D^{-1}A))`` per level.
    """

    def __init__(self, A, cycles: int = 5, smoothing: int = 2, omega: float | None = None):
        A = as_csr(A)
        level = _level_of(A.shape[0])
        if cycles < 1 or smoothing < 0:
            raise ConfigError("cycles must be >= 1 and smoothing >= 0")
        self.cycles, self.smoothing = cycles, smoothing
        self.ops, self.P, self.dinv, self.omega = [A], [], [], []
        for lev in range(level, COARSEST_LEVEL, -1):
            P = prolongation(lev)
            Ac = as_csr(P.T @ self.ops[-1] @ P)
            nq_c = 2 ** (lev - 1) + 1
            Ac = apply_dirichlet(Ac, _wall_nodes(nq_c))
            self.P.append(P)
            self.ops.append(Ac)
        for Al in self.ops[:-1]:
            dinv = 1.0 / Al.diagonal()
            self.dinv.append(dinv)
            self.omega.append(omega if omega is not None else 4.0 / (3.0 * _lambda_max(Al, dinv)))
        self._coarse = spla.splu(sp.csc_matrix(self.ops[-1]))
        self.levels = level - COARSEST_LEVEL + 1
        super().__init__(float, A.shape)

    def _vcycle(self, k, b):
        if k == len(self.ops) - 1:
            return self._coarse.solve(b)
        A, dinv, w = self.ops[k], self.dinv[k], self.omega[k]
        if b.ndim == 2:
            dinv = dinv[:, None]
        x = w * dinv * b
        for _ in range(self.smoothing - 1):
            x += w * dinv * (b - A @ x)
        P = self.P[k]
        x += P @ self._vcycle(k + 1, P.T @ (b - A @ x))
        for _ in range(self.smoothing):
            x += w * dinv * (b - A @ x)
        return x

    def _solve(self, b):
        if len(self.ops) == 1:
            return self._coarse.solve(b)
        A = self.ops[0]
        x = self._vcycle(0, b)
        for _ in range(self.cycles - 1):
            x += self._vcycle(0, b - A @ x)
        return x

    def _matvec(self, b):
        return self._solve(np.ravel(b).astype(float))

    def _matmat(self, B):
        return self._solve(np.asarray(B, dtype=float))

    def _rmatvec(self, b):
        return self._matvec(b)

    def _rmatmat(self, B):
        return self._matmat(B)


def mg_vcycle_apply(A, r, cycles: int = 5) -> np.ndarray:
    return GeometricMultigrid(A, cycles=cycles) @ np.asarray(r, dtype=float)
