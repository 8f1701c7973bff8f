"""Fixed-step inexact Uzawa iterations for ``[[F, B^T], [B, 0]]``.

A sweep started from zero is a linear map of the right-hand side; its exact
algebraic transpose is obtained by running the steps in reverse with the
transposed sub-operators. That transpose approximates ``K^{-T}`` and makes the
Schur complement preconditioner ``U^T Q U`` symmetric by construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from ..errors import ConfigError, DimensionError, DivergenceError

DIVERGENCE_GROWTH = 1e6


@dataclass(frozen=True)
class UzawaConfig:
    steps: int = 5
    sigma: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("Uzawa steps must be >= 1")
        if not (self.sigma > 0 and self.tau > 0):
            raise ConfigError("sigma and tau must be positive")


class RepeatedBlock(LinearOperator):
    """``blkdiag(op, op, ...)`` for an operator acting on each velocity component."""

    def __init__(self, op, reps: int = 2):
        self.op = op
        self.reps = reps
        n = op.shape[0]
        super().__init__(float, (reps * n, reps * n))

    def _matvec(self, x):
        X = np.reshape(x, (self.reps, -1)).T
        return np.asarray(self.op.matmat(X)).T.ravel()

    def _rmatvec(self, x):
        X = np.reshape(x, (self.reps, -1)).T
        return np.asarray(self.op.rmatmat(X)).T.ravel()


class InexactUzawa(LinearOperator):
    """Fixed-step inexact Uzawa as a linear operator on ``(f, g)``.

    Each step::

        v <- v + sigma * PA (f - F v - B^T p)
        p <- p + tau   * PS (B v - g)

    ``PA`` and ``PS`` must be symmetric (their transposes are taken to be
    themselves in the reverse sweep). With ``check_divergence`` the iterates
    are monitored and growth beyond ``1e6`` times the data raises
    :class:`DivergenceError`.
    """

    def __init__(self, F, B, PA, PS, cfg: UzawaConfig | None = None, check_divergence: bool = False):
        self.F = sp.csr_matrix(F)
        self.B = sp.csr_matrix(B)
        self.FT = sp.csr_matrix(self.F.T)
        self.BT = sp.csr_matrix(self.B.T)
        n_v, n_p = self.F.shape[0], self.B.shape[0]
        if self.B.shape[1] != n_v or PA.shape != (n_v, n_v) or PS.shape != (n_p, n_p):
            raise DimensionError("Uzawa blocks do not conform")
        self.PA, self.PS = aslinearoperator(PA), aslinearoperator(PS)
        self.cfg = cfg or UzawaConfig()
        self.check_divergence = check_divergence
        self.n_v, self.n_p = n_v, n_p
        super().__init__(float, (n_v + n_p, n_v + n_p))

    def _guard(self, scale, *vecs):
        if not self.check_divergence:
            return
        size = sum(np.linalg.norm(x) for x in vecs)
        if not np.isfinite(size) or size > DIVERGENCE_GROWTH * max(scale, np.finfo(float).tiny):
            raise DivergenceError("inexact Uzawa iterates grew by more than 1e6")

    def _matvec(self, r):
        r = np.ravel(r)
        f, g = r[: self.n_v], r[self.n_v:]
        c = self.cfg
        v = np.zeros(self.n_v)
        p = np.zeros(self.n_p)
        scale = np.linalg.norm(f) + np.linalg.norm(g)
        for _ in range(c.steps):
            v = v + c.sigma * self.PA.matvec(f - self.F @ v - self.BT @ p)
            p = p + c.tau * self.PS.matvec(self.B @ v - g)
            self._guard(scale, v, p)
        return np.concatenate([v, p])

    def _rmatvec(self, a):
        a = np.ravel(a)
        vb, pb = a[: self.n_v].copy(), a[self.n_v:].copy()
        c = self.cfg
        fb = np.zeros(self.n_v)
        gb = np.zeros(self.n_p)
        scale = np.linalg.norm(vb) + np.linalg.norm(pb)
        for _ in range(c.steps):
            rp = c.tau * self.PS.matvec(pb)
            vb += self.BT @ rp
            gb -= rp
            rv = c.sigma * self.PA.matvec(vb)
            fb += rv
            vb -= self.FT @ rv
            pb -= self.B @ rv
            self._guard(scale, vb, pb, fb, gb)
        return np.concatenate([fb, gb])

    def solve(self, f, g):
        x = self.matvec(np.concatenate([f, g]))
        return x[: self.n_v], x[self.n_v:]


def uzawa_apply(cfg: UzawaConfig, F, B, PA, PS, f, g):
    return InexactUzawa(F, B, PA, PS, cfg).solve(f, g)


def nonsym_uzawa_apply(cfg: UzawaConfig, F, B, PA, PS, f, g):
    return InexactUzawa(F, B, PA, PS, cfg, check_divergence=True).solve(f, g)
