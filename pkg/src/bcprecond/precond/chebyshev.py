"""Chebyshev semi-iteration for mass matrices.

The underlying splitting is relaxed Jacobi, ``x <- x + omega D^{-1}(r - Q x)``
with ``omega = 2/(theta + Theta)``, where ``[theta, Theta]`` encloses the
spectrum of ``D^{-1} Q``. Starting from zero makes the result a fixed
polynomial in ``D^{-1} Q`` applied to ``D^{-1} r``, so it is linear and
symmetric and can be used inside MINRES.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from ..errors import ConfigError

# eigenvalue bounds of D^{-1} Q_e for the element mass matrices
Q2_BOUNDS = (0.25, 25.0 / 16.0)
Q1_BOUNDS = (0.25, 2.25)
EDGE_BOUNDS = (0.5, 1.25)


@dataclass(frozen=True)
class ChebyshevConfig:
    steps: int = 20
    theta: float = Q2_BOUNDS[0]
    Theta: float = Q2_BOUNDS[1]

    def __post_init__(self):
        if not (self.theta > 0 and self.Theta >= self.theta):
            raise ConfigError(f"need 0 < theta <= Theta, got ({self.theta}, {self.Theta})")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")

    @property
    def rho(self) -> float:
        return (self.Theta - self.theta) / (self.Theta + self.theta)

    def error_bound(self) -> float:
        """``1 / T_k(1/rho)``, the worst-case error factor after ``steps``."""
        if self.rho == 0:
            return 0.0
        r = (1 - np.sqrt(1 - self.rho**2)) / self.rho
        k = self.steps
        return 2 * r**k / (1 + r ** (2 * k))


def chebyshev_apply(cfg: ChebyshevConfig, Q: sp.spmatrix, r, diag=None) -> np.ndarray:
    """Approximate ``Q^{-1} r`` with ``cfg.steps`` Chebyshev steps.

    ``r`` may be a vector or a 2-D array of column vectors.
    """
    r = np.asarray(r, dtype=float)
    d = Q.diagonal() if diag is None else diag
    if r.ndim == 2:
        d = d[:, None]
    omega = 2.0 / (cfg.theta + cfg.Theta)
    rho2 = cfg.rho**2
    g = omega * r / d
    y_old = np.zeros_like(r)
    y = g
    w = 1.0
    for k in range(1, cfg.steps):
        w = 1.0 / (1.0 - 0.5 * rho2) if k == 1 else 1.0 / (1.0 - 0.25 * rho2 * w)
        # S y + g with S = I - omega D^{-1} Q
        z = y + g - omega * (Q @ y) / d
        y, y_old = w * (z - y_old) + y_old, y
    return y


class Chebyshev(LinearOperator):
    """``Q^{-1}`` approximated by a fixed Chebyshev semi-iteration, optionally scaled by ``1/scale``.

    With ``dense_limit >= n`` the polynomial is evaluated once into a dense
    matrix, which pays off when the operator is applied many times (inside
    Uzawa sweeps) to a small matrix.
    """

    def __init__(self, Q: sp.spmatrix, cfg: ChebyshevConfig | None = None, scale: float = 1.0,
                 dense_limit: int = 0):
        self.Q = sp.csr_matrix(Q)
        self.cfg = cfg or ChebyshevConfig()
        self.scale = float(scale)
        self._d = self.Q.diagonal()
        if np.any(self._d <= 0):
            raise ConfigError("Chebyshev needs a positive diagonal")
        super().__init__(float, self.Q.shape)
        self._dense = None
        if self.shape[0] <= dense_limit:
            C = self._matmat(np.eye(self.shape[0]))
            self._dense = 0.5 * (C + C.T)

    def _matvec(self, r):
        if self._dense is not None:
            return self._dense @ np.ravel(r)
        return chebyshev_apply(self.cfg, self.Q, np.ravel(r), self._d) / self.scale

    def _matmat(self, R):
        if self._dense is not None:
            return self._dense @ R
        return chebyshev_apply(self.cfg, self.Q, R, self._d) / self.scale

    def _rmatvec(self, r):
        return self._matvec(r)

    def _rmatmat(self, R):
        return self._matmat(R)

    def as_matrix(self) -> np.ndarray:
        """Dense matrix of the operator (small problems only)."""
        return self._matmat(np.eye(self.shape[0]))
