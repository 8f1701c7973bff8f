"""Modified incomplete Cholesky, MIC(0).

Factorization ``M = L D L^T`` on the sparsity pattern of the matrix. Fill that
falls outside the pattern is not discarded but subtracted from the two
diagonal entries it would have coupled (Gustafsson's row-sum modification),
so ``M`` and the matrix have equal row sums whenever no shift is applied.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import LinearOperator

from ..errors import ConfigError, FactorizationError
from ..sparse_core import as_csr

SHIFT_FACTOR = 1e-8
MAX_SHIFTS = 3


def _ldl_mic(A: sp.csr_matrix, relax: float):
    n = A.shape[0]
    low = sp.tril(A, format="csr")
    rows = [dict(zip(low.indices[low.indptr[i]:low.indptr[i + 1]].tolist(),
                     low.data[low.indptr[i]:low.indptr[i + 1]].tolist())) for i in range(n)]
    lowc = low.tocsc()
    # strictly-lower pattern of each column
    cols = [lowc.indices[lowc.indptr[k]:lowc.indptr[k + 1]] for k in range(n)]
    cols = [c[c > k].tolist() for k, c in enumerate(cols)]
    d = np.empty(n)
    for k in range(n):
        dk = rows[k][k]
        if not dk > 0:
            raise FactorizationError(f"nonpositive pivot {dk:.3e} at row {k}")
        d[k] = dk
        below = cols[k]
        vals = [rows[i][k] for i in below]
        for a, i in enumerate(below):
            ri = rows[i]
            aik = vals[a] / dk
            for b in range(a + 1):
                j = below[b]
                f = aik * vals[b]
                if j in ri:
                    ri[j] -= f
                elif relax:
                    ri[i] -= relax * f
                    rows[j][j] -= relax * f
    # unit lower factor
    r_idx, c_idx, v = [], [], []
    for i, ri in enumerate(rows):
        for j, val in ri.items():
            if j < i:
                r_idx.append(i)
                c_idx.append(j)
                v.append(val / d[j])
    L = sp.csr_matrix((v, (r_idx, c_idx)), shape=(n, n)) + sp.identity(n, format="csr")
    return as_csr(L), d


class MIC0(LinearOperator):
    """Apply ``(L D L^T)^{-1}`` with the MIC(0) factor of a symmetric matrix.

    On a nonpositive pivot the diagonal is shifted by ``1e-8 * ||A||_inf``
    (growing tenfold per attempt) and the factorization retried, at most three
    times. ``relax=0`` gives plain IC(0).
    """

    def __init__(self, A, relax: float = 1.0, scale: float = 1.0):
        if not 0.0 <= relax <= 1.0:
            raise ConfigError("relax must lie in [0, 1]")
        A = as_csr(A)
        if A.shape[0] != A.shape[1]:
            raise ConfigError("MIC(0) needs a square matrix")
        if abs(A - A.T).max() > 1e-12 * abs(A).max():
            raise ConfigError("MIC(0) needs a symmetric matrix")
        norm = abs(A).sum(axis=1).max()
        self.shift = 0.0
        for attempt in range(MAX_SHIFTS + 1):
            try:
                L, d = _ldl_mic(A + self.shift * sp.identity(A.shape[0]), relax)
                break
            except FactorizationError:
                if attempt == MAX_SHIFTS:
                    raise
                self.shift = SHIFT_FACTOR * norm * 10.0**attempt
        self.L, self.d, self.scale = L, d, float(scale)
        self._lu = spla.splu(sp.csc_matrix(L), permc_spec="NATURAL", diag_pivot_thresh=0.0,
                             options={"SymmetricMode": True})
        super().__init__(float, A.shape)

    def _solve(self, r):
        y = self._lu.solve(r)  # L y = r
        y = y / (self.d[:, None] if y.ndim == 2 else self.d)
        return self._lu.solve(y, trans="T") / self.scale

    def _matvec(self, r):
        return self._solve(np.ravel(r).astype(float))

    def _matmat(self, R):
        return self._solve(np.asarray(R, dtype=float))

    def _rmatvec(self, r):
        return self._matvec(r)

    def _rmatmat(self, R):
        return self._matmat(R)

    def factor_matrix(self) -> sp.csr_matrix:
        return as_csr(self.scale * (self.L @ sp.diags(self.d) @ self.L.T))


def mic0_apply(F_part, r) -> np.ndarray:
    return MIC0(F_part) @ np.asarray(r, dtype=float)
