"""Sparse and small dense linear algebra.

Sparse operators are plain :class:`scipy.sparse.csr_matrix` objects; the
helpers here validate the CSR invariants the rest of the package relies on.
Dense eigenvalue work uses a cyclic Jacobi solver (round-robin ordering, so
every sweep applies ``n/2`` disjoint rotations at once).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

from .errors import DimensionError, NotSpdError, SingularError, SymmetryError

__all__ = [
    "SpectrumReport",
    "as_csr",
    "check_csr",
    "spmv",
    "sym_eig",
    "gen_sym_eig",
    "dense_solve",
    "to_dense",
    "read_matrix_market",
    "write_matrix_market",
    "inertia",
]

#: above this size ``sym_eig(method="auto")`` hands over to LAPACK
JACOBI_MAX_N = 200
#: default limit for sparse -> dense conversions in the analysis code
DENSE_CAP = 6000


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def n_negative(self) -> int:
        return int(np.count_nonzero(self.eigenvalues < 0))

    @property
    def condition_number(self) -> float:
        """``max|lambda| / min|lambda|``; infinite for a singular matrix."""
        mags = np.abs(self.eigenvalues)
        lo = mags.min()
        return float(np.inf) if lo == 0 else float(mags.max() / lo)

    def as_dict(self) -> dict:
        return {
            "min": self.min,
            "max": self.max,
            "condition_number": self.condition_number,
            "n_negative": self.n_negative,
            "n": int(self.eigenvalues.size),
        }


def as_csr(M) -> sp.csr_matrix:
    """Canonical CSR copy: duplicates summed, indices sorted."""
    A = sp.csr_matrix(M, dtype=float, copy=True)
    A.sum_duplicates()
    A.sort_indices()
    return A


def check_csr(M: sp.csr_matrix) -> None:
    """Raise ``ValueError`` if ``M`` violates the CSR layout invariants."""
    ptr, idx = M.indptr, M.indices
    if ptr[0] != 0 or ptr[-1] != M.nnz or np.any(np.diff(ptr) < 0):
        raise ValueError("row_ptr must start at 0, end at nnz and be nondecreasing")
    for i in range(M.shape[0]):
        cols = idx[ptr[i]:ptr[i + 1]]
        if cols.size > 1 and np.any(np.diff(cols) <= 0):
            raise ValueError(f"row {i}: column indices not strictly increasing")


def spmv(M, x, transpose: bool = False) -> np.ndarray:
    """Return ``M @ x`` (or ``M.T @ x``)."""
    x = np.asarray(x, dtype=float)
    n = M.shape[0] if transpose else M.shape[1]
    if x.shape[0] != n:
        raise DimensionError(f"vector of length {x.shape[0]} vs operator dimension {n}")
    return M.T @ x if transpose else M @ x


def to_dense(M, cap: int = DENSE_CAP) -> np.ndarray:
    from .errors import CapError

    if max(M.shape) > cap:
        raise CapError(f"dense conversion of {M.shape} exceeds cap {cap}")
    return M.toarray() if sp.issparse(M) else np.array(M, dtype=float)


def _check_symmetric(M: np.ndarray, rtol: float = 1e-12) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"square matrix required, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = np.abs(M).max(initial=0.0)
    if np.abs(M - M.T).max(initial=0.0) > rtol * max(scale, np.finfo(float).tiny):
        raise SymmetryError("matrix is not symmetric")


def _round_robin(m: int):
    """Yield the ``m - 1`` rounds of a round-robin tournament on ``m`` (even) players."""
    players = list(range(m))
    for _ in range(m - 1):
        yield [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        players = [players[0], players[-1]] + players[1:-1]


def _jacobi(M: np.ndarray, tol: float, max_sweeps: int = 60):
    n = M.shape[0]
    A = M.copy()
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    m = n + (n % 2)
    rounds = []
    for pairs in _round_robin(m):
        pq = np.array([pr for pr in pairs if max(pr) < n])
        P, Q = pq.min(axis=1), pq.max(axis=1)
        rounds.append((P, Q))
    target = tol * np.linalg.norm(M)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off <= target:
            break
        for P, Q in rounds:
            apq = A[P, Q]
            app = A[P, P]
            aqq = A[Q, Q]
            active = apq != 0.0
            with np.errstate(over="ignore"):
                theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                t = np.sign(theta + (theta == 0)) / (np.abs(theta) + np.hypot(1.0, theta))
            t = np.where(active & np.isfinite(theta), t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = A[:, P], A[:, Q]
            A[:, P] = c * ap - s * aq
            A[:, Q] = s * ap + c * aq
            ap, aq = A[P, :], A[Q, :]
            A[P, :] = c[:, None] * ap - s[:, None] * aq
            A[Q, :] = s[:, None] * ap + c[:, None] * aq
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            vp, vq = V[:, P], V[:, Q]
            V[:, P] = c * vp - s * vq
            V[:, Q] = s * vp + c * vq
    else:
        raise ArithmeticError("Jacobi sweeps did not converge")
    return A.diagonal().copy(), V


def sym_eig(M, *, method: str = "auto", vectors: bool = False, tol: float = 1e-13) -> SpectrumReport:
    """Full spectrum of a dense symmetric matrix.

    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up to
    :data:`JACOBI_MAX_N` rows). Eigenvalues come back ascending.
    """
    M = np.asarray(M, dtype=float)
    _check_symmetric(M)
    M = 0.5 * (M + M.T)
    if method == "auto":
        method = "jacobi" if M.shape[0] <= JACOBI_MAX_N else "lapack"
    if method == "jacobi":
        w, V = _jacobi(M, tol)
    elif method == "lapack":
        w, V = np.linalg.eigh(M)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(w, kind="stable")
    return SpectrumReport(w[order], V[:, order] if vectors else None)


def gen_sym_eig(M, D, *, method: str = "auto", vectors: bool = False) -> SpectrumReport:
    """Spectrum of ``D^{-1} M`` for symmetric ``M`` and SPD ``D``.

    Reduces to ``L^{-1} M L^{-T}`` with ``D = L L^T``. Returned eigenvectors
    (if requested) are those of the original pencil, ``x = L^{-T} y``.
    """
    M = np.asarray(M, dtype=float)
    D = np.asarray(D, dtype=float)
    _check_symmetric(M)
    _check_symmetric(D)
    if M.shape != D.shape:
        raise DimensionError(f"{M.shape} vs {D.shape}")
    try:
        L = np.linalg.cholesky(0.5 * (D + D.T))
    except np.linalg.LinAlgError as exc:
        raise NotSpdError("D is not positive definite") from exc
    X = scipy.linalg.solve_triangular(L, M, lower=True)
    C = scipy.linalg.solve_triangular(L, X.T, lower=True)
    C = 0.5 * (C + C.T)
    rep = sym_eig(C, method=method, vectors=vectors)
    if not vectors:
        return rep
    X = scipy.linalg.solve_triangular(L.T, rep.eigenvectors, lower=False)
    return SpectrumReport(rep.eigenvalues, X)


def dense_solve(M, b) -> np.ndarray:
    """Partial-pivoting LU solve; raises :class:`SingularError` on a tiny pivot."""
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"square matrix required, got {M.shape}")
    if b.shape[0] != M.shape[0]:
        raise DimensionError(f"rhs length {b.shape[0]} vs {M.shape[0]}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)  # reported below instead
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    pivots = np.abs(lu.diagonal())
    if pivots.min(initial=np.inf) <= 1e-14 * np.abs(M).sum(axis=1).max(initial=0.0):
        raise SingularError("matrix singular within pivot tolerance")
    return scipy.linalg.lu_solve((lu, piv), b)


def write_matrix_market(path, M, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(M), comment=comment)


def read_matrix_market(path) -> sp.csr_matrix:
    return as_csr(scipy.io.mmread(str(path)))


def inertia(M) -> tuple[int, int, int]:
    """``(n_positive, n_negative, n_zero)`` of a symmetric sparse matrix.

    Uses an LU factorization with diagonal pivoting and symmetric ordering, so
    ``U`` carries the ``D`` of an ``L D L^T`` and Sylvester's law applies.
    Falls back to a dense eigensolve if a pivot is not available.
    """
    import scipy.sparse.linalg as spla

    A = as_csr(M)
    n = A.shape[0]
    try:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
        ok = np.array_equal(lu.perm_r, lu.perm_c)
        piv = lu.U.diagonal()
    except RuntimeError:
        ok = False
    if not ok:
        w = np.linalg.eigvalsh(to_dense(A))
        tol = 1e-12 * np.abs(w).max(initial=0.0)
        return int((w > tol).sum()), int((w < -tol).sum()), int((np.abs(w) <= tol).sum())
    tol = 1e-14 * np.abs(piv).max(initial=0.0)
    n_neg = int((piv < -tol).sum())
    n_zero = int((np.abs(piv) <= tol).sum())
    return n - n_neg - n_zero, n_neg, n_zero
