"""Preconditioned MINRES for symmetric indefinite systems."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import aslinearoperator

from .errors import DimensionError, PreconditionerError, SymmetryError


@dataclass
class SolveReport:
    iterations: int
    residual_history: list = field(repr=False)
    converged: bool
    relative_tolerance: float
    wall_time: float
    final_true_residual: float

    def as_dict(self) -> dict:
        return asdict(self)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "preconditioned_residual"])
            for k, r in enumerate(self.residual_history):
                w.writerow([k, f"{r:.16e}"])


def _probe_rng(seed):
    return np.random.default_rng(seed)


def check_symmetric_operator(A, n: int, probes: int = 3, rtol: float = 1e-10, seed: int = 0) -> None:
    rng = _probe_rng(seed)
    norm = 0.0
    pairs = []
    for _ in range(probes):
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        Ax, Ay = A.matvec(x), A.matvec(y)
        norm = max(norm, np.linalg.norm(Ax) / np.linalg.norm(x), np.linalg.norm(Ay) / np.linalg.norm(y))
        pairs.append((x, y, Ax, Ay))
    for x, y, Ax, Ay in pairs:
        if abs(x @ Ay - y @ Ax) > rtol * np.linalg.norm(x) * np.linalg.norm(y) * norm:
            raise SymmetryError("operator failed the symmetry probe")


def check_spd_preconditioner(M, n: int, probes: int = 3, rtol: float = 1e-12, seed: int = 1) -> None:
    rng = _probe_rng(seed)
    for _ in range(probes):
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        Mx, My, Mxy = M.matvec(x), M.matvec(y), M.matvec(x + y)
        if np.linalg.norm(Mxy - Mx - My) > rtol * (np.linalg.norm(Mx) + np.linalg.norm(My)):
            raise PreconditionerError("preconditioner failed the linearity probe")
        if not x @ Mx > 0:
            raise PreconditionerError("preconditioner failed the positivity probe")


def minres(A, b, M=None, tol: float = 1e-6, maxit: int | None = None, x0=None,
           check: bool = False, callback=None):
    """Solve ``A x = b`` with MINRES, preconditioned by the SPD operator ``M``.

    ``M`` applies the *inverse* of the preconditioner. Convergence is declared
    when the ``M``-norm of the residual drops below ``tol`` times its initial
    value. Returns ``(x, SolveReport)``.
    """
    t0 = time.perf_counter()
    A = aslinearoperator(A)
    n = A.shape[0]
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise DimensionError(f"rhs of shape {b.shape} for operator of size {n}")
    Mop = aslinearoperator(M) if M is not None else None
    if check:
        check_symmetric_operator(A, n)
        if Mop is not None:
            check_spd_preconditioner(Mop, n)
    prec = Mop.matvec if Mop is not None else (lambda r: r.copy())
    maxit = maxit if maxit is not None else 10 * n

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    v = b - A.matvec(x) if x0 is not None else b.copy()
    z = prec(v)
    gamma = np.sqrt(max(z @ v, 0.0))
    if z @ v < -1e-14 * np.linalg.norm(z) * np.linalg.norm(v):
        raise PreconditionerError("preconditioner is not positive definite")
    history = [gamma]
    eta = gamma
    if gamma == 0.0:
        return x, _report(0, history, True, tol, t0, A, x, b)

    v_old = np.zeros(n)
    w, w_old = np.zeros(n), np.zeros(n)
    gamma_old = 1.0
    c, c_old, s, s_old = 1.0, 1.0, 0.0, 0.0
    converged = False
    k = 0
    while k < maxit:
        k += 1
        z = z / gamma
        Az = A.matvec(z)
        delta = Az @ z
        v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old
        z_new = prec(v_new)
        zv = z_new @ v_new
        if zv < -1e-14 * np.linalg.norm(z_new) * np.linalg.norm(v_new):
            raise PreconditionerError("preconditioner is not positive definite")
        gamma_new = np.sqrt(max(zv, 0.0))
        a0 = c * delta - c_old * s * gamma
        a1 = np.hypot(a0, gamma_new)
        a2 = s * delta + c_old * c * gamma
        a3 = s_old * gamma
        c_new, s_new = a0 / a1, gamma_new / a1
        w_new = (z - a3 * w_old - a2 * w) / a1
        x = x + c_new * eta * w_new
        eta = -s_new * eta
        history.append(abs(eta))
        if callback is not None:
            callback(k, x, abs(eta))
        if abs(eta) <= tol * history[0]:
            converged = True
            break
        if gamma_new == 0.0:  # invariant subspace: exact solution
            converged = True
            break
        v_old, v = v, v_new
        z = z_new
        gamma_old, gamma = gamma, gamma_new
        c_old, c = c, c_new
        s_old, s = s, s_new
        w_old, w = w, w_new
    return x, _report(k, history, converged, tol, t0, A, x, b)


def _report(k, history, converged, tol, t0, A, x, b):
    r = b - A.matvec(x)
    nb = np.linalg.norm(b)
    true_res = float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))
    return SolveReport(
        iterations=k,
        residual_history=[float(h) for h in history],
        converged=bool(converged),
        relative_tolerance=tol,
        wall_time=time.perf_counter() - t0,
        final_true_residual=true_res,
    )
