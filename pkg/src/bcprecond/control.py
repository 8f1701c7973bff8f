"""Stokes boundary control driver."""
from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .kkt import ChannelProblem, build_stokes_kkt, control_energy
from .krylov import SolveReport, minres
from .precond.stack import PrecondConfig, stokes_block_precond


def solve_stokes_control(level: int | ChannelProblem, alpha: float = 1e-3, beta: float = 1e-3,
                         precond_cfg: PrecondConfig | None = None, *, tol: float = 1e-6,
                         maxit: int = 1000, direct: bool = False):
    """Solve the Stokes control KKT system.

    Returns ``(x, kkt, report)``; ``report`` is ``None`` for a direct solve.
    """
    problem = level if isinstance(level, ChannelProblem) else ChannelProblem.build(level)
    kkt = build_stokes_kkt(problem, alpha, beta)
    if direct:
        return spla.spsolve(kkt.matrix.tocsc(), kkt.rhs), kkt, None
    M = stokes_block_precond(kkt, precond_cfg)
    x, rep = minres(kkt.matrix, kkt.rhs, M, tol=tol, maxit=maxit)
    return x, kkt, rep


def stokes_energy_sweep(level: int, betas, alpha: float = 1e-3, direct: bool = True) -> list[tuple[float, float]]:
    """``(beta, u^T Q_u u)`` pairs for a range of control costs."""
    problem = ChannelProblem.build(level)
    out = []
    for beta in betas:
        x, kkt, _ = solve_stokes_control(problem, alpha, beta, direct=direct)
        out.append((float(beta), control_energy(kkt, x)))
    return out


def summarize(report: SolveReport | None) -> dict:
    if report is None:
        return {"iterations": 0, "converged": True}
    d = report.as_dict()
    d.pop("residual_history")
    return d


def control_profile(kkt, x) -> np.ndarray:
    """Columns ``y, u_x, u_y`` of the control along the inflow edge."""
    dm = kkt.problem.dofmap
    u = kkt.split(x)["u"]
    y = kkt.problem.mesh.y[dm.inflow_nodes]
    m = dm.inflow_nodes.size
    return np.column_stack([y, u[:m], u[m:]])
