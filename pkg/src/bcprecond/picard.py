"""Picard iteration for Navier-Stokes boundary control.

Each outer step freezes the wind at the previous velocity and solves the
Oseen KKT system. The nonlinear residual is the KKT residual assembled with
the current iterate's own velocity as wind.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConfigError, NonConvergence
from .kkt import ChannelProblem, apply_permutation_and_drop, build_oseen_kkt, control_energy, plan_permutation
from .krylov import SolveReport, minres
from .precond.stack import PrecondConfig, perm_precond, stokes_block_precond


@dataclass
class NonlinearReport:
    picard_iterations: int
    minres_iterations: list
    residual_history: list
    control_energy: float
    converged: bool
    nu: float
    alpha: float
    beta: float
    level: int
    stride: int | None
    wall_time: float = 0.0
    solves: list = field(default_factory=list, repr=False)

    @property
    def average_minres(self) -> float:
        its = self.minres_iterations
        return float(np.mean(its)) if its else 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("solves")
        d["average_minres"] = self.average_minres
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def nonlinear_residual(problem: ChannelProblem, x, alpha, beta, nu, convection: bool = True) -> np.ndarray:
    n_v = problem.dofmap.n_v
    wind = x[:n_v] if convection else np.zeros(n_v)
    kkt = build_oseen_kkt(problem, wind, alpha, beta, nu)
    return kkt.residual(x)


def _linear_solve(kkt, x_prev, cfg, tol, maxit, direct, stokes=False):
    """Solve the Oseen KKT system for the correction to ``x_prev``.

    ``stokes`` marks a system without convection; it gets the multigrid
    block preconditioner instead of the permutational one.
    """
    r = kkt.residual(x_prev)
    if direct:
        dx = spla.spsolve(kkt.matrix.tocsc(), r)
        return x_prev + dx, None
    if stokes:
        dx, rep = minres(kkt.matrix, r, stokes_block_precond(kkt, cfg), tol=tol, maxit=maxit)
        return x_prev + dx, rep
    plan = plan_permutation(kkt.problem.dofmap, cfg.stride, cfg.offset)
    pk = apply_permutation_and_drop(kkt, plan)
    M = perm_precond(pk, cfg)
    y, rep = minres(pk.matrix, plan.apply(r), M, tol=tol, maxit=maxit)
    return x_prev + plan.unapply(y), rep


def solve_navier_control(level: int | ChannelProblem, alpha: float = 1e-3, beta: float = 1.0, nu: float = 0.2,
                         precond_cfg: PrecondConfig | None = None, *, tol: float = 1e-6,
                         nonlinear_tol: float = 1e-6, max_nonlinear: int = 40, maxit: int = 2000,
                         direct: bool = False, initial_nu: float = 1.0, convection: bool = True,
                         callback=None):
    """Picard iteration started from the Stokes control solution.

    The starting point solves the control problem with viscosity
    ``initial_nu`` (default 1) and no convection. ``convection=False`` drops
    the convection term throughout, which turns the loop into a single Stokes
    solve at viscosity ``nu``.

    Returns ``(x, NonlinearReport)``. Inner solves use MINRES with the
    permutational preconditioner unless ``direct`` is set; solves without
    convection, including the starting one, use the Stokes block
    preconditioner. A
    :class:`~bcprecond.errors.DivergenceError` from the preconditioner
    propagates to the caller.
    """
    if not nu > 0:
        raise ConfigError("nu must be positive")
    if max_nonlinear < 1:
        raise ConfigError("max_nonlinear must be >= 1")
    t0 = time.perf_counter()
    cfg = precond_cfg or PrecondConfig()
    problem = level if isinstance(level, ChannelProblem) else ChannelProblem.build(level)
    n_v = problem.dofmap.n_v

    # initial guess: the Stokes control problem (unit viscosity, no convection)
    kkt = build_oseen_kkt(problem, np.zeros(n_v), alpha, beta, initial_nu)
    x, rep = _linear_solve(kkt, np.zeros(kkt.N), cfg, tol, maxit, direct, stokes=True)
    solves: list[SolveReport] = [rep] if rep is not None else []
    res0 = np.linalg.norm(nonlinear_residual(problem, x, alpha, beta, nu, convection))
    history = [float(res0)]
    its: list[int] = []
    converged = res0 == 0.0
    k = 0
    while not converged and k < max_nonlinear:
        k += 1
        kkt = build_oseen_kkt(problem, x[:n_v] if convection else np.zeros(n_v), alpha, beta, nu)
        x, rep = _linear_solve(kkt, x, cfg, tol, maxit, direct, stokes=not convection)
        if rep is not None:
            solves.append(rep)
            its.append(rep.iterations)
        res = float(np.linalg.norm(nonlinear_residual(problem, x, alpha, beta, nu, convection)))
        history.append(res)
        if callback is not None:
            callback(k, x, res)
        converged = res <= nonlinear_tol * res0
    report = NonlinearReport(
        picard_iterations=k, minres_iterations=its, residual_history=history,
        control_energy=control_energy(kkt, x), converged=bool(converged), nu=nu, alpha=alpha,
        beta=beta, level=problem.level, stride=cfg.stride, wall_time=time.perf_counter() - t0,
        solves=solves,
    )
    if not converged:
        raise NonConvergence(f"Picard iteration did not converge in {max_nonlinear} steps", report)
    return x, report
