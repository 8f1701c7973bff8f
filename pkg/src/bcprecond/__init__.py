"""Preconditioned MINRES for Stokes and Navier-Stokes boundary control on a square channel."""

__version__ = "0.1.0"

from .control import solve_stokes_control
from .errors import (
    BcPrecondError, CapError, ConfigError, DimensionError, DivergenceError, FactorizationError, IoError,
    NonConvergence, NotSpdError, PreconditionerError, SingularError, SymmetryError,
)
from .kkt import (
    ChannelProblem, KktSystem, PermutationPlan, apply_permutation_and_drop, build_oseen_kkt, build_stokes_kkt,
    control_energy, plan_permutation,
)
from .krylov import SolveReport, minres
from .picard import NonlinearReport, solve_navier_control
from .precond.stack import PrecondConfig, perm_precond, stokes_block_precond
