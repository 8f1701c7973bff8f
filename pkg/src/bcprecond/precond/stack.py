"""Block-diagonal KKT preconditioners.

Stokes: ``blkdiag(Q_v, alpha Q_p, beta Q_u)`` through Chebyshev, and the
Schur complement through ``S~^{-1} = K^{-T} Q K^{-1}`` with both inverses
replaced by an inexact Uzawa sweep (multigrid inside).

Oseen: the same construction on the permuted system. The small third block
(control plus moved inflow DOFs) is handled densely and the Uzawa sweep for
the reduced Oseen operator uses MIC(0) of the symmetric part.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from ..errors import ConfigError, DivergenceError
from ..kkt import KktSystem, PermutedKkt
from ..sparse_core import inertia
from .chebyshev import EDGE_BOUNDS, Q1_BOUNDS, Q2_BOUNDS, Chebyshev, ChebyshevConfig
from .mic import MIC0
from .multigrid import GeometricMultigrid
from .uzawa import InexactUzawa, RepeatedBlock, UzawaConfig

# pressure Chebyshev inside Uzawa sweeps is tabulated densely up to this size
DENSE_PRESSURE = 1200


@dataclass(frozen=True)
class PrecondConfig:
    """Knobs of the preconditioner stack (JSON round-trippable).

    ``uzawa_steps=None`` means 5 for Stokes and 30 for Oseen; ``delta=None``
    means ``delta = nu``. ``pressure_scale=None`` scales the pressure
    Chebyshev inside the Oseen Uzawa by ``nu`` (the Schur complement of
    ``nu A`` is about ``Q_p / nu``).
    """

    cheb_steps: int = 20
    uzawa_steps: int | None = None
    mg_cycles: int = 5
    sigma: float = 1.0
    tau: float = 1.0
    delta: float | None = None
    oseen_tau: float = 1.0
    pressure_scale: float | None = None
    mic_relax: float = 1.0
    stride: int | None = 1
    offset: int = 0

    def __post_init__(self):
        if self.cheb_steps < 1 or self.mg_cycles < 1:
            raise ConfigError("cheb_steps and mg_cycles must be >= 1")
        if self.uzawa_steps is not None and self.uzawa_steps < 1:
            raise ConfigError("uzawa_steps must be >= 1")
        for name in ("sigma", "tau", "oseen_tau"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.delta is not None and not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not 0.0 <= self.mic_relax <= 1.0:
            raise ConfigError("mic_relax must lie in [0, 1]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PrecondConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown preconditioner keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "PrecondConfig":
        return cls.from_dict(json.loads(text))


class BlockDiagonal(LinearOperator):
    def __init__(self, ops):
        self.ops = list(ops)
        sizes = [op.shape[0] for op in self.ops]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        n = int(self.offsets[-1])
        super().__init__(float, (n, n))

    def _apply(self, x, transpose):
        x = np.ravel(x)
        out = np.empty(self.shape[0])
        for op, a, b in zip(self.ops, self.offsets[:-1], self.offsets[1:]):
            out[a:b] = op.rmatvec(x[a:b]) if transpose else op.matvec(x[a:b])
        return out

    def _matvec(self, x):
        return self._apply(x, False)

    def _rmatvec(self, x):
        return self._apply(x, True)


class SchurTilde(LinearOperator):
    """``U^T Qcal U``: approximate inverse of ``K Qcal^{-1} K^T``."""

    def __init__(self, uzawa: InexactUzawa, Qcal):
        self.U = uzawa
        self.Qcal = sp.csr_matrix(Qcal)
        super().__init__(float, uzawa.shape)

    def _matvec(self, r):
        return self.U.rmatvec(self.Qcal @ self.U.matvec(np.ravel(r)))

    def _rmatvec(self, r):
        return self._matvec(r)


def schur_tilde_apply(uzawa: InexactUzawa, Qcal, r) -> np.ndarray:
    return SchurTilde(uzawa, Qcal).matvec(r)


class DenseSpd(LinearOperator):
    """Inverse of a dense SPD matrix through its Cholesky factor."""

    def __init__(self, M):
        M = np.asarray(M, dtype=float)
        self.cho = scipy.linalg.cho_factor(0.5 * (M + M.T))
        super().__init__(float, M.shape)

    def _matvec(self, x):
        return scipy.linalg.cho_solve(self.cho, np.ravel(x))

    def _rmatvec(self, x):
        return self._matvec(x)


class SaddleBlockPrecond(LinearOperator):
    """``blkdiag(X, Y X^{-1} Y^T)^{-1}`` for a small dense ``[[X, Y^T], [Y, 0]]``."""

    def __init__(self, Z, n: int):
        Z = np.asarray(Z, dtype=float)
        X = Z[:n, :n]
        Y = Z[n:, :n]
        self.n = n
        self.X = DenseSpd(X)
        self.S = DenseSpd(Y @ scipy.linalg.cho_solve(self.X.cho, Y.T)) if Y.shape[0] else None
        super().__init__(float, Z.shape)

    def _matvec(self, x):
        x = np.ravel(x)
        out = self.X.matvec(x[: self.n])
        if self.S is None:
            return out
        return np.concatenate([out, self.S.matvec(x[self.n:])])

    def _rmatvec(self, x):
        return self._matvec(x)


def stokes_block_precond(kkt: KktSystem, cfg: PrecondConfig | None = None) -> BlockDiagonal:
    """Block-diagonal preconditioner for the Stokes control KKT system."""
    cfg = cfg or PrecondConfig()
    steps = cfg.uzawa_steps or 5
    cheb = lambda b: ChebyshevConfig(cfg.cheb_steps, *b)  # noqa: E731
    M_v = Chebyshev(kkt.Q_v, cheb(Q2_BOUNDS))
    M_p = Chebyshev(kkt.Q_p, cheb(Q1_BOUNDS), scale=kkt.alpha)
    M_u = Chebyshev(kkt.Q_u, cheb(EDGE_BOUNDS), scale=kkt.beta)
    A_s = kkt.problem.stokes.A_s
    PA = RepeatedBlock(GeometricMultigrid(kkt.nu * A_s, cycles=cfg.mg_cycles))
    PS = Chebyshev(kkt.Q_p, cheb(Q1_BOUNDS), scale=1.0 / kkt.nu, dense_limit=DENSE_PRESSURE)
    U = InexactUzawa(kkt.F, kkt.B, PA, PS, UzawaConfig(steps, cfg.sigma, cfg.tau))
    Qcal = sp.block_diag([kkt.Q_v, kkt.alpha * kkt.Q_p])
    return BlockDiagonal([M_v, M_p, M_u, SchurTilde(U, Qcal)])


def reduced_symmetric_part(pk: PermutedKkt) -> sp.csr_matrix:
    """Scalar symmetric part of the reduced convection-diffusion block."""
    kkt, plan = pk.kkt, pk.plan
    n_s = kkt.problem.dofmap.n_s
    keep = np.setdiff1d(np.arange(n_s), plan.selected_nodes)
    F_s = kkt.F[:n_s, :n_s]
    Fr = F_s[keep][:, keep]
    return sp.csr_matrix(0.5 * (Fr + Fr.T))


def perm_precond(pk: PermutedKkt, cfg: PrecondConfig | None = None) -> BlockDiagonal:
    """Permutational preconditioner on the ordering of ``pk``.

    Raises :class:`DivergenceError` if the symmetric part of the reduced
    Oseen block is indefinite: the inner Uzawa iteration has no convergent
    setting then.
    """
    cfg = cfg or PrecondConfig()
    kkt, plan = pk.kkt, pk.plan
    steps = cfg.uzawa_steps or 30
    delta = cfg.delta if cfg.delta is not None else kkt.nu
    pscale = cfg.pressure_scale if cfg.pressure_scale is not None else kkt.nu
    cheb = lambda b: ChebyshevConfig(cfg.cheb_steps, *b)  # noqa: E731

    keep = plan.kept_velocity
    Q_vr = kkt.Q_v[keep][:, keep]
    FS = reduced_symmetric_part(pk)
    n_pos, n_neg, n_zero = inertia(FS)
    if n_neg or n_zero:
        raise DivergenceError(f"reduced symmetric part is indefinite ({n_neg} negative eigenvalues)")

    M_v = Chebyshev(Q_vr, cheb(Q2_BOUNDS))
    M_p = Chebyshev(kkt.Q_p, cheb(Q1_BOUNDS), scale=kkt.alpha)
    o = pk.offsets
    Z = pk.dropped[o[2]:o[3], o[2]:o[3]].toarray()
    M_33 = SaddleBlockPrecond(Z, plan.n)

    Fr = kkt.F[keep][:, keep]
    Br = kkt.B[:, keep]
    PA = RepeatedBlock(MIC0(FS, relax=cfg.mic_relax))
    PS = Chebyshev(kkt.Q_p, cheb(Q1_BOUNDS), scale=1.0 / pscale, dense_limit=DENSE_PRESSURE)
    U = InexactUzawa(Fr, Br, PA, PS, UzawaConfig(steps, delta, cfg.oseen_tau), check_divergence=True)
    Qcal = sp.block_diag([Q_vr, kkt.alpha * kkt.Q_p])
    return BlockDiagonal([M_v, M_p, M_33, SchurTilde(U, Qcal)])
