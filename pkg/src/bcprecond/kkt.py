"""KKT systems of the Stokes/Oseen boundary control problem.

Unknowns are ordered ``(v, p, u, lam, mu)``: state velocity, state pressure,
control, velocity adjoint, pressure adjoint. The permutational reordering
moves the state *and* adjoint velocity DOFs of selected inflow nodes into the
third block, next to the control, so the remaining convection-diffusion block
is square and loses the inflow modes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem_channel as fem
from .errors import ConfigError, DimensionError
from .sparse_core import as_csr

BLOCK_NAMES = ("v", "p", "u", "lam", "mu")
# nonzero blocks of the unpermuted 5x5 structure (0-based)
BLOCK_PATTERN = frozenset(
    {(0, 0), (0, 3), (0, 4), (1, 1), (1, 3), (2, 2), (2, 3), (3, 0), (3, 1), (3, 2), (4, 0)}
)
VALID_STRIDES = (1, 2, 4, 6, 8)


@dataclass
class ChannelProblem:
    """Mesh, DOF map, assembled matrices and targets for one grid level."""

    mesh: fem.ChannelMesh
    dofmap: fem.DofMap
    stokes: fem.StokesBlocks
    control: fem.ControlBlocks
    b: np.ndarray
    d: np.ndarray

    @classmethod
    def build(cls, level: int, profile: fem.TargetProfile | None = None) -> "ChannelProblem":
        mesh, dofmap = fem.build_mesh(level)
        stokes = fem.assemble_stokes_blocks(mesh, dofmap)
        control = fem.assemble_control_blocks(mesh, dofmap)
        b, d = fem.build_targets(mesh, profile)
        return cls(mesh, dofmap, stokes, control, b, d)

    @property
    def level(self) -> int:
        return self.mesh.level

    def convection(self, wind) -> sp.csr_matrix:
        return fem.assemble_convection(self.mesh, wind)


@dataclass
class KktSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    F: sp.csr_matrix  # A (Stokes) or nu*A + N (Oseen), walls modified
    B: sp.csr_matrix
    Q_v: sp.csr_matrix
    Q_p: sp.csr_matrix  # unscaled; the KKT holds alpha * Q_p
    Q_u: sp.csr_matrix  # unscaled; the KKT holds beta * Q_u
    Q_hat: sp.csr_matrix  # wall rows zeroed
    alpha: float
    beta: float
    nu: float
    problem: ChannelProblem = field(repr=False)
    wind: np.ndarray | None = field(default=None, repr=False)
    sizes: tuple = ()

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def block(self, name: str) -> slice:
        i = BLOCK_NAMES.index(name)
        o = self.offsets
        return slice(int(o[i]), int(o[i + 1]))

    def split(self, x) -> dict:
        return {name: x[self.block(name)] for name in BLOCK_NAMES}

    def block_ranges(self) -> dict:
        return {name: [self.block(name).start, self.block(name).stop] for name in BLOCK_NAMES}

    @property
    def is_oseen(self) -> bool:
        return self.wind is not None

    def residual(self, x) -> np.ndarray:
        return self.rhs - self.matrix @ x


def _assemble(F, B, Q_v, Q_p, Q_u, Q_hat, alpha, beta):
    M = sp.bmat(
        [
            [Q_v, None, None, F.T, B.T],
            [None, alpha * Q_p, None, B, None],
            [None, None, beta * Q_u, -Q_hat.T, None],
            [F, B.T, -Q_hat, None, None],
            [B, None, None, None, None],
        ],
        format="csr",
    )
    return as_csr(M)


def _check_params(alpha, beta, nu=1.0):
    if not (alpha > 0 and beta > 0):
        raise ConfigError(f"alpha and beta must be positive, got {alpha}, {beta}")
    if not nu > 0:
        raise ConfigError(f"nu must be positive, got {nu}")


def build_stokes_kkt(problem: ChannelProblem, alpha: float, beta: float) -> KktSystem:
    _check_params(alpha, beta)
    return _build(problem, problem.stokes.A, alpha, beta, 1.0, None)


def build_oseen_kkt(problem: ChannelProblem, wind, alpha: float, beta: float, nu: float) -> KktSystem:
    """Oseen KKT with ``F = nu*A + N(wind)``; the wall rows of F are reset."""
    _check_params(alpha, beta, nu)
    dm = problem.dofmap
    wind = np.asarray(wind, dtype=float)
    if wind.shape != (dm.n_v,):
        raise DimensionError(f"wind must have length {dm.n_v}, got {wind.shape}")
    F = fem.apply_dirichlet(nu * problem.stokes.A + problem.convection(wind), dm.dirichlet_dofs)
    return _build(problem, F, alpha, beta, nu, wind)


def _build(problem, F, alpha, beta, nu, wind):
    dm = problem.dofmap
    st = problem.stokes
    Q_hat = fem.zero_rows(problem.control.Q_hat, dm.dirichlet_dofs)
    M = _assemble(F, st.B, st.Q_v, st.Q_p, problem.control.Q_u, Q_hat, alpha, beta)
    rhs = np.concatenate([problem.b, alpha * problem.d, np.zeros(dm.n_u + dm.n_v + dm.n_p)])
    sizes = (dm.n_v, dm.n_p, dm.n_u, dm.n_v, dm.n_p)
    return KktSystem(
        matrix=M, rhs=rhs, F=F, B=st.B, Q_v=st.Q_v, Q_p=st.Q_p, Q_u=problem.control.Q_u,
        Q_hat=Q_hat, alpha=alpha, beta=beta, nu=nu, problem=problem, wind=wind, sizes=sizes,
    )


@dataclass(frozen=True)
class PermutationPlan:
    stride: int | None
    offset: int
    selected_nodes: np.ndarray  # Q2 node ids on the inflow edge
    moved_velocity: np.ndarray  # velocity DOFs (x then y) of the selected nodes
    n_v: int
    n_p: int
    n_u: int

    @property
    def n(self) -> int:
        """Control plus moved state DOFs: ``n_u + 2 * |selected|``."""
        return self.n_u + self.moved_velocity.size

    @property
    def n33(self) -> int:
        """Full size of the third block (adds the moved adjoint DOFs)."""
        return self.n + self.moved_velocity.size

    @property
    def is_identity(self) -> bool:
        return self.moved_velocity.size == 0

    @property
    def kept_velocity(self) -> np.ndarray:
        mask = np.ones(self.n_v, dtype=bool)
        mask[self.moved_velocity] = False
        return np.flatnonzero(mask)

    @property
    def sizes(self) -> tuple:
        nk = self.n_v - self.moved_velocity.size
        return (nk, self.n_p, self.n33, nk, self.n_p)

    def order(self) -> np.ndarray:
        """Old index of each new position: ``P x == x[order]``."""
        n_v, n_p, n_u = self.n_v, self.n_p, self.n_u
        o_p, o_u, o_lam, o_mu = n_v, n_v + n_p, n_v + n_p + n_u, 2 * n_v + n_p + n_u
        keep = self.kept_velocity
        mv = self.moved_velocity
        return np.concatenate([
            keep,
            o_p + np.arange(n_p),
            o_u + np.arange(n_u),
            mv,
            o_lam + mv,
            o_lam + keep,
            o_mu + np.arange(n_p),
        ])

    def apply(self, x) -> np.ndarray:
        return np.asarray(x)[self.order()]

    def unapply(self, y) -> np.ndarray:
        x = np.empty_like(y)
        x[self.order()] = y
        return x

    def to_json(self) -> str:
        return json.dumps({
            "stride": self.stride,
            "offset": self.offset,
            "selected_nodes": self.selected_nodes.tolist(),
            "moved_velocity": self.moved_velocity.tolist(),
            "n": self.n,
            "n33": self.n33,
            "sizes": list(self.sizes),
        })


def plan_permutation(dofmap: fem.DofMap, stride: int | None, offset: int = 0) -> PermutationPlan:
    """Select every ``stride``-th inflow node, wall to wall, starting at ``offset``.

    Corner nodes are walls and never selected. ``stride=None`` gives the
    identity plan.
    """
    if stride is not None and stride not in VALID_STRIDES:
        raise ConfigError(f"stride must be one of {VALID_STRIDES} or None, got {stride!r}")
    if offset < 0:
        raise ConfigError("offset must be nonnegative")
    candidates = dofmap.inflow_nodes[1:-1]
    sel = candidates[offset::stride] if stride is not None else candidates[:0]
    moved = np.concatenate([sel, dofmap.n_s + sel])
    return PermutationPlan(stride, offset, sel, moved, dofmap.n_v, dofmap.n_p, dofmap.n_u)


@dataclass
class PermutedKkt:
    """``P A P^T`` with its new 5-block partition, plus the fill-dropped copy."""

    matrix: sp.csr_matrix
    dropped: sp.csr_matrix
    rhs: np.ndarray
    plan: PermutationPlan
    kkt: KktSystem = field(repr=False)

    @property
    def sizes(self) -> tuple:
        return self.plan.sizes

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def block(self, i: int, j: int) -> sp.csr_matrix:
        o = self.offsets
        return self.dropped[o[i]:o[i + 1], o[j]:o[j + 1]]

    def unpermute(self, y) -> np.ndarray:
        return self.plan.unapply(y)


def apply_permutation_and_drop(kkt: KktSystem, plan: PermutationPlan) -> PermutedKkt:
    """Symmetric reordering and removal of the fill outside the original block pattern."""
    if (plan.n_v, plan.n_p, plan.n_u) != (kkt.sizes[0], kkt.sizes[1], kkt.sizes[2]):
        raise DimensionError("plan does not match the KKT dimensions")
    order = plan.order()
    PAP = as_csr(kkt.matrix[order][:, order])
    offs = np.concatenate([[0], np.cumsum(plan.sizes)])
    blk = np.searchsorted(offs, np.arange(PAP.shape[0]), side="right") - 1
    coo = PAP.tocoo()
    allowed = np.zeros((5, 5), dtype=bool)
    for i, j in BLOCK_PATTERN:
        allowed[i, j] = True
    keep = allowed[blk[coo.row], blk[coo.col]]
    dropped = as_csr(sp.coo_matrix((coo.data[keep], (coo.row[keep], coo.col[keep])), shape=PAP.shape))
    return PermutedKkt(matrix=PAP, dropped=dropped, rhs=kkt.rhs[order], plan=plan, kkt=kkt)


def control_energy(kkt: KktSystem, x) -> float:
    u = x[kkt.block("u")]
    return float(u @ (kkt.Q_u @ u))
