"""Q2-Q1 Taylor-Hood discretization of the square channel (-1, 1)^2.

Geometry: walls at y = +-1 (homogeneous Dirichlet), inflow at x = -1 (the
control boundary), outflow at x = 1 (zero stress). Level ``l`` has
``2**(l-1)`` elements per side, so ``2**l + 1`` Q2 nodes per direction.

Global node numbering is lexicographic with x running fastest; the nine
element-local Q2 nodes are numbered the same way (corners 0, 2, 6, 8, edge
midpoints 1, 3, 5, 7, centre 4 -- i.e. the usual 1..9 picture shifted by one).
Wall DOFs are kept in the system; Dirichlet conditions are imposed by zeroing
their rows and columns and putting 1 on the diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, DimensionError
from .sparse_core import as_csr

MIN_LEVEL, MAX_LEVEL = 2, 9

INTERIOR, WALL, INFLOW, OUTFLOW = 0, 1, 2, 3

_GX, _GW = np.polynomial.legendre.leggauss(3)


def _q2_1d(t):
    t = np.asarray(t, dtype=float)
    val = np.stack([0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)], axis=-1)
    der = np.stack([t - 0.5, -2.0 * t, t + 0.5], axis=-1)
    return val, der


def _q1_1d(t):
    t = np.asarray(t, dtype=float)
    val = np.stack([0.5 * (1.0 - t), 0.5 * (1.0 + t)], axis=-1)
    der = np.stack([-0.5 + 0.0 * t, 0.5 + 0.0 * t], axis=-1)
    return val, der


def _tensor_tables():
    """Basis values/derivatives at the 3x3 Gauss points of the reference square.

    Returns (weights[9], phi[9,9], dphi_dxi[9,9], dphi_deta[9,9], psi[9,4])
    indexed [quad point, local basis function].
    """
    v2, d2 = _q2_1d(_GX)
    v1, _ = _q1_1d(_GX)
    qx, qy = np.meshgrid(np.arange(3), np.arange(3))
    qx, qy = qx.ravel(), qy.ravel()
    bx, by = np.meshgrid(np.arange(3), np.arange(3))
    bx, by = bx.ravel(), by.ravel()
    w = _GW[qx] * _GW[qy]
    phi = v2[qx][:, bx] * v2[qy][:, by]
    dxi = d2[qx][:, bx] * v2[qy][:, by]
    deta = v2[qx][:, bx] * d2[qy][:, by]
    cx, cy = np.meshgrid(np.arange(2), np.arange(2))
    cx, cy = cx.ravel(), cy.ravel()
    psi = v1[qx][:, cx] * v1[qy][:, cy]
    return w, phi, dxi, deta, psi


_W, _PHI, _DXI, _DETA, _PSI = _tensor_tables()
_GPX = _GX[np.tile(np.arange(3), 3)]
_GPY = _GX[np.repeat(np.arange(3), 3)]


def q2_element_mass(h: float = 1.0) -> np.ndarray:
    """9x9 Q2 mass matrix of an ``h x h`` square element."""
    return (h / 2) ** 2 * np.einsum("q,qa,qb->ab", _W, _PHI, _PHI)


def q1_element_mass(h: float = 1.0) -> np.ndarray:
    return (h / 2) ** 2 * np.einsum("q,qa,qb->ab", _W, _PSI, _PSI)


def q2_edge_mass(h: float = 1.0) -> np.ndarray:
    """3x3 mass matrix of 1D quadratic elements on an edge of length ``h``."""
    v, _ = _q2_1d(_GX)
    return (h / 2) * np.einsum("q,qa,qb->ab", _GW, v, v)


def q2_element_stiffness() -> np.ndarray:
    # scale-free in 2D: (2/h)^2 from the gradients cancels (h/2)^2 from dx
    return np.einsum("q,qa,qb->ab", _W, _DXI, _DXI) + np.einsum("q,qa,qb->ab", _W, _DETA, _DETA)


@dataclass(frozen=True)
class ChannelMesh:
    level: int
    elements_per_side: int
    nq: int  # Q2 nodes per direction
    nl: int  # Q1 nodes per direction
    x: np.ndarray = field(repr=False)  # Q2 node coordinates
    y: np.ndarray = field(repr=False)
    q2_conn: np.ndarray = field(repr=False)  # (n_el, 9)
    q1_conn: np.ndarray = field(repr=False)  # (n_el, 4)
    node_kind: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        """Element side length."""
        return 2.0 / self.elements_per_side

    @property
    def node_spacing(self) -> float:
        return 2.0 / (self.nq - 1)

    @property
    def n_elements(self) -> int:
        return self.elements_per_side ** 2

    @property
    def n_q2(self) -> int:
        return self.nq * self.nq

    @property
    def n_q1(self) -> int:
        return self.nl * self.nl

    def element_centres(self):
        ne, h = self.elements_per_side, self.h
        ex, ey = np.meshgrid(np.arange(ne), np.arange(ne))
        return -1.0 + h * (ex.ravel() + 0.5), -1.0 + h * (ey.ravel() + 0.5)

    def q1_coordinates(self):
        t = np.linspace(-1.0, 1.0, self.nl)
        X, Y = np.meshgrid(t, t)
        return X.ravel(), Y.ravel()

    def q1_in_q2(self) -> np.ndarray:
        """Q2 node index of each Q1 (vertex) node."""
        iy, ix = np.divmod(np.arange(self.n_q1), self.nl)
        return 2 * iy * self.nq + 2 * ix


@dataclass(frozen=True)
class DofMap:
    n_s: int  # scalar Q2 nodes
    n_v: int  # velocity DOFs, x components first
    n_p: int
    n_u: int
    inflow_nodes: np.ndarray = field(repr=False)  # Q2 nodes on x = -1, bottom to top
    control_to_velocity: np.ndarray = field(repr=False)
    dirichlet_dofs: np.ndarray = field(repr=False)  # velocity DOFs on the walls

    @property
    def N(self) -> int:
        """Size of the KKT system."""
        return 2 * self.n_v + 2 * self.n_p + self.n_u

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return self.dirichlet_dofs[: self.dirichlet_dofs.size // 2]


def build_mesh(level: int) -> tuple[ChannelMesh, DofMap]:
    if not isinstance(level, (int, np.integer)) or not MIN_LEVEL <= level <= MAX_LEVEL:
        raise ConfigError(f"level must be an integer in [{MIN_LEVEL}, {MAX_LEVEL}], got {level!r}")
    level = int(level)
    ne = 2 ** (level - 1)
    nq = 2 * ne + 1
    nl = ne + 1
    t = np.linspace(-1.0, 1.0, nq)
    X, Y = np.meshgrid(t, t)
    x, y = X.ravel(), Y.ravel()

    ex, ey = np.meshgrid(np.arange(ne), np.arange(ne))
    ex, ey = ex.ravel(), ey.ravel()
    jx, jy = np.meshgrid(np.arange(3), np.arange(3))
    jx, jy = jx.ravel(), jy.ravel()
    q2_conn = (2 * ey[:, None] + jy[None, :]) * nq + (2 * ex[:, None] + jx[None, :])
    kx, ky = np.meshgrid(np.arange(2), np.arange(2))
    kx, ky = kx.ravel(), ky.ravel()
    q1_conn = (ey[:, None] + ky[None, :]) * nl + (ex[:, None] + kx[None, :])

    iy, ix = np.divmod(np.arange(nq * nq), nq)
    kind = np.full(nq * nq, INTERIOR, dtype=np.int8)
    kind[ix == 0] = INFLOW
    kind[ix == nq - 1] = OUTFLOW
    kind[(iy == 0) | (iy == nq - 1)] = WALL

    mesh = ChannelMesh(level, ne, nq, nl, x, y, q2_conn, q1_conn, kind)

    n_s = nq * nq
    inflow = np.flatnonzero(ix == 0)  # includes both corners, ordered by y
    walls = np.flatnonzero(kind == WALL)
    dofmap = DofMap(
        n_s=n_s,
        n_v=2 * n_s,
        n_p=nl * nl,
        n_u=2 * inflow.size,
        inflow_nodes=inflow,
        control_to_velocity=np.concatenate([inflow, n_s + inflow]),
        dirichlet_dofs=np.concatenate([walls, n_s + walls]),
    )
    return mesh, dofmap


def _scatter(conn_r, conn_c, local, shape) -> sp.csr_matrix:
    """Assemble element matrices ``local`` (n_el, a, b) or one shared (a, b)."""
    n_el = conn_r.shape[0]
    if local.ndim == 2:
        local = np.broadcast_to(local, (n_el,) + local.shape)
    rows = np.repeat(conn_r[:, :, None], conn_c.shape[1], axis=2)
    cols = np.repeat(conn_c[:, None, :], conn_r.shape[1], axis=1)
    M = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return as_csr(M)


def apply_dirichlet(M: sp.spmatrix, dofs: np.ndarray, diag: float = 1.0) -> sp.csr_matrix:
    """Zero the given rows and columns of a square matrix and set ``diag`` there."""
    keep = np.ones(M.shape[0])
    keep[dofs] = 0.0
    K = sp.diags(keep)
    D = np.zeros(M.shape[0])
    D[dofs] = diag
    return as_csr(K @ M @ K + sp.diags(D))


def zero_rows(M: sp.spmatrix, rows: np.ndarray) -> sp.csr_matrix:
    keep = np.ones(M.shape[0])
    keep[rows] = 0.0
    R = sp.diags(keep) @ M
    R = as_csr(R)
    R.eliminate_zeros()
    return R


def zero_cols(M: sp.spmatrix, cols: np.ndarray) -> sp.csr_matrix:
    keep = np.ones(M.shape[1])
    keep[cols] = 0.0
    R = as_csr(M @ sp.diags(keep))
    R.eliminate_zeros()
    return R


@dataclass(frozen=True)
class StokesBlocks:
    """Scalar and vector Galerkin matrices of the channel problem."""

    A_s: sp.csr_matrix  # scalar Laplacian
    A: sp.csr_matrix  # blkdiag(A_s, A_s)
    B: sp.csr_matrix  # n_p x n_v, negative divergence
    Q_s: sp.csr_matrix  # scalar Q2 mass
    Q_v: sp.csr_matrix  # blkdiag(Q_s, Q_s)
    Q_p: sp.csr_matrix
    dirichlet: bool


def assemble_stokes_blocks(mesh: ChannelMesh, dofmap: DofMap | None = None, *, dirichlet: bool = True) -> StokesBlocks:
    """Assemble Laplacian, divergence and mass matrices.

    With ``dirichlet=True`` the wall rows/columns of ``A`` get the unit-diagonal
    treatment and the matching columns of ``B`` are zeroed; the mass matrices
    are left untouched.
    """
    if dofmap is None:
        _, dofmap = build_mesh(mesh.level)
    h = mesh.h
    n_s, n_p = mesh.n_q2, mesh.n_q1
    A_s = _scatter(mesh.q2_conn, mesh.q2_conn, q2_element_stiffness(), (n_s, n_s))
    Q_s = _scatter(mesh.q2_conn, mesh.q2_conn, q2_element_mass(h), (n_s, n_s))
    Q_p = _scatter(mesh.q1_conn, mesh.q1_conn, q1_element_mass(h), (n_p, n_p))
    # -int psi_k d(phi_a)/dx; (2/h) from the derivative times (h/2)^2 from dx
    Bx_e = -(h / 2) * np.einsum("q,qk,qa->ka", _W, _PSI, _DXI)
    By_e = -(h / 2) * np.einsum("q,qk,qa->ka", _W, _PSI, _DETA)
    Bx = _scatter(mesh.q1_conn, mesh.q2_conn, Bx_e, (n_p, n_s))
    By = _scatter(mesh.q1_conn, mesh.q2_conn, By_e, (n_p, n_s))
    B = as_csr(sp.hstack([Bx, By]))
    if dirichlet:
        A_s = apply_dirichlet(A_s, dofmap.dirichlet_nodes)
        B = zero_cols(B, dofmap.dirichlet_dofs)
    A = as_csr(sp.block_diag([A_s, A_s]))
    Q_v = as_csr(sp.block_diag([Q_s, Q_s]))
    return StokesBlocks(A_s=A_s, A=A, B=B, Q_s=Q_s, Q_v=Q_v, Q_p=Q_p, dirichlet=dirichlet)


@dataclass(frozen=True)
class ControlBlocks:
    Qu_s: sp.csr_matrix  # scalar inflow mass, (n_u/2) x (n_u/2)
    Q_u: sp.csr_matrix
    Q_hat: sp.csr_matrix  # n_v x n_u


def assemble_control_blocks(mesh: ChannelMesh, dofmap: DofMap) -> ControlBlocks:
    """Inflow mass matrix and the velocity/control coupling matrix.

    ``Q_hat`` is returned exactly as assembled (no Dirichlet row zeroing), so
    row ``control_to_velocity[l]`` of ``Q_hat`` equals row ``l`` of ``Q_u``.
    """
    m = dofmap.inflow_nodes.size
    ne = mesh.elements_per_side
    conn = 2 * np.arange(ne)[:, None] + np.arange(3)[None, :]
    Qu_s = _scatter(conn, conn, q2_edge_mass(mesh.h), (m, m))
    Q_u = as_csr(sp.block_diag([Qu_s, Qu_s]))
    coo = Q_u.tocoo()
    Q_hat = sp.coo_matrix(
        (coo.data, (dofmap.control_to_velocity[coo.row], coo.col)), shape=(dofmap.n_v, dofmap.n_u)
    )
    return ControlBlocks(Qu_s=Qu_s, Q_u=Q_u, Q_hat=as_csr(Q_hat))


def _wind_at_quadrature(mesh: ChannelMesh, wind: np.ndarray):
    n_s = mesh.n_q2
    wx = wind[:n_s][mesh.q2_conn] @ _PHI.T  # (n_el, n_quad)
    wy = wind[n_s:][mesh.q2_conn] @ _PHI.T
    return wx, wy


def assemble_convection_scalar(mesh: ChannelMesh, wind) -> sp.csr_matrix:
    """Scalar convection matrix ``N_s[i, j] = int (w . grad phi_j) phi_i``."""
    wind = np.asarray(wind, dtype=float)
    if wind.shape != (2 * mesh.n_q2,):
        raise DimensionError(f"wind must have length {2 * mesh.n_q2}, got {wind.shape}")
    wx, wy = _wind_at_quadrature(mesh, wind)
    h = mesh.h
    # (2/h) * (h/2)^2 = h/2
    Ne = (h / 2) * (
        np.einsum("q,eq,qi,qj->eij", _W, wx, _PHI, _DXI) + np.einsum("q,eq,qi,qj->eij", _W, wy, _PHI, _DETA)
    )
    return _scatter(mesh.q2_conn, mesh.q2_conn, Ne, (mesh.n_q2, mesh.n_q2))


def assemble_convection(mesh: ChannelMesh, wind) -> sp.csr_matrix:
    """Vector convection matrix ``blkdiag(N_s, N_s)`` (no boundary treatment)."""
    N_s = assemble_convection_scalar(mesh, wind)
    return as_csr(sp.block_diag([N_s, N_s]))


def _default_vhat_x(x, y):
    y = np.asarray(y, dtype=float)
    return np.where((y >= 0.0) & (y < 1.0), 4.0 * y - 4.0 * y * y, 0.0)


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


@dataclass(frozen=True)
class TargetProfile:
    """Desired state; defaults are the half-channel parabola and zero pressure."""

    vhat_x: Callable = _default_vhat_x
    vhat_y: Callable = _zero
    phat: Callable = _zero


def _quad_points(mesh: ChannelMesh):
    cx, cy = mesh.element_centres()
    h = mesh.h
    return cx[:, None] + 0.5 * h * _GPX[None, :], cy[:, None] + 0.5 * h * _GPY[None, :]


def build_targets(mesh: ChannelMesh, profile: TargetProfile | None = None, alpha: float = 1.0):
    """Load vectors ``b = (int phi_j . vhat)`` and ``d = (int psi_k phat)``.

    ``alpha`` is accepted for symmetry with the KKT builder; the scaling by
    alpha happens there.
    """
    profile = profile or TargetProfile()
    X, Y = _quad_points(mesh)
    wdet = _W * (mesh.h / 2) ** 2
    n_s, n_p = mesh.n_q2, mesh.n_q1
    bx = np.zeros(n_s)
    by = np.zeros(n_s)
    d = np.zeros(n_p)
    np.add.at(bx, mesh.q2_conn, (profile.vhat_x(X, Y) * wdet) @ _PHI)
    np.add.at(by, mesh.q2_conn, (profile.vhat_y(X, Y) * wdet) @ _PHI)
    np.add.at(d, mesh.q1_conn, (profile.phat(X, Y) * wdet) @ _PSI)
    return np.concatenate([bx, by]), d


def interpolate_velocity(mesh: ChannelMesh, fx: Callable, fy: Callable) -> np.ndarray:
    """Nodal Q2 interpolant of a velocity field."""
    return np.concatenate([fx(mesh.x, mesh.y), fy(mesh.x, mesh.y)]).astype(float)


def interpolate_pressure(mesh: ChannelMesh, f: Callable) -> np.ndarray:
    X, Y = mesh.q1_coordinates()
    return np.asarray(f(X, Y), dtype=float)


def forward_stokes(blocks: StokesBlocks, control: ControlBlocks, dofmap: DofMap, u: np.ndarray, nu: float = 1.0):
    """Solve the forward Stokes problem driven by boundary traction ``u``.

    Uses a sparse direct solve; intended as a reference, not for large grids.
    """
    if not blocks.dirichlet:
        raise ConfigError("forward solve needs Dirichlet-modified blocks")
    Qh = zero_rows(control.Q_hat, dofmap.dirichlet_dofs)
    F = apply_dirichlet(nu * blocks.A, dofmap.dirichlet_dofs)
    K = sp.bmat([[F, blocks.B.T], [blocks.B, None]], format="csc")
    rhs = np.concatenate([Qh @ u, np.zeros(dofmap.n_p)])
    sol = spla.spsolve(K, rhs)
    return sol[: dofmap.n_v], sol[dofmap.n_v:]


def dimension_summary(named: dict) -> list[dict]:
    """Rows of (name, nrows, ncols, nnz) for CSV export."""
    return [
        {"name": k, "nrows": int(M.shape[0]), "ncols": int(M.shape[1]), "nnz": int(M.nnz)}
        for k, M in named.items()
    ]
