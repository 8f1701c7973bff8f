"""Spectral experiments on the channel control problem.

All routines are deterministic and work with dense matrices, so they are
meant for the coarse levels (the dense cap guards against accidents).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import fem_channel as fem
from .errors import CapError, ConfigError, DimensionError
from .kkt import ChannelProblem, build_stokes_kkt
from .precond.chebyshev import EDGE_BOUNDS, Q1_BOUNDS, Q2_BOUNDS, Chebyshev, ChebyshevConfig
from .precond.multigrid import GeometricMultigrid
from .precond.uzawa import InexactUzawa, RepeatedBlock, UzawaConfig
from .sparse_core import DENSE_CAP, SpectrumReport, gen_sym_eig, sym_eig, to_dense

GOLDEN = ((1 + np.sqrt(5)) / 2, 1.0, (1 - np.sqrt(5)) / 2)
# inflow-edge node subsets of the Q2 element (1-based, lexicographic)
EDGE_PATTERNS = ((), (1,), (4,), (1, 4), (1, 7), (1, 4, 7))


def write_csv(path, header, rows, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.16g}" if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------- element bounds

def mass_bounds_table() -> list[dict]:
    """Extreme eigenvalues of ``D_e^{-1} Q_e`` for the three element mass matrices."""
    rows = []
    for name, Qe in (("Q2 element", fem.q2_element_mass()), ("Q1 element", fem.q1_element_mass()),
                     ("Q2 edge", fem.q2_edge_mass())):
        rep = gen_sym_eig(Qe, np.diag(np.diag(Qe)))
        rows.append({"matrix": name, "lambda_min": rep.min, "lambda_max": rep.max})
    return rows


def element_elimination_eigs(pattern) -> SpectrumReport:
    """Spectrum of ``(D_e^J)^{-1} Q_e^J`` with the local Q2 nodes ``J`` removed.

    Nodes are numbered 1..9 lexicographically (1 bottom-left, 5 centre,
    7 top-left). Any proper subset is accepted.
    """
    J = sorted(set(int(j) for j in pattern))
    if len(J) != len(tuple(pattern)) or any(j < 1 or j > 9 for j in J) or len(J) == 9:
        raise ConfigError(f"invalid elimination pattern {tuple(pattern)!r}")
    keep = [i for i in range(9) if i + 1 not in J]
    Qe = fem.q2_element_mass()[np.ix_(keep, keep)]
    return gen_sym_eig(Qe, np.diag(np.diag(Qe)))


def parse_pattern(text: str) -> tuple:
    text = text.strip().strip("{}")
    if not text or text in ("empty", "none"):
        return ()
    try:
        return tuple(int(t) for t in text.replace(" ", "").split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse pattern {text!r}") from exc


# ---------------------------------------------------------------- Chebyshev

def _mass(problem: ChannelProblem, which: str):
    if which == "Q_v":
        return problem.stokes.Q_s, Q2_BOUNDS
    if which == "Q_p":
        return problem.stokes.Q_p, Q1_BOUNDS
    if which == "Q_u":
        return problem.control.Qu_s, EDGE_BOUNDS
    raise ConfigError(f"unknown mass matrix {which!r}")


def mass_spectrum_report(which: str, level: int, cheb_steps: int | None = 20,
                         cap: int = DENSE_CAP) -> SpectrumReport:
    """Spectrum of ``M_C^{-1} Q`` for the Chebyshev operator ``M_C^{-1}``.

    The velocity and control matrices are block diagonal with two equal
    blocks, so the scalar block is used. ``cheb_steps=None`` substitutes the
    exact inverse.
    """
    problem = ChannelProblem.build(level)
    Q, bounds = _mass(problem, which)
    if Q.shape[0] > cap:
        raise CapError(f"{which} at level {level} exceeds the dense cap {cap}")
    Qd = to_dense(Q, cap)
    if cheb_steps is None:
        C = np.linalg.inv(Qd)
    else:
        C = Chebyshev(Q, ChebyshevConfig(cheb_steps, *bounds)).as_matrix()
    C = 0.5 * (C + C.T)
    L = np.linalg.cholesky(C)
    return sym_eig(L.T @ Qd @ L)


# ---------------------------------------------------------------- interlacing

@dataclass
class InterlacingResult:
    passed: bool
    rank: int
    worst_violation: float
    offending_index: int | None
    eig_A: np.ndarray = field(repr=False)
    eig_B: np.ndarray = field(repr=False)


def lowrank_interlacing_check(A, L, tol: float = 1e-10, rank: int | None = None) -> InterlacingResult:
    """Check ``lambda_i(A) <= lambda_i(A+L) <= lambda_{i-m}(A)`` (descending order).

    ``L`` must be symmetric positive semidefinite of rank ``m``; the rank is
    detected numerically unless given.
    """
    A = np.asarray(A, dtype=float)
    L = np.asarray(L, dtype=float)
    if A.shape != L.shape or A.shape[0] != A.shape[1]:
        raise DimensionError("A and L must be square of equal size")
    wl = np.linalg.eigvalsh(0.5 * (L + L.T))
    scale = max(np.abs(wl).max(initial=0.0), 1.0)
    if wl.min(initial=0.0) < -1e-10 * scale:
        raise ConfigError("L is not positive semidefinite")
    m = int((wl > 1e-10 * scale).sum()) if rank is None else rank
    a = np.linalg.eigvalsh(0.5 * (A + A.T))[::-1]
    B = A + L
    b = np.linalg.eigvalsh(0.5 * (B + B.T))[::-1]
    scale_ab = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1.0)
    worst, where = 0.0, None
    for i in range(a.size):
        lo_gap = a[i] - b[i]  # b_i >= a_i
        hi_gap = b[i] - a[i - m] if i >= m else -np.inf
        gap = max(lo_gap, hi_gap)
        if gap > worst:
            worst, where = gap, i
    passed = worst <= tol * scale_ab
    return InterlacingResult(passed, m, worst, None if passed else where, a, b)


def random_interlacing_trials(trials: int = 50, n: int = 30, ranks=(1, 2, 5), seed: int = 0) -> list[InterlacingResult]:
    rng = np.random.default_rng(seed)
    out = []
    for t in range(trials):
        m = ranks[t % len(ranks)]
        X = rng.standard_normal((n, n))
        A = X + X.T
        C = rng.standard_normal((n, m))
        out.append(lowrank_interlacing_check(A, C @ C.T, rank=m))
    return out


def _dense_blocks(kkt, cap):
    if kkt.N > cap:
        raise CapError(f"KKT size {kkt.N} exceeds the dense cap {cap}")
    n_v, n_p, n_u = kkt.sizes[:3]
    F = to_dense(kkt.F, cap)
    B = to_dense(kkt.B, cap)
    K = np.block([[F, B.T], [B, np.zeros((n_p, n_p))]])
    Qcal = scipy.linalg.block_diag(to_dense(kkt.Q_v, cap), kkt.alpha * to_dense(kkt.Q_p, cap))
    Qh = to_dense(kkt.Q_hat, cap)
    Lt = np.vstack([Qh, np.zeros((n_p, n_u))])  # control coupling of the Schur rows
    return K, Qcal, Lt


@dataclass
class SchurReport:
    eigenvalues: np.ndarray = field(repr=False)
    n_u: int
    cluster_max: float  # largest eigenvalue outside the top n_u
    minimum: float
    top: np.ndarray = field(repr=False)

    def rows(self):
        return [(i, float(v)) for i, v in enumerate(self.eigenvalues)]


def schur_interlacing_report(level: int, alpha: float, beta: float, cap: int = 2000) -> SchurReport:
    """Generalized eigenvalues of ``(S, S~)`` with ``S = S~ + (1/beta) Q_hat Q_u^{-1} Q_hat^T``."""
    problem = ChannelProblem.build(level)
    kkt = build_stokes_kkt(problem, alpha, beta)
    K, Qcal, Lt = _dense_blocks(kkt, cap)
    St = K @ np.linalg.solve(Qcal, K.T)
    S = St + Lt @ np.linalg.solve(beta * to_dense(kkt.Q_u, cap), Lt.T)
    w = gen_sym_eig(S, St, method="lapack").eigenvalues
    n_u = kkt.sizes[2]
    return SchurReport(w, n_u, float(w[:-n_u].max()), float(w.min()), w[-n_u:])


# ---------------------------------------------------------------- Murphy et al.

def murphy_ideal_check(level: int = 2, alpha: float = 1e-3, beta: float = 1e-3, schur: str = "exact",
                       cap: int = 2000) -> SpectrumReport:
    """Spectrum of ``blkdiag(A11, S)^{-1} A`` for the Stokes KKT matrix.

    ``schur="exact"`` uses ``S = B A11^{-1} B^T``; ``schur="tilde"`` uses the
    approximation ``K Q^{-1} K^T`` without the control term.
    """
    problem = ChannelProblem.build(level)
    kkt = build_stokes_kkt(problem, alpha, beta)
    if kkt.N > cap:
        raise CapError(f"KKT size {kkt.N} exceeds the dense cap {cap}")
    A = to_dense(kkt.matrix, cap)
    m = sum(kkt.sizes[:3])
    A11, Bc = A[:m, :m], A[m:, :m]
    if schur == "exact":
        S = Bc @ np.linalg.solve(A11, Bc.T)
    elif schur == "tilde":
        K, Qcal, _ = _dense_blocks(kkt, cap)
        S = K @ np.linalg.solve(Qcal, K.T)
    else:
        raise ConfigError(f"unknown Schur variant {schur!r}")
    P = scipy.linalg.block_diag(A11, S)
    return gen_sym_eig(A, P, method="lapack")


def distance_to_golden(rep: SpectrumReport) -> float:
    w = rep.eigenvalues
    return float(np.min(np.abs(w[:, None] - np.array(GOLDEN)[None, :]), axis=1).max())


# ---------------------------------------------------------------- Braess-Peisker

def _stokes_uzawa(kkt, steps, mg_cycles=5, cheb_steps=20):
    PA = RepeatedBlock(GeometricMultigrid(kkt.problem.stokes.A_s, cycles=mg_cycles))
    PS = Chebyshev(kkt.Q_p, ChebyshevConfig(cheb_steps, *Q1_BOUNDS))
    return InexactUzawa(kkt.F, kkt.B, PA, PS, UzawaConfig(steps))


def braess_peisker_eta(level: int, steps: int | None, probes: int = 5, seed: int = 0,
                       alpha: float = 1e-3, beta: float = 1e-3) -> float:
    """Largest relative error of the Uzawa sweep against an exact solve.

    ``steps=None`` stands in for an exact solve and returns 0.
    """
    if steps is None:
        return 0.0
    problem = ChannelProblem.build(level)
    kkt = build_stokes_kkt(problem, alpha, beta)
    K = sp.bmat([[kkt.F, kkt.B.T], [kkt.B, None]], format="csc")
    import scipy.sparse.linalg as spla

    lu = spla.splu(K)
    U = _stokes_uzawa(kkt, steps)
    rng = np.random.default_rng(seed)
    eta = 0.0
    for _ in range(probes):
        b = rng.standard_normal(K.shape[0])
        x = lu.solve(b)
        eta = max(eta, np.linalg.norm(U.matvec(b) - x) / np.linalg.norm(x))
    return float(eta)


@dataclass
class BraessPeiskerReport:
    eta: float  # ||Q^{1/2} (U K - I) Q^{-1/2}||_2
    lower: float
    upper: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def holds(self) -> bool:
        w = self.eigenvalues
        return bool(w.min() >= self.lower * (1 - 1e-10) and w.max() <= self.upper * (1 + 1e-10))


def braess_peisker_check(level: int, steps: int, alpha: float = 1e-3, beta: float = 1e-3,
                         cap: int = 2000) -> BraessPeiskerReport:
    """Spectrum of ``(U^T Q U)(K Q^{-1} K)`` against ``[(1-eta)^2, (1+eta)^2]``.

    With ``G = Q^{1/2} U K Q^{-1/2}`` the product is similar to ``G G^T``, whose
    eigenvalues are squared singular values of ``G``, so both bounds follow
    from ``eta = ||G - I||``. The mass part is exact here (``c = C = 1``).
    """
    problem = ChannelProblem.build(level)
    kkt = build_stokes_kkt(problem, alpha, beta)
    K, Qcal, _ = _dense_blocks(kkt, cap)
    U = _stokes_uzawa(kkt, steps).matmat(np.eye(K.shape[0]))
    w, V = np.linalg.eigh(Qcal)
    Qh = (V * np.sqrt(w)) @ V.T
    Qmh = (V / np.sqrt(w)) @ V.T
    G = Qh @ U @ K @ Qmh
    eta = float(np.linalg.norm(G - np.eye(G.shape[0]), 2))
    M = U.T @ Qcal @ U
    St = K @ np.linalg.solve(Qcal, K.T)
    ev = np.sort(np.linalg.eigvals(M @ St).real)
    return BraessPeiskerReport(eta, (1 - eta) ** 2 if eta < 1 else 0.0, (1 + eta) ** 2, ev)


# ---------------------------------------------------------------- convection

def scalar_symmetric_part(problem: ChannelProblem, wind, nu: float) -> sp.csr_matrix:
    """Symmetric part of ``nu A_s + N_s(wind)`` with the wall treatment."""
    dm = problem.dofmap
    F = nu * problem.stokes.A_s + fem.assemble_convection_scalar(problem.mesh, wind)
    F = fem.apply_dirichlet(F, dm.dirichlet_nodes)
    return sp.csr_matrix(0.5 * (F + F.T))


def convection_boundary_support(problem: ChannelProblem, wind) -> float:
    """Largest entry of ``N + N^T`` in rows and columns off the inflow/outflow edges."""
    N = fem.assemble_convection_scalar(problem.mesh, wind)
    S = (N + N.T).tocoo()
    kind = problem.mesh.node_kind
    on = (kind == fem.INFLOW) | (kind == fem.OUTFLOW)
    # corners are walls but sit on both edges
    ix = np.arange(problem.mesh.n_q2) % problem.mesh.nq
    on |= (ix == 0) | (ix == problem.mesh.nq - 1)
    off = ~(on[S.row] & on[S.col])
    return float(np.abs(S.data[off]).max(initial=0.0))


def convection_symmetric_report(problem: ChannelProblem, nu: float, wind, strides=(1, 2, 4),
                                cap: int = DENSE_CAP) -> list[dict]:
    """Negative-eigenvalue counts, condition numbers and inflow localization.

    Rows: the full scalar ``F_S`` and ``F_S`` with every k-th inflow node
    deleted for each ``k`` in ``strides``. ``inflow_mass`` is the share of the
    squared norm of the negative eigenvectors that sits on the inflow nodes
    and their first interior neighbours.
    """
    from .kkt import plan_permutation

    FS = scalar_symmetric_part(problem, wind, nu)
    if FS.shape[0] > cap:
        raise CapError(f"F_S of size {FS.shape[0]} exceeds the dense cap {cap}")
    ix = np.arange(problem.mesh.n_q2) % problem.mesh.nq
    near_inflow = ix <= 1
    rows = []
    for k in (None,) + tuple(strides):
        if k is None:
            keep = np.arange(FS.shape[0])
        else:
            sel = plan_permutation(problem.dofmap, k).selected_nodes
            keep = np.setdiff1d(np.arange(FS.shape[0]), sel)
        M = to_dense(FS[keep][:, keep], cap)
        w, V = np.linalg.eigh(M)
        neg = w < 0
        if neg.any():
            mass = float((V[near_inflow[keep]][:, neg] ** 2).sum() / neg.sum())
        else:
            mass = float("nan")
        pos_mass = np.median((V[near_inflow[keep]][:, ~neg] ** 2).sum(axis=0))
        rows.append({
            "matrix": "F_S" if k is None else f"F_S stride {k}",
            "stride": k,
            "n_negative": int(neg.sum()),
            "condition_number": float(np.abs(w).max() / np.abs(w).min()),
            "inflow_mass": mass,
            "median_positive_inflow_mass": float(pos_mass),
            "eigenvalues": w,
        })
    return rows
