import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from bcprecond.errors import ConfigError, DivergenceError
from bcprecond.kkt import ChannelProblem, apply_permutation_and_drop, build_oseen_kkt, plan_permutation
from bcprecond.precond.chebyshev import Q1_BOUNDS, Q2_BOUNDS, Chebyshev, ChebyshevConfig, chebyshev_apply
from bcprecond.precond.mic import MIC0, mic0_apply
from bcprecond.precond.multigrid import GeometricMultigrid, mg_vcycle_apply, prolongation
from bcprecond.precond.stack import (
    PrecondConfig, SaddleBlockPrecond, perm_precond, reduced_symmetric_part, stokes_block_precond,
)
from bcprecond.precond.uzawa import InexactUzawa, RepeatedBlock, UzawaConfig
from bcprecond.sparse_core import gen_sym_eig


def _probe_linear_spd(M, n, rng):
    x, y = rng.standard_normal(n), rng.standard_normal(n)
    Mx, My = M.matvec(x), M.matvec(y)
    assert np.linalg.norm(M.matvec(2 * x - 3 * y) - 2 * Mx + 3 * My) <= 1e-12 * np.linalg.norm(Mx) * 5
    assert abs(y @ Mx - x @ My) <= 1e-10 * np.linalg.norm(Mx) * np.linalg.norm(y)
    assert x @ Mx > 0


# ---------------------------------------------------------------- Chebyshev

def test_chebyshev_config_errors():
    with pytest.raises(ConfigError):
        ChebyshevConfig(steps=0)
    with pytest.raises(ConfigError):
        ChebyshevConfig(20, 2.0, 1.0)


def test_chebyshev_error_decreases(problem3):
    Q = problem3.stokes.Q_p
    x = np.random.default_rng(0).standard_normal(Q.shape[0])
    b = Q @ x
    errs = [np.linalg.norm(chebyshev_apply(ChebyshevConfig(k, *Q1_BOUNDS), Q, b) - x) for k in (2, 5, 10, 20)]
    assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))
    assert ChebyshevConfig(20, *Q1_BOUNDS).error_bound() < ChebyshevConfig(10, *Q1_BOUNDS).error_bound()


def test_chebyshev_spectrum_level3(problem3):
    Q = problem3.stokes.Q_s
    C = Chebyshev(Q, ChebyshevConfig(20, *Q2_BOUNDS)).as_matrix()
    w = gen_sym_eig(Q.toarray(), np.linalg.inv(0.5 * (C + C.T))).eigenvalues
    # frozen from the first run: lambda in [1 - 8.74e-8, 1 + 7.82e-8]
    assert w.min() == pytest.approx(1 - 8.7397e-8, abs=1e-11)
    assert w.max() == pytest.approx(1 + 7.8183e-8, abs=1e-11)


def test_chebyshev_dense_table_matches(problem3, rng):
    Q = problem3.stokes.Q_p
    a = Chebyshev(Q, ChebyshevConfig(20, *Q1_BOUNDS), scale=0.3)
    b = Chebyshev(Q, ChebyshevConfig(20, *Q1_BOUNDS), scale=0.3, dense_limit=10**4)
    R = rng.standard_normal((Q.shape[0], 3))
    np.testing.assert_allclose(a.matmat(R), b.matmat(R), rtol=1e-12, atol=1e-12)
    _probe_linear_spd(a, Q.shape[0], rng)


# ---------------------------------------------------------------- multigrid

def test_prolongation_interpolates_linears():
    P = prolongation(3)
    nq_c, nq_f = 5, 9
    t_c, t_f = np.linspace(-1, 1, nq_c), np.linspace(-1, 1, nq_f)
    Xc, Yc = np.meshgrid(t_c, t_c)
    Xf, Yf = np.meshgrid(t_f, t_f)
    f = lambda x, y: (1 - y**2) * (0.3 + x)  # noqa: E731  vanishes on the walls
    np.testing.assert_allclose(P @ f(Xc, Yc).ravel(), f(Xf, Yf).ravel(), atol=1e-14)


@pytest.mark.parametrize("level", [3, 4, 5])
def test_multigrid_contraction(level):
    A = ChannelProblem.build(level).stokes.A_s
    M = GeometricMultigrid(A, cycles=1)
    x = np.random.default_rng(level).standard_normal(A.shape[0])
    b = A @ x
    err = [np.linalg.norm(x - mg_vcycle_apply(A, b, cycles=k)) for k in (1, 2, 4)]
    assert err[0] < 0.2 * np.linalg.norm(x)
    assert err[1] < err[0] and err[2] < err[1]
    _probe_linear_spd(M, A.shape[0], np.random.default_rng(0))


def test_multigrid_ten_cycles_solve():
    A = ChannelProblem.build(6).stokes.A_s
    b = np.random.default_rng(2).standard_normal(A.shape[0])
    y = mg_vcycle_apply(A, b, cycles=10)
    assert np.linalg.norm(b - A @ y) <= 1e-6 * np.linalg.norm(b)


def test_multigrid_needs_hierarchy():
    with pytest.raises(ConfigError):
        GeometricMultigrid(sp.eye(10).tocsr())


# ---------------------------------------------------------------- MIC(0)

def test_mic_exact_on_tridiagonal(rng):
    n = 30
    T = sp.diags([-np.ones(n - 1), 2.5 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()
    b = rng.standard_normal(n)
    np.testing.assert_allclose(T @ mic0_apply(T, b), b, atol=1e-12)


def test_mic_row_sums_and_condition():
    A = ChannelProblem.build(3).stokes.A
    M = MIC0(A)
    LDL = M.factor_matrix()
    np.testing.assert_allclose(LDL @ np.ones(A.shape[0]), A @ np.ones(A.shape[0]), atol=1e-12)
    Minv = M.matmat(np.eye(A.shape[0]))
    w = np.sort(np.linalg.eigvals(Minv @ A.toarray()).real)
    assert w.max() / w.min() == pytest.approx(1.86, abs=0.01)


def test_mic_relax_range():
    with pytest.raises(ConfigError):
        MIC0(sp.eye(4).tocsr(), relax=1.5)


# ---------------------------------------------------------------- Uzawa

@pytest.fixture(scope="module")
def saddle3():
    pb = ChannelProblem.build(3)
    F, B = pb.stokes.A, pb.stokes.B
    PA = RepeatedBlock(GeometricMultigrid(pb.stokes.A_s, cycles=5))
    PS = Chebyshev(pb.stokes.Q_p, ChebyshevConfig(20, *Q1_BOUNDS))
    return pb, F, B, PA, PS


def test_uzawa_converges_with_steps(saddle3):
    pb, F, B, PA, PS = saddle3
    K = sp.bmat([[F, B.T], [B, None]], format="csc")
    rng = np.random.default_rng(5)
    r = rng.standard_normal(K.shape[0])
    x = spla.spsolve(K, r)
    errs = [np.linalg.norm(InexactUzawa(F, B, PA, PS, UzawaConfig(k)).matvec(r) - x) for k in (2, 5, 20)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3 * np.linalg.norm(x)


def test_uzawa_adjoint_is_exact_transpose(saddle3):
    pb, F, B, PA, PS = saddle3
    U = InexactUzawa(F, B, PA, PS, UzawaConfig(5))
    rng = np.random.default_rng(6)
    n = U.shape[0]
    x, y = rng.standard_normal(n), rng.standard_normal(n)
    assert y @ U.matvec(x) == pytest.approx(x @ U.rmatvec(y), rel=1e-11)


def test_uzawa_divergence_detected(saddle3):
    pb, F, B, PA, PS = saddle3
    U = InexactUzawa(F, B, PA, PS, UzawaConfig(60, sigma=5.0), check_divergence=True)
    with pytest.raises(DivergenceError):
        U.matvec(np.ones(U.shape[0]))


def test_uzawa_config_errors():
    with pytest.raises(ConfigError):
        UzawaConfig(steps=0)
    with pytest.raises(ConfigError):
        UzawaConfig(sigma=-1.0)


# ---------------------------------------------------------------- stacks

def test_stokes_precond_is_spd(stokes3, rng):
    M = stokes_block_precond(stokes3)
    _probe_linear_spd(M, stokes3.N, rng)


def test_saddle_block_precond(rng):
    X = np.diag([2.0, 3.0, 4.0])
    Y = np.array([[1.0, 0.0, 1.0]])
    Z = np.block([[X, Y.T], [Y, np.zeros((1, 1))]])
    P = SaddleBlockPrecond(Z, 3)
    out = P.matvec(np.ones(4))
    np.testing.assert_allclose(out[:3], [0.5, 1 / 3, 0.25])
    assert out[3] == pytest.approx(1 / (0.5 + 0.25))


def test_config_roundtrip():
    cfg = PrecondConfig(cheb_steps=10, delta=0.1, stride=2)
    assert PrecondConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigError):
        PrecondConfig.from_dict({"nonsense": 1})
    with pytest.raises(ConfigError):
        PrecondConfig(mic_relax=2.0)


def _oseen(level, nu):
    pb = ChannelProblem.build(level)
    w = np.concatenate([1 - pb.mesh.y**2, np.zeros(pb.mesh.n_q2)])
    return build_oseen_kkt(pb, w, 1e-3, 1.0, nu)


def test_perm_precond_is_spd(rng):
    kkt = _oseen(3, 0.2)
    pk = apply_permutation_and_drop(kkt, plan_permutation(kkt.problem.dofmap, 1))
    M = perm_precond(pk)
    _probe_linear_spd(M, kkt.N, rng)


def test_perm_precond_rejects_indefinite():
    kkt = _oseen(3, 0.01)
    FS = reduced_symmetric_part(apply_permutation_and_drop(kkt, plan_permutation(kkt.problem.dofmap, None)))
    assert np.linalg.eigvalsh(FS.toarray()).min() < 0
    pk = apply_permutation_and_drop(kkt, plan_permutation(kkt.problem.dofmap, None))
    with pytest.raises(DivergenceError):
        perm_precond(pk)
