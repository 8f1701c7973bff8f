import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from bcprecond.errors import DimensionError, PreconditionerError, SymmetryError
from bcprecond.krylov import minres
from bcprecond.precond.stack import PrecondConfig, stokes_block_precond
from bcprecond.sparse_core import dense_solve
from conftest import random_spd


def _indefinite(rng, n=40):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.concatenate([-np.geomspace(1, 10, n // 2), np.geomspace(0.5, 20, n - n // 2)])
    return (Q * w) @ Q.T


def test_unpreconditioned_matches_dense(rng):
    A = _indefinite(rng)
    b = rng.standard_normal(40)
    x, rep = minres(A, b, tol=1e-10)
    assert rep.converged
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-8, atol=1e-9)
    assert rep.final_true_residual < 1e-9


def test_history_monotone(rng):
    A = _indefinite(rng)
    M = np.linalg.inv(random_spd(rng, 40, cond=5.0))
    x, rep = minres(A, rng.standard_normal(40), M, tol=1e-12)
    h = np.array(rep.residual_history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])


def test_scipy_agrees(rng):
    A = sp.csr_matrix(_indefinite(rng, 60))
    b = rng.standard_normal(60)
    x, _ = minres(A, b, tol=1e-11)
    y, info = spla.minres(A, b, rtol=1e-11)
    assert info == 0
    np.testing.assert_allclose(x, y, rtol=1e-7, atol=1e-8)


def test_maxit_reports_not_converged(rng):
    A = _indefinite(rng)
    x, rep = minres(A, rng.standard_normal(40), tol=1e-14, maxit=3)
    assert not rep.converged and rep.iterations == 3


def test_zero_rhs(rng):
    x, rep = minres(_indefinite(rng), np.zeros(40))
    assert rep.converged and rep.iterations == 0 and not x.any()


def test_errors(rng):
    A = _indefinite(rng)
    with pytest.raises(DimensionError):
        minres(A, np.ones(3))
    with pytest.raises(SymmetryError):
        minres(np.triu(A), np.ones(40), check=True)
    with pytest.raises(PreconditionerError):
        minres(A, np.ones(40), M=-np.eye(40))


def test_csv_report(tmp_path, rng):
    _, rep = minres(_indefinite(rng), rng.standard_normal(40))
    rep.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "iteration,preconditioned_residual"
    assert len(lines) == rep.iterations + 2


@pytest.mark.parametrize("level", [2, 3])
def test_stokes_oracle(level, stokes3, problem2):
    from bcprecond.kkt import build_stokes_kkt

    kkt = stokes3 if level == 3 else build_stokes_kkt(problem2, 1e-3, 1e-3)
    x_ref = dense_solve(kkt.matrix, kkt.rhs)
    x, rep = minres(kkt.matrix, kkt.rhs, stokes_block_precond(kkt), tol=1e-6, check=True)
    assert rep.converged
    assert np.linalg.norm(x - x_ref) <= 1e-5 * np.linalg.norm(x_ref)


def test_preconditioner_independence(problem2):
    from bcprecond.kkt import build_stokes_kkt

    kkt = build_stokes_kkt(problem2, 1e-3, 1e-3)
    xa, _ = minres(kkt.matrix, kkt.rhs, stokes_block_precond(kkt), tol=1e-10)
    xb, _ = minres(kkt.matrix, kkt.rhs, stokes_block_precond(kkt, PrecondConfig(cheb_steps=5, uzawa_steps=2)),
                   tol=1e-10, maxit=5000)
    assert np.linalg.norm(xa - xb) <= 1e-5 * np.linalg.norm(xa)
