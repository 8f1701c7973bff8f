import numpy as np
import pytest

from bcprecond import fem_channel as fem
from bcprecond.errors import ConfigError, DimensionError
from bcprecond.sparse_core import gen_sym_eig


@pytest.mark.parametrize("level", [1, 10, 2.5, "3"])
def test_level_range(level):
    with pytest.raises(ConfigError):
        fem.build_mesh(level)


def test_mesh_counts():
    mesh, dm = fem.build_mesh(3)
    assert (mesh.elements_per_side, mesh.nq, mesh.nl) == (4, 9, 5)
    assert (dm.n_s, dm.n_v, dm.n_p, dm.n_u) == (81, 162, 25, 18)
    np.testing.assert_allclose(mesh.x[dm.inflow_nodes], -1.0)
    assert np.all(np.diff(mesh.y[dm.inflow_nodes]) > 0)
    assert np.all(np.abs(mesh.y[dm.dirichlet_nodes]) == 1.0)


@pytest.mark.parametrize("Qe, bounds", [
    (fem.q2_element_mass(), (1 / 4, 25 / 16)),
    (fem.q1_element_mass(), (1 / 4, 9 / 4)),
    (fem.q2_edge_mass(), (1 / 2, 5 / 4)),
])
def test_element_mass_bounds(Qe, bounds):
    rep = gen_sym_eig(Qe, np.diag(np.diag(Qe)))
    assert rep.min == pytest.approx(bounds[0], abs=1e-12)
    assert rep.max == pytest.approx(bounds[1], abs=1e-12)


def test_element_mass_totals():
    # masses of the reference square and edge (side 1)
    assert fem.q2_element_mass().sum() == pytest.approx(1.0, abs=1e-14)
    assert fem.q1_element_mass().sum() == pytest.approx(1.0, abs=1e-14)
    assert fem.q2_edge_mass().sum() == pytest.approx(1.0, abs=1e-14)
    K = fem.q2_element_stiffness()
    np.testing.assert_allclose(K @ np.ones(9), 0.0, atol=1e-14)


def test_global_blocks_symmetric_and_spd(problem3):
    st, ct = problem3.stokes, problem3.control
    for M in (st.A, st.Q_v, st.Q_p, ct.Q_u):
        assert abs(M - M.T).max() <= 1e-14 * abs(M).max()
        np.linalg.cholesky(M.toarray())
    # the domain has area 4 and the inflow edge length 2
    assert st.Q_s.sum() == pytest.approx(4.0, abs=1e-12)
    assert st.Q_p.sum() == pytest.approx(4.0, abs=1e-12)
    assert ct.Qu_s.sum() == pytest.approx(2.0, abs=1e-12)


def test_divergence_of_linear_field(problem3):
    # B v = -int psi div v; v = (x, 0) has unit divergence
    mesh = problem3.mesh
    v = fem.interpolate_velocity(mesh, lambda x, y: x, lambda x, y: 0 * x)
    B = fem.assemble_stokes_blocks(mesh, problem3.dofmap, dirichlet=False).B
    np.testing.assert_allclose(B @ v, -problem3.stokes.Q_p @ np.ones(problem3.dofmap.n_p), atol=1e-13)


def test_poiseuille_forward_solve(problem3):
    mesh, dm = problem3.mesh, problem3.dofmap
    m = dm.inflow_nodes.size
    u = np.concatenate([np.full(m, 4.0), np.zeros(m)])
    v, p = fem.forward_stokes(problem3.stokes, problem3.control, dm, u)
    ve = fem.interpolate_velocity(mesh, lambda x, y: 1 - y**2, lambda x, y: 0 * x)
    pe = fem.interpolate_pressure(mesh, lambda x, y: 2 - 2 * x)
    assert np.abs(v - ve).max() < 1e-8
    assert np.abs(p - pe).max() < 1e-8


def test_convection_of_constants(problem3):
    mesh = problem3.mesh
    w = fem.interpolate_velocity(mesh, lambda x, y: 1 + 0 * x, lambda x, y: 0 * x)
    N = fem.assemble_convection_scalar(mesh, w)
    np.testing.assert_allclose(N @ np.ones(mesh.n_q2), 0.0, atol=1e-14)
    # int phi_i d/dx x = int phi_i
    x = mesh.x
    np.testing.assert_allclose(N @ x, problem3.stokes.Q_s @ np.ones(mesh.n_q2), atol=1e-13)
    with pytest.raises(DimensionError):
        fem.assemble_convection_scalar(mesh, np.zeros(5))


def test_convection_symmetric_part_on_boundary(problem3):
    mesh = problem3.mesh
    w = fem.interpolate_velocity(mesh, lambda x, y: 1 - y**2, lambda x, y: 0 * x)
    S = (lambda N: (N + N.T).tocoo())(fem.assemble_convection_scalar(mesh, w))
    ix = np.arange(mesh.n_q2) % mesh.nq
    edge = (ix == 0) | (ix == mesh.nq - 1)
    off = ~(edge[S.row] & edge[S.col])
    assert np.abs(S.data[off]).max() < 1e-12


def test_targets_profile(problem2):
    b, d = problem2.b, problem2.d
    assert np.all(d == 0.0)
    # the target lives on the upper half and has no y component
    assert np.allclose(b[problem2.dofmap.n_s:], 0.0)
    assert b[: problem2.dofmap.n_s].sum() == pytest.approx(2 * (2 - 4 / 3), rel=1e-12)
