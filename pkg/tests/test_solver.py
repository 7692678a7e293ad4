import numpy as np
import pytest
import scipy.sparse as sp

from morleyfem.elements import eval_morley
from morleyfem.errors import NoConvergence, NotPositiveDefinite, QuadratureInsufficient
from morleyfem.geometry import Mesh, generate_mesh
from morleyfem.manufactured import poly_solution, pressure_x2y, sin2_solution
from morleyfem.quadrature import triangle_rule
from morleyfem.spaces import GlobalField, broken_curl, build_space
from morleyfem.solver import (
    LinearSystem,
    assemble_rhs_modified,
    assemble_rhs_stream,
    assemble_rhs_typical,
    assemble_stiffness,
    solve,
    solve_biharmonic,
)

REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.fixture(scope="module")
def mesh():
    return generate_mesh("perturbed", n=6, amplitude=0.2, seed=5)


def test_reference_element_stiffness_diagonal():
    m = Mesh(REF, [[0, 1, 2]])
    dm = build_space(m, "Morley")
    d = assemble_stiffness(dm).diagonal()
    assert np.allclose(d[:3], [4.0, 2.0, 2.0], atol=1e-13)
    f12 = next(f for f in range(3) if set(m.fd.faces[f]) == {1, 2})
    # Hessian of the edge function opposite vertex 0 is sqrt(2) [[1, 1], [1, 1]]
    assert abs(d[3 + f12] - 4.0) < 1e-13


def test_stiffness_symmetric_positive_definite():
    dm = build_space(generate_mesh("uniform", n=4), "Morley0")
    A = assemble_stiffness(dm).toarray()
    assert np.allclose(A, A.T, atol=1e-13)
    assert np.linalg.eigvalsh(A).min() > 1e-8


def test_energy_matches_broken_seminorm(mesh):
    dm = build_space(mesh, "Morley0")
    u = GlobalField(dm, np.random.default_rng(0).standard_normal(dm.n_active))
    A = assemble_stiffness(dm, nu=1.7)
    H = u.hessians()
    expected = 1.7 * np.sum(mesh.measures * np.einsum("cde,cde->c", H, H))
    assert abs(u.coeffs @ A @ u.coeffs - expected) < 1e-10 * expected


def test_zero_load_gives_zero(mesh):
    zero = lambda p: np.zeros(len(p))
    for method in ("typical", "modified"):
        rep = solve_biharmonic(mesh, method, g=zero)
        assert np.all(rep.solution.coeffs == 0)
    rep = solve_biharmonic(mesh, "stream", f=lambda p: np.zeros((len(p), 2)))
    assert np.all(rep.solution.coeffs == 0)


def test_modified_load_constant_one():
    m = generate_mesh("uniform", n=2)
    dm = build_space(m, "Morley0")
    b = assemble_rhs_modified(lambda p: np.ones(len(p)), dm)
    centre = int(np.flatnonzero(np.all(np.isclose(m.points, 0.5), axis=1))[0])
    assert abs(b[dm.full_to_active[centre]] - 0.25) < 1e-15
    edge_active = dm.full_to_active[m.n_points:]
    assert np.all(b[edge_active[edge_active >= 0]] == 0)


def test_typical_load_constant_one(mesh):
    dm = build_space(mesh, "Morley0")
    b = assemble_rhs_typical(lambda p: np.ones(len(p)), dm)
    fd = mesh.fd
    # integral of an edge function: -|T|^2 / (3 |F|) times its sign, summed over neighbours
    expected = np.zeros(mesh.n_faces)
    for c in range(mesh.n_cells):
        for i in range(3):
            f = fd.cell_faces[c, i]
            expected[f] += fd.cell_face_sign[c, i] * (-mesh.measures[c] ** 2 / (3 * fd.measures[f]))
    act = dm.full_to_active[mesh.n_points:]
    inner = act >= 0
    assert np.allclose(b[act[inner]], expected[inner], atol=1e-15)


def test_typical_load_matches_single_triangle_path(mesh):
    dm = build_space(mesh, "Morley0")
    g = lambda p: 1.0 + p[:, 0] * p[:, 1] ** 2
    b = assemble_rhs_typical(g, dm, degree=6)
    rule = triangle_rule(6)
    full = np.zeros(dm.total_dofs)
    for c in range(mesh.n_cells):
        T = mesh.coords[c]
        x = rule.points @ T
        vals = eval_morley(T, x).values * dm.cell_signs[c]
        full[dm.cell_dofs[c]] += 2 * mesh.measures[c] * ((rule.weights * g(x)) @ vals)
    assert np.allclose(b, dm.restrict(full), atol=1e-14)


def test_quadratic_load_degree_independent(mesh):
    dm = build_space(mesh, "Morley0")
    g = lambda p: 2.0 - p[:, 0] ** 2 + 3 * p[:, 0] * p[:, 1]
    assert np.allclose(assemble_rhs_modified(g, dm, degree=4), assemble_rhs_modified(g, dm, degree=10), atol=1e-15)
    assert np.allclose(assemble_rhs_typical(g, dm, degree=4), assemble_rhs_typical(g, dm, degree=10), atol=1e-15)


def test_load_rejects_low_degree(mesh):
    dm = build_space(mesh, "Morley0")
    with pytest.raises(QuadratureInsufficient):
        assemble_rhs_typical(lambda p: np.ones(len(p)), dm, degree=2)


def test_stream_load_annihilates_gradients(mesh):
    dm = build_space(mesh, "Morley0")
    p = pressure_x2y()
    b = assemble_rhs_stream(p.grad, dm)
    ref = assemble_rhs_stream(sin2_solution().f, dm)
    assert np.max(np.abs(b)) < 1e-13 * max(1.0, np.max(np.abs(ref)))


def test_stream_load_matches_curl_interpolation_path(mesh):
    dm = build_space(mesh, "Morley0")
    dm_rt = build_space(mesh, "RT0")
    f = lambda p: np.stack([np.sin(p[:, 1]), p[:, 0] ** 2], axis=-1)
    b = assemble_rhs_stream(f, dm, dm_rt, degree=10)
    rule = triangle_rule(10)
    x = np.einsum("qm,cmd->cqd", rule.points, mesh.coords)
    fx = f(x.reshape(-1, 2)).reshape(x.shape)
    w = 2 * mesh.measures[:, None] * rule.weights
    expected = np.empty(dm.n_active)
    for a in range(dm.n_active):
        e = np.zeros(dm.n_active)
        e[a] = 1.0
        rt = broken_curl(GlobalField(dm, e)).rt_interpolate(dm_rt)
        expected[a] = np.sum(w[..., None] * fx * rt.values(rule.points))
    assert np.allclose(b, expected, atol=1e-13)


def test_galerkin_residual_and_nu_scaling(mesh):
    psi = poly_solution()
    r1 = solve_biharmonic(mesh, "modified", g=lambda p: psi.g(p, 1.0), nu=1.0)
    r2 = solve_biharmonic(mesh, "modified", g=lambda p: psi.g(p, 3.0), nu=3.0)
    assert r1.residual < 1e-10 and r2.residual < 1e-10
    assert np.allclose(r1.solution.coeffs, r2.solution.coeffs, rtol=1e-10, atol=1e-14)
    A = assemble_stiffness(r1.solution.dof_map)
    b = assemble_rhs_modified(lambda p: psi.g(p, 1.0), r1.solution.dof_map)
    assert np.linalg.norm(A @ r1.solution.coeffs - b) < 1e-10 * np.linalg.norm(b)
    assert r1.to_dict()["method"] == "modified" and r1.dofs == r1.solution.dof_map.n_active


def test_stream_matches_modified_for_same_plate(mesh):
    psi = sin2_solution()
    rs = solve_biharmonic(mesh, "stream", f=psi.f)
    rt = solve_biharmonic(mesh, "typical", g=psi.g)
    # different discrete loads, same continuous problem: close but not identical
    rel = np.linalg.norm(rs.solution.coeffs - rt.solution.coeffs) / np.linalg.norm(rt.solution.coeffs)
    assert 0 < rel < 0.2


def test_iterative_path_agrees_with_direct():
    m = generate_mesh("uniform", n=6)
    dm = build_space(m, "Morley0")
    A = assemble_stiffness(dm)
    b = assemble_rhs_modified(lambda p: np.ones(len(p)), dm)
    d = solve(LinearSystem(A, b, 1.0, dm), method="direct")
    c = solve(LinearSystem(A, b, 1.0, dm), method="cg")
    assert c.solver == "cg" and c.iterations > 0
    assert np.allclose(c.vector, d.vector, rtol=1e-8, atol=1e-12)


def test_small_systems():
    rep = solve(LinearSystem(sp.csr_matrix([[4.0]]), np.array([2.0]), 1.0))
    assert rep.vector[0] == 0.5 and rep.solution is None
    empty = solve(LinearSystem(sp.csr_matrix((0, 0)), np.zeros(0), 1.0))
    assert empty.dofs == 0


@pytest.mark.parametrize("M", [[[1.0, 2.0], [2.0, 1.0]], [[-1.0, 0.0], [0.0, 1.0]]])
def test_indefinite_matrices_rejected(M):
    with pytest.raises(NotPositiveDefinite):
        solve(LinearSystem(sp.csr_matrix(M), np.ones(2), 1.0))


def test_iterative_path_rejects_negative_diagonal():
    A = sp.csr_matrix(np.array([[-1.0, 0.5], [0.5, -1.0]]))
    with pytest.raises(NotPositiveDefinite):
        solve(LinearSystem(A, np.ones(2), 1.0), method="cg")


def test_unreachable_tolerance_raises():
    A = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 1e-17]]))
    with pytest.raises(NoConvergence):
        solve(LinearSystem(A, np.array([1.0, 1.0]), 1.0), tol=0.0)


def test_argument_errors(mesh):
    with pytest.raises(ValueError):
        solve_biharmonic(mesh, "mixed", g=lambda p: p[:, 0])
    with pytest.raises(ValueError):
        solve_biharmonic(mesh, "modified", g=lambda p: p[:, 0], nu=0.0)
    with pytest.raises(ValueError):
        solve_biharmonic(mesh, "stream")
    with pytest.raises(ValueError):
        solve_biharmonic(mesh, "typical")
    with pytest.raises(ValueError):
        assemble_stiffness(build_space(mesh, "CR0"))
    with pytest.raises(ValueError):
        assemble_rhs_typical(lambda p: p[:, 0], build_space(mesh, "Morley"))
