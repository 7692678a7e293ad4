import json

import numpy as np
import pytest

from morleyfem.geometry import generate_mesh
from morleyfem.manufactured import Poly2D
from morleyfem.spaces import (
    GlobalField,
    broken_curl,
    build_space,
    face_bary,
    face_jump_integrals,
    face_points,
    face_traces,
    global_interpolate,
    lagrange_lift_matrix,
    morley_to_lagrange,
)


@pytest.fixture(scope="module")
def mesh():
    return generate_mesh("perturbed", n=6, amplitude=0.2, seed=4)


def random_field(mesh, kind, seed=0):
    dm = build_space(mesh, kind)
    return GlobalField(dm, np.random.default_rng(seed).standard_normal(dm.n_active))


def bary_samples(nq=5, seed=0):
    b = np.random.default_rng(seed).dirichlet(np.ones(3), nq)
    return b


def physical(mesh, bary):
    return np.einsum("qm,cmd->cqd", bary, mesh.coords)


@pytest.mark.parametrize(
    "kind, total, active",
    [("Morley", 25, 25), ("Morley0", 25, 9), ("CR", 16, 16), ("CR0", 16, 8), ("RT0", 16, 16),
     ("Lagrange", 9, 9), ("Lagrange0", 9, 1), ("P0dc", 8, 8)],
)
def test_dof_counts(kind, total, active):
    dm = build_space(generate_mesh("uniform", n=2), kind)
    assert (dm.total_dofs, dm.n_active) == (total, active)
    assert np.all(dm.full_to_active[dm.active_to_full] == np.arange(active))


def test_unknown_kind():
    with pytest.raises(ValueError):
        build_space(generate_mesh("uniform", n=2), "Hermite")


def test_p0_of_x_is_centroid(mesh):
    dm = build_space(mesh, "P0dc")
    u = global_interpolate("P0dc", dm, lambda p: p[:, 0])
    assert np.allclose(u.coeffs, mesh.coords.mean(axis=1)[:, 0], atol=1e-14)


@pytest.mark.parametrize("kind, degree", [("Lagrange", 1), ("CR", 1), ("Morley", 2)])
def test_interpolation_reproduces_polynomials(mesh, kind, degree):
    p = Poly2D.random(degree, np.random.default_rng(1))
    dm = build_space(mesh, kind)
    u = global_interpolate(kind, dm, p.value, grad=p.grad)
    b = bary_samples()
    x = physical(mesh, b)
    assert np.allclose(u.values(b), p.value(x), atol=1e-12)
    assert np.allclose(u.gradients(b), p.grad(x), atol=1e-11)


def test_rt_interpolation_reproduces_affine(mesh):
    dm = build_space(mesh, "RT0")
    field = lambda p: np.stack([0.5 + 2 * p[:, 0], -1.0 + 2 * p[:, 1]], axis=-1)
    u = global_interpolate("RT0", dm, field)
    b = bary_samples()
    assert np.allclose(u.values(b), field(physical(mesh, b).reshape(-1, 2)).reshape(mesh.n_cells, -1, 2), atol=1e-12)
    assert np.allclose(u.divergence(), 4.0, atol=1e-11)


def test_rt_constant_has_no_normal_jumps(mesh):
    dm = build_space(mesh, "RT0")
    u = global_interpolate("RT0", dm, lambda p: np.broadcast_to([1.3, -0.4], p.shape))
    jumps = face_jump_integrals(u, "normal_flux")
    assert np.max(np.abs(jumps[~mesh.fd.boundary])) < 1e-13


def test_random_rt_normal_flux_is_continuous(mesh):
    u = random_field(mesh, "RT0", 2)
    tr = face_traces(u, "normal_flux", np.array([0.1, 0.5, 0.9]))
    inner = ~mesh.fd.boundary
    assert np.max(np.abs(tr[inner, 0] - tr[inner, 1])) < 1e-11


def test_cr_and_morley_jump_means(mesh):
    inner = ~mesh.fd.boundary
    cr = random_field(mesh, "CR0", 3)
    jv = face_jump_integrals(cr, "value")
    assert np.max(np.abs(jv)) < 1e-13  # interior continuity and zero boundary means
    mo = random_field(mesh, "Morley0", 4)
    for q in ("dx1", "dx2", "normal_derivative"):
        assert np.max(np.abs(face_jump_integrals(mo, q))) < 1e-12, q
    free = random_field(mesh, "Morley", 5)
    assert np.max(np.abs(face_jump_integrals(free, "normal_derivative")[inner])) < 1e-12
    # Morley values are continuous only at vertices: value jumps do not vanish in general
    assert np.max(np.abs(face_jump_integrals(free, "value")[inner])) > 1e-6


def test_face_bary_matches_face_points(mesh):
    s = np.array([0.0, 0.3, 1.0])
    ref = face_points(mesh, s)
    for side in (0, 1):
        fids, cells, _, bary = face_bary(mesh, side, s)
        x = np.einsum("cqm,cmd->cqd", bary, mesh.coords[cells])
        assert np.allclose(x, ref[fids], atol=1e-15)


def test_broken_curl_of_x_squared(mesh):
    dm = build_space(mesh, "Morley")
    u = global_interpolate("Morley", dm, lambda p: p[:, 0] ** 2, grad=lambda p: np.stack([2 * p[:, 0], 0 * p[:, 0]], -1))
    curl = broken_curl(u)
    expected = np.stack([np.zeros_like(mesh.coords[..., 0]), -2 * mesh.coords[..., 0]], axis=-1)
    assert np.allclose(curl.vertex_values, expected, atol=1e-12)


def test_broken_curl_edge_means_and_divergence(mesh):
    u = random_field(mesh, "Morley0", 6)
    curl = broken_curl(u)
    inner = ~mesh.fd.boundary
    assert np.max(np.abs(curl.face_means(0)[inner] - curl.face_means(1)[inner])) < 1e-11
    assert np.max(np.abs(curl.divergence())) < 1e-10
    rt = curl.rt_interpolate(build_space(mesh, "RT0"))
    assert np.max(np.abs(rt.divergence())) < 1e-10


def test_broken_curl_rejects_other_spaces(mesh):
    with pytest.raises(ValueError):
        broken_curl(random_field(mesh, "CR", 0))


def test_morley_to_lagrange_and_lift_matrix(mesh):
    dm_m = build_space(mesh, "Morley0")
    dm_l = build_space(mesh, "Lagrange0")
    u = random_field(mesh, "Morley0", 7)
    lag = morley_to_lagrange(dm_m, dm_l, u)
    assert np.allclose(lag.full(), u.full()[: mesh.n_points])
    E = lagrange_lift_matrix(dm_m, dm_l)
    assert np.allclose(E @ u.coeffs, lag.coeffs)
    assert np.allclose(lag.values(np.eye(3)), u.values(np.eye(3)), atol=1e-12)


def test_field_algebra_and_errors(mesh):
    a = random_field(mesh, "CR", 1)
    b = random_field(mesh, "CR", 2)
    assert np.allclose((a + b - 2 * a).coeffs, b.coeffs - a.coeffs)
    with pytest.raises(ValueError):
        GlobalField(a.dof_map, np.ones(3))
    with pytest.raises(ValueError):
        a.dof_map.expand(np.ones(2))
    with pytest.raises(ValueError):
        a.rt_affine()
    with pytest.raises(ValueError):
        face_traces(a, "curvature", np.array([0.5]))
    with pytest.raises(ValueError):
        global_interpolate("RT0", a.dof_map, lambda p: p)
    with pytest.raises(ValueError):
        global_interpolate("Morley", build_space(mesh, "Morley"), lambda p: p[:, 0])


def test_hessians_of_quadratic(mesh):
    dm = build_space(mesh, "Morley")
    p = Poly2D([[0.0, 0.0, 1.5], [0.0, -2.0, 0.0], [0.5, 0.0, 0.0]])
    u = global_interpolate("Morley", dm, p.value, grad=p.grad)
    assert np.allclose(u.hessians(), [[1.0, -2.0], [-2.0, 3.0]], atol=1e-10)


def test_field_export_round_trip(mesh, tmp_path):
    u = random_field(mesh, "Morley0", 8)
    path = tmp_path / "field.json"
    u.save(path)
    data = json.loads(path.read_text())
    assert data["space"] == "Morley0" and len(data["coeffs"]) == u.dof_map.n_active
    again = GlobalField.from_dict(mesh, data)
    assert np.array_equal(again.coeffs, u.coeffs)
