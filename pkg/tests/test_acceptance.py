"""End-to-end acceptance checks; each prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from morleyfem.geometry import Mesh, generate_mesh, order_vertices_2d
from morleyfem.manufactured import layer_solution, poly_solution, pressure_x2y, sin2_solution
from morleyfem.solver import assemble_rhs_stream, assemble_stiffness
from morleyfem.spaces import build_space
from morleyfem.verification import (
    boundary_layer_family,
    convergence_study,
    identity_suite,
    interpolation_study,
    stability_study,
)

UNIFORM_N = (8, 16, 32, 64)
EOC_RANGE = (0.85, 1.15)


def _fmt(values):
    return "[" + ", ".join(f"{v:.4g}" for v in values) + "]"


def _in_range(values, lo, hi):
    return bool(np.all((np.asarray(values) >= lo) & (np.asarray(values) <= hi)))


@pytest.fixture(scope="module")
def uniform_meshes():
    return [generate_mesh("uniform", n=n) for n in UNIFORM_N]


@pytest.fixture(scope="module")
def modified_run(uniform_meshes):
    t0 = time.perf_counter()
    rec = convergence_study("modified", sin2_solution(), uniform_meshes, nu=1.0, compare_typical=True)
    return rec, time.perf_counter() - t0


def test_identity_suite(acceptance_line):
    t0 = time.perf_counter()
    worst, failures = 0.0, []
    for seed in (1, 7, 13):
        meshes = {
            "uniform(4)": generate_mesh("uniform", n=4),
            "perturbed(8)": generate_mesh("perturbed", n=8, amplitude=0.2, seed=seed),
            "boundary_layer(8, 1e-3)": generate_mesh("boundary_layer", n=8, delta=1e-3, layer_fraction=0.5),
        }
        for name, mesh in meshes.items():
            rep = identity_suite(mesh, seed=seed)
            worst = max(worst, max(rep.residuals.values()))
            failures += [f"{name}/seed {seed}/{k}" for k in rep.failures()]
    elapsed = time.perf_counter() - t0
    ok = not failures and worst < 1e-10 and elapsed < 30
    acceptance_line(1, "exact identities", ok, f"max scaled residual {worst:.2e} (< 1e-10), {elapsed:.1f} s (< 30 s)"
                    + (f", failing: {failures}" if failures else ""))
    assert ok


def test_morley_interpolation_rate(acceptance_line, uniform_meshes):
    t0 = time.perf_counter()
    rec = interpolation_study(sin2_solution(), uniform_meshes, "Morley")
    eoc = rec.eoc["err"]
    poly = interpolation_study(poly_solution(), uniform_meshes, "Morley")
    err, bound = poly.column("err"), poly.column("bound_aniso")
    C = err[0] / bound[0]
    dominated = bool(np.all(err[1:] <= 1.1 * C * bound[1:]))
    elapsed = time.perf_counter() - t0
    ok = _in_range(eoc, *EOC_RANGE) and dominated and elapsed < 60
    acceptance_line(2, "Morley interpolation rate", ok,
                    f"EOC {_fmt(eoc)} in [0.85, 1.15]; poly err/(C bound) {_fmt(err[1:] / (C * bound[1:]))} <= 1.1; "
                    f"{elapsed:.1f} s (< 60 s)")
    assert ok


def test_modified_solve_rate(acceptance_line, modified_run):
    rec, elapsed = modified_run
    eoc = rec.eoc["err_H2"]
    res = rec.column("residual")
    ok = _in_range(eoc, *EOC_RANGE) and bool(np.all(res < 1e-10)) and elapsed < 300
    acceptance_line(3, "modified method rate", ok,
                    f"EOC {_fmt(eoc)} in [0.85, 1.15]; max residual {res.max():.1e} (< 1e-10); "
                    f"{elapsed:.1f} s incl. typical solves (< 300 s)")
    assert ok


def test_typical_modified_gap(acceptance_line, modified_run):
    rec, _ = modified_run
    eoc = rec.eoc["gap"]
    ok = _in_range(eoc, 1.8, 2.2)
    acceptance_line(4, "typical-vs-modified gap", ok, f"EOC {_fmt(eoc)} in [1.8, 2.2]")
    assert ok


def test_stream_function_method(acceptance_line, uniform_meshes):
    psi = sin2_solution()
    rec = convergence_study("stream", psi, uniform_meshes, nu=1.0)
    eoc = rec.eoc["err_H2"]
    grad_p = pressure_x2y().grad
    worst = 0.0
    for mesh in uniform_meshes:
        dm = build_space(mesh, "Morley0")
        b = assemble_rhs_stream(psi.f, dm)
        b2 = assemble_rhs_stream(lambda p: psi.f(p) + grad_p(p), dm)
        worst = max(worst, float(np.max(np.abs(b2 - b)) / np.max(np.abs(b))))
    ok = _in_range(eoc, *EOC_RANGE) and worst < 1e-9
    acceptance_line(5, "stream-function method", ok,
                    f"EOC {_fmt(eoc)} in [0.85, 1.15]; RHS change from grad p {worst:.1e} (< 1e-9 relative)")
    assert ok


def test_anisotropic_bound_stability(acceptance_line):
    delta = 1e-2
    meshes = boundary_layer_family(4, delta)
    rec = interpolation_study(layer_solution(delta), meshes, "Morley")
    ratio = rec.column("ratio_aniso")
    over = rec.column("overprediction_iso")
    gamma = rec.column("gamma0")
    aspect = rec.column("max_aspect")
    variation = ratio.max() / ratio.min()
    ok = (variation < 1.5 and bool(np.all(np.abs(gamma - 2.0) < 1e-12)) and bool(np.all(aspect > 100))
          and bool(np.all(np.diff(over) > 0)))
    acceptance_line(6, "anisotropic bound on boundary-layer meshes", ok,
                    f"err/bound {_fmt(ratio)} varies x{variation:.3f} (< 1.5); gamma0 {_fmt(gamma)}; "
                    f"aspect {_fmt(aspect)} (> 100); isotropic over-prediction {_fmt(over)} increasing")
    assert ok


def test_stability_proxies(acceptance_line, uniform_meshes):
    psi = sin2_solution()
    rec = stability_study(lambda p: psi.g(p, 1.0), uniform_meshes, nu=1.0)
    sol = rec.column("solution_ratio")
    lift = rec.column("lifting_ratio")
    g_sol = sol[1:] / sol[:-1]
    g_lift = lift[1:] / lift[:-1]
    ok = bool(np.all(g_sol < 1.1) and np.all(g_lift < 1.1))
    acceptance_line(7, "stability proxies", ok,
                    f"solution ratio {_fmt(sol)} growth {_fmt(g_sol)}; lifting ratio {_fmt(lift)} "
                    f"growth {_fmt(g_lift)} (each < 1.1)")
    assert ok


def test_geometry_unit_values(acceptance_line):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(1000):
        scale = rng.uniform(0.01, 100)
        if k % 2 == 0:
            # axis-aligned legs stay exactly perpendicular after rounding; aspect up to 1e8
            legs = scale * np.array([1.0, 10 ** rng.uniform(-8, 0)]) * rng.choice([-1, 1], 2)
            corner = rng.uniform(-5, 5, 2)
            pts = np.array([corner, corner + [legs[0], 0.0], corner + [0.0, legs[1]]])
            if rng.random() < 0.5:
                pts = pts[:, ::-1].copy()
        else:
            # rotated: rounding of the rotated coordinates is ~1e-16 / aspect, so keep aspect <= 1e3
            a = rng.uniform(0, 2 * math.pi)
            R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
            eps = 10 ** rng.uniform(-3, 0)
            pts = scale * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, eps]]) @ R.T
        perm = list(rng.permutation(3))
        worst = max(worst, abs(order_vertices_2d(perm, pts).semi_regularity - 2.0))
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    HT = order_vertices_2d([0, 1, 2], ref).H_T
    mesh = Mesh(ref, [[0, 1, 2]])
    nu = 2.5
    diag = assemble_stiffness(build_space(mesh, "Morley"), nu).diagonal()
    face = next(f for f in range(3) if set(mesh.fd.faces[f]) == {1, 2})
    k_edge = diag[mesh.n_points + face]
    ok = worst < 1e-12 and abs(HT - 2 * math.sqrt(2)) < 1e-12 and abs(k_edge - 4 * nu) < 1e-12
    acceptance_line(8, "geometry and stiffness unit values", ok,
                    f"max |H_T/h_T - 2| over 1000 right triangles {worst:.1e} (< 1e-12); "
                    f"reference H_T {HT:.15g} vs 2 sqrt 2; edge-function stiffness {k_edge:.15g} vs 4 nu = {4 * nu:g}")
    assert ok
