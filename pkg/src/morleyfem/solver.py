"""
Morley discretisations of the clamped plate problem nu * bilaplace(psi) = g.

All three methods share the broken Hessian stiffness matrix on the active
Morley DOFs and differ in the load vector:

    typical   (g, phi_h)
    modified  (g, L phi_h)           L = vertex-value lifting to continuous P1
    stream    (f, R curl_h phi_h)    R = lowest-order Raviart-Thomas interpolation

The linear systems are solved with a sparse LU factorisation that is forced
to pivot on the diagonal (fill-reducing column ordering applied symmetrically),
which for a symmetric matrix is an LDL^T factorisation; a non-positive pivot
means the matrix is not positive definite.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu

from .errors import MorleyError, NoConvergence, NotPositiveDefinite, QuadratureInsufficient
from .geometry import Mesh
from .quadrature import MIN_RHS_DEGREE, default_degree, triangle_rule
from .spaces import DofMap, GlobalField, build_space, element_data, lagrange_lift_matrix

METHODS = ("typical", "modified", "stream")
RESIDUAL_TOL = 1e-10
DIRECT_LIMIT = 2_000_000


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    nu: float
    dof_map: Optional[DofMap] = None


@dataclass
class SolveReport:
    solution: Optional[GlobalField]
    residual: float
    iterations: int = 0
    timings: dict = field(default_factory=dict)
    method: str = ""
    nu: float = 1.0
    h: float = float("nan")
    dofs: int = 0
    solver: str = "direct"
    vector: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "nu": self.nu,
            "h": self.h,
            "dofs": self.dofs,
            "residual": self.residual,
            "iterations": self.iterations,
            "solver": self.solver,
            "timings": dict(self.timings),
        }


def _rule_degree(degree: Optional[int]) -> int:
    deg = default_degree() if degree is None else int(degree)
    if deg < MIN_RHS_DEGREE:
        raise QuadratureInsufficient(f"load vectors need quadrature degree >= {MIN_RHS_DEGREE}, got {deg}")
    return deg


def _scatter(dm: DofMap, local: np.ndarray) -> np.ndarray:
    """Sum per-cell local vectors (nc, nloc) into the active global vector."""
    idx = dm.active_cell_dofs()
    keep = idx >= 0
    return np.bincount(idx[keep], weights=local[keep], minlength=dm.n_active)


def _require_morley0(dm: DofMap):
    if dm.kind != "Morley0":
        raise ValueError(f"expected a Morley0 space, got {dm.kind}")


def assemble_stiffness(dm: DofMap, nu: float = 1.0) -> sp.csr_matrix:
    """nu * sum_T |T| D^2 theta_a : D^2 theta_b on the active DOFs."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    ed = element_data(dm.mesh)
    if dm.family != "Morley":
        raise ValueError("stiffness is defined for Morley spaces")
    H = ed["morley_hess"] * dm.cell_signs[:, :, None, None]
    K = nu * np.abs(ed["area"])[:, None, None] * np.einsum("cade,cbde->cab", H, H)
    idx = dm.active_cell_dofs()
    rows = np.broadcast_to(idx[:, :, None], K.shape)
    cols = np.broadcast_to(idx[:, None, :], K.shape)
    keep = (rows >= 0) & (cols >= 0)
    n = dm.n_active
    A = sp.coo_matrix((K[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def _quadrature(mesh: Mesh, degree: Optional[int]):
    rule = triangle_rule(_rule_degree(degree))
    pts = np.einsum("qm,cmd->cqd", rule.points, mesh.coords)
    wts = 2.0 * np.abs(element_data(mesh)["area"])[:, None] * rule.weights[None, :]
    return rule, pts, wts


def _eval(fn, pts):
    out = np.asarray(fn(pts.reshape(-1, 2)), dtype=float)
    return out.reshape(pts.shape[:-1] + out.shape[1:])


def assemble_rhs_typical(g: Callable, dm: DofMap, degree: Optional[int] = None) -> np.ndarray:
    """Load vector (g, theta_a) by quadrature."""
    _require_morley0(dm)
    ed = element_data(dm.mesh)
    rule, pts, wts = _quadrature(dm.mesh, degree)
    gq = _eval(g, pts) * wts
    c, Q = ed["morley_c"], ed["morley_Q"]
    basis = np.einsum("cbm,qm->cbq", c, rule.points) + np.einsum("qm,cbmn,qn->cbq", rule.points, Q, rule.points)
    local = np.einsum("cbq,cq->cb", basis, gq) * dm.cell_signs
    return _scatter(dm, local)


def p1_load_vector(g: Callable, dm_l: DofMap, degree: Optional[int] = None) -> np.ndarray:
    """(g, lambda_v) for the active Lagrange DOFs."""
    rule, pts, wts = _quadrature(dm_l.mesh, degree)
    gq = _eval(g, pts) * wts
    local = gq @ rule.points
    return _scatter(dm_l, local)


def assemble_rhs_modified(g: Callable, dm: DofMap, dm_l: Optional[DofMap] = None, degree: Optional[int] = None) -> np.ndarray:
    """Load vector (g, L theta_a); edge DOFs receive zero."""
    _require_morley0(dm)
    if dm_l is None:
        dm_l = build_space(dm.mesh, "Lagrange0")
    E = lagrange_lift_matrix(dm, dm_l)
    return E.T @ p1_load_vector(g, dm_l, degree)


def curl_flux_matrix(dm: DofMap, dm_rt: DofMap) -> sp.csr_matrix:
    """Face fluxes of curl_h theta_a, taken from the lower-indexed adjacent cell.

    Row f, column a holds the RT0 coefficient on face f of R curl_h theta_a.
    """
    mesh = dm.mesh
    fd = mesh.fd
    ed = element_data(mesh)
    c, Q, G = ed["morley_c"], ed["morley_Q"], ed["grads"]
    # gradients of all local basis functions at the three vertices: (nc, 6, 3, 2)
    coef = c[:, :, None, :] + 2.0 * Q
    grad_v = np.einsum("cbvm,cmd->cbvd", coef, G) * dm.cell_signs[:, :, None, None]
    curl_v = np.stack([grad_v[..., 1], -grad_v[..., 0]], axis=-1)
    owner = fd.face_cells[:, 0]
    loc = np.argmax(fd.cell_faces[owner] == np.arange(mesh.n_faces)[:, None], axis=1)
    a = (loc + 1) % 3
    b = (loc + 2) % 3
    r = np.arange(mesh.n_faces)
    mean = 0.5 * (curl_v[owner, :, a] + curl_v[owner, :, b])
    flux = fd.measures[:, None] * np.einsum("fbd,fd->fb", mean, fd.normals)
    cols = dm.active_cell_dofs()[owner]
    rows = np.broadcast_to(r[:, None], cols.shape)
    keep = cols >= 0
    B = sp.coo_matrix((flux[keep], (rows[keep], cols[keep])), shape=(dm_rt.n_active, dm.n_active)).tocsr()
    B.sum_duplicates()
    return B


def rt_load_vector(f: Callable, dm_rt: DofMap, degree: Optional[int] = None) -> np.ndarray:
    """(f, Phi_F) for every RT0 basis function."""
    mesh = dm_rt.mesh
    rule, pts, wts = _quadrature(mesh, degree)
    fq = _eval(f, pts) * wts[..., None]
    area = element_data(mesh)["area"]
    diff = pts[:, None, :, :] - mesh.coords[:, :, None, :]
    local = np.einsum("cqd,ciqd->ci", fq, diff) / (2.0 * area[:, None]) * dm_rt.cell_signs
    return _scatter(dm_rt, local)


def assemble_rhs_stream(f: Callable, dm: DofMap, dm_rt: Optional[DofMap] = None, degree: Optional[int] = None) -> np.ndarray:
    """Load vector (f, R curl_h theta_a)."""
    _require_morley0(dm)
    if dm_rt is None:
        dm_rt = build_space(dm.mesh, "RT0")
    B = curl_flux_matrix(dm, dm_rt)
    return B.T @ rt_load_vector(f, dm_rt, degree)


def _relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def solve(system: LinearSystem, method: str = "auto", tol: float = RESIDUAL_TOL, refine: int = 2) -> SolveReport:
    """Solve an SPD system; direct LDL^T by default, Jacobi-CG for very large ones."""
    A = sp.csc_matrix(system.matrix)
    b = np.asarray(system.rhs, dtype=float)
    n = A.shape[0]
    t0 = time.perf_counter()
    if n == 0:
        x = np.zeros(0)
        return SolveReport(_wrap(system, x), 0.0, timings={"solve": 0.0}, dofs=0, nu=system.nu, vector=x)
    use_direct = method == "direct" or (method == "auto" and n <= DIRECT_LIMIT)
    iters = 0
    if use_direct:
        diag = A.diagonal()
        if np.any(diag <= 0):
            raise NotPositiveDefinite("non-positive diagonal entry")
        try:
            lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise NotPositiveDefinite(f"factorisation failed: {exc}") from exc
        if not np.array_equal(lu.perm_r, lu.perm_c):
            raise NotPositiveDefinite("factorisation needed off-diagonal pivoting")
        if np.any(lu.U.diagonal() <= 0):
            raise NotPositiveDefinite("non-positive pivot in LDL^T factorisation")
        x = lu.solve(b)
        for _ in range(refine):
            r = b - A @ x
            if np.linalg.norm(r) <= 1e-3 * tol * max(np.linalg.norm(b), 1e-300):
                break
            x = x + lu.solve(r)
        solver = "direct"
    else:
        d = A.diagonal()
        if np.any(d <= 0):
            raise NotPositiveDefinite("non-positive diagonal entry")
        M = sp.diags(1.0 / d)
        counter = {"k": 0}

        def cb(_):
            counter["k"] += 1

        x, info = cg(A, b, rtol=0.1 * tol, maxiter=20 * n, M=M, callback=cb)
        iters = counter["k"]
        if info != 0:
            raise NoConvergence(f"CG stopped after {iters} iterations (info={info})")
        solver = "cg"
    res = _relative_residual(A, x, b)
    if not res < tol:
        raise NoConvergence(f"relative residual {res:.3e} above {tol:g}")
    return SolveReport(
        solution=_wrap(system, x),
        residual=res,
        iterations=iters,
        timings={"solve": time.perf_counter() - t0},
        nu=system.nu,
        dofs=n,
        solver=solver,
        vector=x,
    )


def _wrap(system, x):
    return GlobalField(system.dof_map, x) if system.dof_map is not None else None


def solve_biharmonic(mesh: Mesh, method: str, g: Optional[Callable] = None, f: Optional[Callable] = None,
                     nu: float = 1.0, degree: Optional[int] = None, solver: str = "auto") -> SolveReport:
    """Assemble and solve one of the three Morley methods on ``mesh``.

    ``g`` is the bilaplacian load (already multiplied by nu); ``f`` the vector
    body force of the stream-function method.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if not nu > 0:
        raise ValueError("nu must be positive")
    t0 = time.perf_counter()
    dm = build_space(mesh, "Morley0")
    A = assemble_stiffness(dm, nu)
    if method == "stream":
        if f is None:
            raise ValueError("the stream method needs the body force f")
        b = assemble_rhs_stream(f, dm, degree=degree)
    else:
        if g is None:
            raise ValueError(f"the {method} method needs the load g")
        b = assemble_rhs_typical(g, dm, degree) if method == "typical" else assemble_rhs_modified(g, dm, degree=degree)
    t1 = time.perf_counter()
    report = solve(LinearSystem(A, b, nu, dm), method=solver)
    report.timings["assembly"] = t1 - t0
    report.method = method
    report.h = mesh.h
    return report


__all__ = [
    "LinearSystem",
    "SolveReport",
    "assemble_stiffness",
    "assemble_rhs_typical",
    "assemble_rhs_modified",
    "assemble_rhs_stream",
    "curl_flux_matrix",
    "rt_load_vector",
    "p1_load_vector",
    "solve",
    "solve_biharmonic",
    "MorleyError",
]
