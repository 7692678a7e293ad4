"""
Errors, anisotropic error bounds, convergence studies and identity checks.

Seminorms use the full derivative tensor, |u|_{H^m(T)}^2 = sum over all
index tuples (i_1..i_m) of ||d_{i_1}..d_{i_m} u||^2, so the broken Hessian
form a(u, u) equals the broken H^2 seminorm squared.

The anisotropic bound on a cell is sum_i h_i |d psi / d r_i|_{H^m(T)} with the
element lengths h_i and directions r_i of the vertex labelling in
``geometry``; cell contributions are combined in the l2 sense.  The isotropic
comparator is (sum_T h_T^2 |psi|_{H^{m+1}(T)}^2)^{1/2}.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .elements import edge_points, outward_normals, quadratic_gradients, quadratic_values
from .errors import InsufficientLevels
from .geometry import Mesh, layer_mesh, mesh_metrics, perturbed_mesh, uniform_mesh
from .manufactured import Poly2D
from .quadrature import default_degree, edge_rule, triangle_rule
from .solver import assemble_stiffness, solve_biharmonic
from .spaces import (
    GlobalField,
    broken_curl,
    build_space,
    element_data,
    face_jump_integrals,
    face_traces,
    global_interpolate,
    lagrange_lift_matrix,
)

IDENTITY_TOL = 1e-10


# --------------------------------------------------------------------------
# norms


def _quad(mesh: Mesh, degree: Optional[int]):
    rule = triangle_rule(default_degree() if degree is None else degree)
    pts = np.einsum("qm,cmd->cqd", rule.points, mesh.coords)
    wts = 2.0 * np.abs(element_data(mesh)["area"])[:, None] * rule.weights[None, :]
    return rule, pts, wts


def _tensor(field_, pts, order):
    flat = pts.reshape(-1, 2)
    if order == 0:
        out = np.asarray(field_.value(flat))
    else:
        out = np.asarray(field_.tensor(flat, order))
    return out.reshape(pts.shape[:-1] + out.shape[1:])


def _discrete(psi_h: GlobalField, rule, order):
    nc = psi_h.mesh.n_cells
    nq = len(rule.points)
    if order == 0:
        return psi_h.values(rule.points)
    if order == 1:
        return psi_h.gradients(rule.points)
    if order == 2:
        if psi_h.dof_map.family != "Morley":
            return np.zeros((nc, nq, 2, 2))
        return np.broadcast_to(psi_h.hessians()[:, None], (nc, nq, 2, 2))
    raise ValueError("order must be 0, 1 or 2")


def cell_errors(psi, psi_h: Optional[GlobalField], order: int, mesh: Optional[Mesh] = None,
                degree: Optional[int] = None) -> np.ndarray:
    """Per-cell |psi - psi_h|_{H^order(T)}^2 (psi_h may be None)."""
    mesh = psi_h.mesh if psi_h is not None else mesh
    rule, pts, wts = _quad(mesh, degree)
    diff = _tensor(psi, pts, order)
    if psi_h is not None:
        diff = diff - _discrete(psi_h, rule, order)
    sq = diff.reshape(diff.shape[0], diff.shape[1], -1) ** 2
    return np.einsum("cqk,cq->c", sq, wts)


def broken_error(psi, psi_h: Optional[GlobalField], order: int, mesh: Optional[Mesh] = None,
                 degree: Optional[int] = None) -> float:
    """Broken H^order seminorm of psi - psi_h (order 0 is the L2 norm)."""
    return float(np.sqrt(cell_errors(psi, psi_h, order, mesh, degree).sum()))


def discrete_seminorm(psi_h: GlobalField, order: int, degree: int = 4) -> float:
    rule = triangle_rule(degree)
    _, _, wts = _quad(psi_h.mesh, degree)
    d = _discrete(psi_h, rule, order)
    sq = d.reshape(d.shape[0], d.shape[1], -1) ** 2
    return float(np.sqrt(np.einsum("cqk,cq->", sq, wts)))


def l2_norm(fn, mesh: Mesh, degree: Optional[int] = None) -> float:
    _, pts, wts = _quad(mesh, degree)
    v = np.asarray(fn(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:-1] + (-1,))
    return float(np.sqrt(np.einsum("cqk,cq->", v**2, wts)))


# --------------------------------------------------------------------------
# bounds


@dataclass
class BoundReport:
    aniso: float
    iso: float
    terms: tuple
    consistency: float = float("nan")


def _directional_seminorm_sq(T, r, wts):
    """Per-cell |r . D psi|^2 over H^m, T (nc, nq) + (2,)*(m+1), r (nc, 2)."""
    m1 = T.ndim - 2
    D = np.einsum("cqd...,cd->cq...", T, r)
    sq = D.reshape(D.shape[0], D.shape[1], -1) ** 2 if m1 > 1 else D**2
    return np.einsum("cqk,cq->c", sq, wts) if sq.ndim == 3 else np.einsum("cq,cq->c", sq, wts)


def anisotropic_bound(psi, mesh: Mesh, order: int = 2, degree: Optional[int] = None) -> BoundReport:
    """Anisotropic and isotropic interpolation-error bounds without constants.

    ``order`` is the seminorm order of the error being bounded (2 Morley,
    1 Crouzeix-Raviart, 0 for the P0 projection).
    """
    q = mesh.parameters()
    _, pts, wts = _quad(mesh, degree)
    T = _tensor(psi, pts, order + 1)
    s1 = _directional_seminorm_sq(T, q["r1"], wts)
    s2 = _directional_seminorm_sq(T, q["r2"], wts)
    t1 = q["h1"] * np.sqrt(s1)
    t2 = q["h2"] * np.sqrt(s2)
    aniso = float(np.sqrt(np.sum((t1 + t2) ** 2)))
    full = T.reshape(T.shape[0], T.shape[1], -1) ** 2
    iso = float(np.sqrt(np.sum(q["hT"] ** 2 * np.einsum("cqk,cq->c", full, wts))))
    cons = float("nan")
    if order == 2 and hasattr(psi, "laplacian_grad"):
        lg = np.asarray(psi.laplacian_grad(pts.reshape(-1, 2))).reshape(pts.shape)
        cons = float(np.sqrt(np.sum(q["hT"] ** 2 * np.einsum("cqd,cq->c", lg**2, wts))))
    return BoundReport(aniso, iso, (float(np.sqrt(np.sum(t1**2))), float(np.sqrt(np.sum(t2**2)))), cons)


# --------------------------------------------------------------------------
# convergence records


def compute_eoc(h: Sequence[float], errors: Sequence[float]) -> np.ndarray:
    """Rates ln(e_{k-1}/e_k) / ln(h_{k-1}/h_k) for k = 1..L-1."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(h) < 2 or len(e) != len(h):
        raise InsufficientLevels("at least two levels are needed for a rate")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class ConvergenceRecord:
    """Per-level rows of a study; ``eoc`` maps an error column to its rates."""

    label: str
    rows: list = field(default_factory=list)
    error_columns: tuple = ()

    @property
    def columns(self) -> list:
        cols = []
        for r in self.rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        return cols

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    @property
    def eoc(self) -> dict:
        h = self.column("h")
        if np.any(np.diff(h) >= 0):
            raise ValueError("h must decrease strictly across levels")
        return {c: compute_eoc(h, self.column(c)) for c in self.error_columns}

    def table(self) -> list:
        """Rows extended with eoc_<column> entries (empty on the first level)."""
        rates = self.eoc if len(self.rows) > 1 else {}
        out = []
        for k, r in enumerate(self.rows):
            row = dict(r)
            for c in self.error_columns:
                row[f"eoc_{c}"] = rates[c][k - 1] if k > 0 and c in rates else ""
            out.append(row)
        return out

    def to_csv(self, path=None) -> str:
        rows = self.table()
        cols = list(rows[0].keys()) if rows else []
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        rates = self.eoc if len(self.rows) > 1 else {}
        return {
            "label": self.label,
            "rows": self.rows,
            "eoc": {k: v.tolist() for k, v in rates.items()},
        }


# --------------------------------------------------------------------------
# mesh families


def boundary_layer_family(levels: int, delta: float = 1e-2, start: int = 4,
                          layer_rows: int = 24, width_factor: float = 5.0) -> list:
    """Meshes for solutions with a layer of width delta at y = 0.

    The strip [0, width_factor * delta] gets ``layer_rows * 4^k`` rows on
    level k while the columns and the outer rows only double, so the cells
    inside the strip get thinner relative to their width on every level.
    """
    meshes = []
    for k in range(levels):
        n = start * 2**k
        meshes.append(layer_mesh(n, layer_rows * 4**k, n, width_factor * delta))
    return meshes


def mesh_family(name: str, levels: int, start: int = 8, delta: float = 1e-2, seed: int = 0) -> list:
    if name == "uniform":
        return [uniform_mesh(start * 2**k) for k in range(levels)]
    if name in ("boundary-layer", "boundary_layer"):
        return boundary_layer_family(levels, delta)
    if name == "perturbed":
        return [perturbed_mesh(start * 2**k, 0.2, seed) for k in range(levels)]
    raise ValueError(f"unknown mesh family {name!r}")


INTERP_SPACES = {"Morley": ("Morley", 2), "CR": ("CR", 1), "P0": ("P0dc", 0)}


def interpolation_study(psi, meshes, kind: str = "Morley", degree: Optional[int] = None) -> ConvergenceRecord:
    """Interpolation error and bounds for each mesh of a family."""
    if kind not in INTERP_SPACES:
        raise ValueError(f"unknown interpolation kind {kind!r}")
    space, order = INTERP_SPACES[kind]
    rec = ConvergenceRecord(f"interp-{kind}", error_columns=("err",))
    for mesh in meshes:
        dm = build_space(mesh, space)
        phi = global_interpolate(space, dm, psi.value, grad=psi.grad)
        err = broken_error(psi, phi, order, degree=degree)
        b = anisotropic_bound(psi, mesh, order, degree)
        met = mesh_metrics(mesh)
        rec.rows.append({
            "h": met["h"],
            "dofs": dm.n_active,
            "err": err,
            "bound_aniso": b.aniso,
            "bound_iso": b.iso,
            "ratio_aniso": err / b.aniso if b.aniso > 0 else float("nan"),
            "ratio_iso": err / b.iso if b.iso > 0 else float("nan"),
            "overprediction_iso": b.iso / b.aniso if b.aniso > 0 else float("nan"),
            "gamma0": met["gamma0"],
            "max_aspect": met["max_aspect"],
        })
    return rec


def convergence_study(method: str, psi, meshes, nu: float = 1.0, degree: Optional[int] = None,
                      compare_typical: bool = False) -> ConvergenceRecord:
    """Solve on every mesh and record broken errors, bounds and solver data.

    With ``compare_typical`` the typical method is solved as well and the
    broken H^2 distance between the two solutions is recorded as ``gap``.
    """
    cols = ("err_H2", "err_H1", "err_L2") + (("gap",) if compare_typical else ())
    rec = ConvergenceRecord(f"solve-{method}", error_columns=cols)

    def g(p):
        return psi.g(p, nu)

    def f(p):
        return psi.f(p, nu)

    for mesh in meshes:
        rep = solve_biharmonic(mesh, method, g=g, f=f, nu=nu, degree=degree)
        sol = rep.solution
        b = anisotropic_bound(psi, mesh, 2, degree)
        row = {
            "h": mesh.h,
            "dofs": rep.dofs,
            "err_H2": broken_error(psi, sol, 2, degree=degree),
            "err_H1": broken_error(psi, sol, 1, degree=degree),
            "err_L2": broken_error(psi, sol, 0, degree=degree),
            "bound_aniso": b.aniso,
            "bound_iso": b.iso,
            "bound_consistency": b.consistency,
            "residual": rep.residual,
        }
        row["ratio_aniso"] = row["err_H2"] / b.aniso if b.aniso > 0 else float("nan")
        if compare_typical:
            other = rep if method == "typical" else solve_biharmonic(mesh, "typical", g=g, nu=nu, degree=degree)
            diff = GlobalField(sol.dof_map, sol.coeffs - other.solution.coeffs)
            row["gap"] = discrete_seminorm(diff, 2)
            row["residual"] = max(row["residual"], other.residual)
        rec.rows.append(row)
    return rec


def lifting_stability(mesh: Mesh) -> float:
    """sup over Morley0 fields of |L phi|_{H^1} / |phi|_{H^2, broken}.

    L is the vertex-value lifting to continuous P1; the supremum is the square
    root of the largest generalized eigenvalue of (E^T K1 E, A).
    """
    from scipy.sparse.linalg import eigsh

    dm = build_space(mesh, "Morley0")
    dl = build_space(mesh, "Lagrange0")
    A = assemble_stiffness(dm, 1.0).tocsc()
    E = lagrange_lift_matrix(dm, dl)
    K1 = p1_stiffness(dl)
    B = (E.T @ K1 @ E).tocsc()
    n = A.shape[0]
    if n <= 400:
        from scipy.linalg import eigh

        w = eigh(B.toarray(), A.toarray(), eigvals_only=True)
        return float(np.sqrt(max(w[-1], 0.0)))
    # generalized symmetric problem B x = w A x, A factorised internally
    w = eigsh(B, k=1, M=A, which="LA", v0=np.ones(n), return_eigenvectors=False, tol=1e-12)
    return float(np.sqrt(max(float(np.max(w)), 0.0)))


def p1_stiffness(dl) -> sp.csr_matrix:
    """Continuous P1 Laplace stiffness on the active Lagrange DOFs."""
    ed = element_data(dl.mesh)
    G = ed["grads"]
    K = np.abs(ed["area"])[:, None, None] * np.einsum("cad,cbd->cab", G, G)
    idx = dl.active_cell_dofs()
    rows = np.broadcast_to(idx[:, :, None], K.shape)
    cols = np.broadcast_to(idx[:, None, :], K.shape)
    keep = (rows >= 0) & (cols >= 0)
    n = dl.n_active
    return sp.coo_matrix((K[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()


def stability_study(g, meshes, nu: float = 1.0) -> ConvergenceRecord:
    """|psi_h^*|_{H^2} / ||g||_{L2} for the modified method and the lifting ratio."""
    rec = ConvergenceRecord("stability")
    for mesh in meshes:
        rep = solve_biharmonic(mesh, "modified", g=g, nu=nu)
        rec.rows.append({
            "h": mesh.h,
            "dofs": rep.dofs,
            "solution_ratio": discrete_seminorm(rep.solution, 2) / l2_norm(g, mesh),
            "lifting_ratio": lifting_stability(mesh),
        })
    return rec


# --------------------------------------------------------------------------
# identity suite


@dataclass
class IdentityReport:
    residuals: dict
    tol: float = IDENTITY_TOL
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v < self.tol for v in self.residuals.values())

    def failures(self) -> list:
        return [k for k, v in self.residuals.items() if not v < self.tol]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "residuals": dict(self.residuals), "runtime": self.runtime}


def _random_points(mesh, rng, npts=20):
    lam = rng.dirichlet(np.ones(3), size=npts)
    return lam, np.einsum("qm,cmd->cqd", lam, mesh.coords)


def _orthogonality_matrices(mesh, dm_rt, dm_s, scalar_values, scalar_grads):
    """Matrix of sum_T int (v . grad s + div v s) over basis pairs.

    ``scalar_values`` (nc, nloc_s, nq) and ``scalar_grads`` (nc, nloc_s, nq, 2)
    tabulate the signed local scalar functions at the degree-2 points.
    """
    rule = triangle_rule(2)
    ed = element_data(mesh)
    area = ed["area"]
    pts = np.einsum("qm,cmd->cqd", rule.points, mesh.coords)
    w = 2.0 * np.abs(area)[:, None] * rule.weights[None, :]
    s_rt = dm_rt.cell_signs
    phi = s_rt[:, :, None, None] * (pts[:, None, :, :] - mesh.coords[:, :, None, :]) / (2.0 * area[:, None, None, None])
    div = s_rt / area[:, None]
    local = np.einsum("ciqd,cjqd,cq->cij", phi, scalar_grads, w) + np.einsum("ci,cjq,cq->cij", div, scalar_values, w)
    ri = dm_rt.active_cell_dofs()
    si = dm_s.active_cell_dofs()
    rows = np.broadcast_to(ri[:, :, None], local.shape)
    cols = np.broadcast_to(si[:, None, :], local.shape)
    keep = (rows >= 0) & (cols >= 0)
    M = sp.coo_matrix((local[keep], (rows[keep], cols[keep])), shape=(dm_rt.n_active, dm_s.n_active)).tocsr()
    # norms for the Cauchy-Schwarz scale: mass-like Gram matrices of v, div v, s, grad s
    def gram(a, b, dm):
        idx = dm.active_cell_dofs()
        a4 = a.reshape(a.shape[:3] + (-1,))
        b4 = b.reshape(b.shape[:3] + (-1,))
        loc = np.einsum("ciqk,cjqk,cq->cij", a4, b4, w)
        rr = np.broadcast_to(idx[:, :, None], loc.shape)
        cc = np.broadcast_to(idx[:, None, :], loc.shape)
        k = (rr >= 0) & (cc >= 0)
        return sp.coo_matrix((loc[k], (rr[k], cc[k])), shape=(dm.n_active, dm.n_active)).tocsr()

    div_q = np.broadcast_to(div[:, :, None], (mesh.n_cells, 3, len(rule.weights)))
    return M, {
        "v": gram(phi, phi, dm_rt),
        "divv": gram(div_q, div_q, dm_rt),
        "s": gram(scalar_values, scalar_values, dm_s),
        "grads": gram(scalar_grads, scalar_grads, dm_s),
    }, rule


def _pair_residuals(M, grams, V, S):
    """Scaled |v^T M s| for columns of V, S."""
    val = np.abs(np.sum(V * (M @ S), axis=0))
    nv = np.sqrt(np.sum(V * (grams["v"] @ V), axis=0))
    nd = np.sqrt(np.sum(V * (grams["divv"] @ V), axis=0))
    ns = np.sqrt(np.sum(S * (grams["s"] @ S), axis=0))
    ng = np.sqrt(np.sum(S * (grams["grads"] @ S), axis=0))
    return float(np.max(val / (nv * ng + nd * ns)))


def identity_suite(mesh: Mesh, seed: int = 0, flip_sign: bool = False, pairs: int = 200) -> IdentityReport:
    """Run the exact identities of the element families with random data.

    Every residual is divided by a natural scale of the quantities involved,
    so the suite is independent of mesh size and aspect ratio.  ``flip_sign``
    reverses the edge orientation of one interior face inside the higher
    cell, a deliberate bug that must make the suite fail.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    ed = element_data(mesh)
    res = {}
    coords = mesh.coords
    hT = mesh.diameters

    dmM = build_space(mesh, "Morley")
    dmM0 = build_space(mesh, "Morley0")
    dmCR = build_space(mesh, "CR")
    dmCR0 = build_space(mesh, "CR0")
    dmRT = build_space(mesh, "RT0")
    dmL = build_space(mesh, "Lagrange")
    if flip_sign:
        inner = np.flatnonzero(~mesh.fd.boundary)
        f0 = inner[0]
        c1 = mesh.fd.face_cells[f0, 1]
        loc = int(np.flatnonzero(mesh.fd.cell_faces[c1] == f0)[0])
        for dm in (dmM, dmM0):
            dm.cell_signs = dm.cell_signs.copy()
            dm.cell_signs[c1, 3 + loc] *= -1
        dmRT.cell_signs = dmRT.cell_signs.copy()
        dmRT.cell_signs[c1, loc] *= -1

    # Morley duality: DOFs of every local basis function, scaled by h_T
    c, Q, G = ed["morley_c"], ed["morley_Q"], ed["grads"]
    vert = quadratic_values(c, Q, np.eye(3))  # (nc, 6, 3)
    er = edge_rule(3)
    ep = edge_points(er.points)
    nrm = outward_normals(G)
    edge = np.empty((mesh.n_cells, 6, 3))
    for i in range(3):
        gr = quadratic_gradients(c, Q, G, ep[i])
        edge[:, :, i] = np.einsum("cbqd,cd,q->cb", gr, nrm[:, i], er.weights)
    D = np.concatenate([vert, edge * hT[:, None, None]], axis=2)  # rows basis, cols dofs
    scale = np.ones((mesh.n_cells, 6, 6))
    scale[:, 3:, :] = 1.0 / hT[:, None, None]
    res["morley_duality"] = float(np.max(np.abs(D * scale - np.eye(6)[None])))

    lam, X = _random_points(mesh, rng)
    flatX = X.reshape(-1, 2)

    # reproduction of P2 (Morley), P1 (CR, Lagrange) and RT0 fields
    q2 = Poly2D.random(2, rng)
    Fq = global_interpolate("Morley", dmM, q2.value, grad=q2.grad)
    ex = q2.value(flatX).reshape(X.shape[:2])
    res["morley_p2_reproduction"] = float(np.max(np.abs(Fq.values(lam) - ex)) / np.max(np.abs(ex)))
    q1 = Poly2D.random(1, rng)
    ex1 = q1.value(flatX).reshape(X.shape[:2])
    for name, dm in (("cr_p1_reproduction", dmCR), ("lagrange_p1_reproduction", dmL)):
        F1 = global_interpolate(dm.kind, dm, q1.value)
        res[name] = float(np.max(np.abs(F1.values(lam) - ex1)) / np.max(np.abs(ex1)))
    a, b = rng.standard_normal(), rng.standard_normal(2)

    def rt_field(p):
        return a * p + b

    Fr = global_interpolate("RT0", dmRT, rt_field)
    exr = rt_field(flatX).reshape(X.shape)
    res["rt0_reproduction"] = float(np.max(np.abs(Fr.values(lam) - exr)) / np.max(np.abs(exr)))

    # commuting identities with a random quartic (quadratic for RT0)
    q4 = Poly2D.random(4, rng)
    rule10 = triangle_rule(10)
    P10 = np.einsum("qm,cmd->cqd", rule10.points, coords)
    flat10 = P10.reshape(-1, 2)
    hess_mean = np.einsum("cqde,q->cde", q4.hessian(flat10).reshape(P10.shape + (2,)), 2 * rule10.weights)
    # residuals are measured against the size of the summed terms of each cell
    F4 = global_interpolate("Morley", dmM, q4.value, grad=q4.grad)
    u = np.abs(F4.local())
    hs = np.einsum("cb,cb->c", u, np.abs(ed["morley_hess"]).max(axis=(2, 3))) + np.abs(hess_mean).max(axis=(1, 2))
    res["hessian_commuting"] = float(np.max(np.abs(F4.hessians() - hess_mean).max(axis=(1, 2)) / hs))
    grad_mean = np.einsum("cqd,q->cd", q4.grad(flat10).reshape(P10.shape), 2 * rule10.weights)
    C4 = global_interpolate("CR", dmCR, q4.value)
    gs = 2.0 * np.einsum("cb,cb->c", np.abs(C4.local()), np.linalg.norm(G, axis=2)) + np.abs(grad_mean).max(axis=1)
    gerr = np.abs(C4.gradients(np.eye(3))[:, 0] - grad_mean).max(axis=1)
    res["gradient_commuting"] = float(np.max(gerr / gs))
    vx, vy = Poly2D.random(2, rng), Poly2D.random(2, rng)

    def vq(p):
        return np.stack([vx.value(p), vy.value(p)], axis=-1)

    div_mean = np.einsum(
        "cq,q->c",
        (vx.derivative(flat10, 1, 0) + vy.derivative(flat10, 0, 1)).reshape(P10.shape[:2]),
        2 * rule10.weights,
    )
    Vr = global_interpolate("RT0", dmRT, vq)
    ds = np.abs(Vr.local()).sum(axis=1) / np.abs(ed["area"]) + np.abs(div_mean)
    res["divergence_commuting"] = float(np.max(np.abs(Vr.divergence() - div_mean) / ds))

    # face integrals of the gradient of (interpolant - field) vanish
    er5 = edge_rule(5)
    ep5 = edge_points(er5.points)
    L = np.linalg.norm(coords[:, [2, 0, 1]] - coords[:, [1, 2, 0]], axis=-1)
    worst, gscale = 0.0, 0.0
    for i in range(3):
        xi = np.einsum("qm,cmd->cqd", ep5[i], coords)
        gex = q4.grad(xi.reshape(-1, 2)).reshape(xi.shape)
        gh = F4.gradients(ep5[i])
        integ = L[:, i, None] * np.einsum("cqd,q->cd", gh - gex, er5.weights)
        worst = max(worst, float(np.max(np.abs(integ))))
        gscale = max(gscale, float(np.max(L[:, i, None, None] * np.abs(gex))))
    res["face_gradient_vanishing"] = worst / gscale

    # orthogonality of RT0 against CR0 and against derivatives of Morley0
    Gc = ed["grads"]
    rule2 = triangle_rule(2)
    nq = len(rule2.weights)
    cr_vals = np.broadcast_to((1.0 - 2.0 * rule2.points.T)[None], (mesh.n_cells, 3, nq))
    cr_grads = np.broadcast_to(-2.0 * Gc[:, :, None, :], (mesh.n_cells, 3, nq, 2))
    M, grams, _ = _orthogonality_matrices(mesh, dmRT, dmCR0, cr_vals, cr_grads)
    V = rng.standard_normal((dmRT.n_active, pairs))
    S = rng.standard_normal((dmCR0.n_active, pairs))
    res["rt_cr_orthogonality"] = _pair_residuals(M, grams, V, S)
    gM = quadratic_gradients(c, Q, G, rule2.points) * dmM0.cell_signs[:, :, None, None]
    hM = ed["morley_hess"] * dmM0.cell_signs[:, :, None, None]
    S = rng.standard_normal((dmM0.n_active, pairs))
    worst = 0.0
    for i in range(2):
        vals = gM[..., i]
        grads = np.broadcast_to(hM[:, :, None, i, :], gM.shape)
        Mi, gi, _ = _orthogonality_matrices(mesh, dmRT, dmM0, vals, grads)
        worst = max(worst, _pair_residuals(Mi, gi, V, S))
    res["rt_morley_orthogonality"] = worst

    # jumps of Morley0 fields and RT0 fields across faces
    phi = GlobalField(dmM0, rng.standard_normal(dmM0.n_active))
    gmax = max(float(np.max(np.abs(face_traces(phi, q, er5.points)))) for q in ("dx1", "dx2"))
    worst = 0.0
    for qn in ("dx1", "dx2", "normal_derivative"):
        j = face_jump_integrals(phi, qn, npoints=5)
        worst = max(worst, float(np.max(np.abs(j) / mesh.fd.measures)))
    res["morley_gradient_jumps"] = worst / gmax
    v = GlobalField(dmRT, rng.standard_normal(dmRT.n_active))
    trv = face_traces(v, "normal_flux", [0.0, 1.0])
    inner = ~mesh.fd.boundary
    res["rt_normal_jump"] = float(np.max(np.abs(trv[inner, 0] - trv[inner, 1])) / np.max(np.abs(trv)))
    curl = broken_curl(phi)
    cmax = float(np.max(np.abs(curl.vertex_values)))
    jm = curl.face_means(0)[inner] - curl.face_means(1)[inner]
    res["curl_edge_mean_continuity"] = float(np.max(np.abs(jm))) / cmax
    hmax = float(np.max(np.abs(phi.hessians())))
    res["div_curl_zero"] = float(np.max(np.abs(curl.divergence()))) / hmax
    return IdentityReport(res, runtime=time.perf_counter() - t0)
