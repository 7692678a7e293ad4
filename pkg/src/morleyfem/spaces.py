"""
Global finite element spaces on 2D triangle meshes.

Supported kinds:

    Morley0, Morley   vertex values + mean normal derivative per edge
    CR0, CR           edge means
    RT0               normal flux per edge (no boundary elimination)
    Lagrange0, Lagrange   vertex values
    P0dc              one value per cell

A trailing ``0`` means the boundary degrees of freedom are eliminated; the
field coefficient vector then only holds the active entries.  Edge-based
functionals use the global face normal ``mesh.fd.normals``, so every cell
multiplies its local edge functions by ``mesh.fd.cell_face_sign``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .elements import (
    morley_coefficients,
    quadratic_hessians,
    triangle_data,
)
from .geometry import Mesh
from .quadrature import default_degree, edge_rule, edge_rule_matching, triangle_rule

SPACE_KINDS = ("Morley0", "Morley", "CR0", "CR", "RT0", "Lagrange0", "Lagrange", "P0dc")


def element_data(mesh: Mesh) -> dict:
    """Cached per-cell areas, barycentric gradients and Morley coefficients."""
    if mesh.dim != 2:
        raise ValueError("finite element spaces are 2D only")
    if "elements" not in mesh._cache:
        area, grads = triangle_data(mesh.coords)
        c, Q = morley_coefficients(grads)
        mesh._cache["elements"] = {
            "area": area,
            "grads": grads,
            "morley_c": c,
            "morley_Q": Q,
            "morley_hess": quadratic_hessians(Q, grads),
        }
    return mesh._cache["elements"]


@dataclass
class DofMap:
    """Cell-to-global DOF numbering with sign multipliers and boundary elimination.

    ``cell_dofs[c]`` lists full (pre-elimination) indices in local order;
    ``full_to_active`` maps those to active indices, -1 for eliminated DOFs.
    """

    kind: str
    mesh: Mesh
    total_dofs: int
    cell_dofs: np.ndarray
    cell_signs: np.ndarray
    boundary: np.ndarray
    full_to_active: np.ndarray
    active_to_full: np.ndarray

    @property
    def family(self) -> str:
        if self.kind in ("P0dc", "RT0"):
            return self.kind
        return self.kind.rstrip("0")

    @property
    def n_active(self) -> int:
        return len(self.active_to_full)

    @property
    def local_size(self) -> int:
        return self.cell_dofs.shape[1]

    def expand(self, coeffs) -> np.ndarray:
        """Full coefficient vector with zeros in eliminated slots."""
        coeffs = np.asarray(coeffs, dtype=float)
        if len(coeffs) != self.n_active:
            raise ValueError(f"expected {self.n_active} coefficients, got {len(coeffs)}")
        full = np.zeros(self.total_dofs)
        full[self.active_to_full] = coeffs
        return full

    def restrict(self, full) -> np.ndarray:
        return np.asarray(full, dtype=float)[self.active_to_full]

    def local_coefficients(self, coeffs) -> np.ndarray:
        """Per-cell local coefficients (signs applied), shape (nc, nloc)."""
        return self.expand(coeffs)[self.cell_dofs] * self.cell_signs

    def active_cell_dofs(self) -> np.ndarray:
        return self.full_to_active[self.cell_dofs]


def build_space(mesh: Mesh, kind: str) -> DofMap:
    """Number the degrees of freedom of a space; vertices before edges."""
    if kind not in SPACE_KINDS:
        raise ValueError(f"unknown space kind {kind!r}; choose from {SPACE_KINDS}")
    if mesh.dim != 2:
        raise ValueError("finite element spaces are 2D only")
    fd = mesh.fd
    nv, nf, nc = mesh.n_points, mesh.n_faces, mesh.n_cells
    bpts = mesh.boundary_points
    ones3 = np.ones((nc, 3))
    if kind.startswith("Morley"):
        total = nv + nf
        dofs = np.hstack([mesh.cells, nv + fd.cell_faces])
        signs = np.hstack([ones3, fd.cell_face_sign.astype(float)])
        bnd = np.concatenate([bpts, fd.boundary])
    elif kind.startswith("CR"):
        total, dofs, signs, bnd = nf, fd.cell_faces.copy(), ones3, fd.boundary.copy()
    elif kind == "RT0":
        total, dofs, bnd = nf, fd.cell_faces.copy(), fd.boundary.copy()
        signs = fd.cell_face_sign.astype(float)
    elif kind.startswith("Lagrange"):
        total, dofs, signs, bnd = nv, mesh.cells.copy(), ones3, bpts.copy()
    else:
        total, dofs = nc, np.arange(nc)[:, None]
        signs, bnd = np.ones((nc, 1)), np.zeros(nc, dtype=bool)
    eliminate = kind.endswith("0") and kind != "RT0"
    active = ~bnd if eliminate else np.ones(total, dtype=bool)
    a2f = np.flatnonzero(active)
    f2a = np.full(total, -1, dtype=np.int64)
    f2a[a2f] = np.arange(len(a2f))
    return DofMap(kind, mesh, total, dofs.astype(np.int64), signs, bnd, f2a, a2f)


# --------------------------------------------------------------------------
# fields


class GlobalField:
    """Coefficient vector (active DOFs) attached to a DofMap."""

    def __init__(self, dof_map: DofMap, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (dof_map.n_active,):
            raise ValueError(f"coefficient length {coeffs.shape} does not match {dof_map.n_active} active DOFs")
        self.dof_map = dof_map
        self.coeffs = coeffs

    @property
    def kind(self) -> str:
        return self.dof_map.kind

    @property
    def mesh(self) -> Mesh:
        return self.dof_map.mesh

    def full(self) -> np.ndarray:
        return self.dof_map.expand(self.coeffs)

    def local(self) -> np.ndarray:
        return self.dof_map.local_coefficients(self.coeffs)

    def __add__(self, other):
        return GlobalField(self.dof_map, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return GlobalField(self.dof_map, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return GlobalField(self.dof_map, a * self.coeffs)

    __rmul__ = __mul__

    # ---- evaluation; bary is (nq, 3) shared by all cells or (n, nq, 3) per cell
    def _prep(self, bary, cells):
        cells = np.arange(self.mesh.n_cells) if cells is None else np.asarray(cells)
        bary = np.asarray(bary, dtype=float)
        if bary.ndim == 2:
            bary = np.broadcast_to(bary, (len(cells),) + bary.shape)
        return bary, cells

    def _combined_quadratic(self, cells):
        ed = element_data(self.mesh)
        u = self.local()[cells]
        fam = self.dof_map.family
        if fam == "Morley":
            c = np.einsum("cb,cbm->cm", u, ed["morley_c"][cells])
            Q = np.einsum("cb,cbmn->cmn", u, ed["morley_Q"][cells])
        elif fam == "CR":
            c = -2.0 * u + u.sum(axis=1, keepdims=True)
            Q = np.zeros((len(cells), 3, 3))
        elif fam == "Lagrange":
            c = u
            Q = np.zeros((len(cells), 3, 3))
        elif fam == "P0dc":
            c = np.repeat(u, 3, axis=1)
            Q = np.zeros((len(cells), 3, 3))
        else:
            raise ValueError("use rt_affine for RT0 fields")
        return c, Q, ed["grads"][cells]

    def values(self, bary, cells=None) -> np.ndarray:
        """Values at barycentric points, shape (n, nq) (or (n, nq, 2) for RT0)."""
        bary, cells = self._prep(bary, cells)
        if self.dof_map.family == "RT0":
            A, b = self.rt_affine(cells)
            x = np.einsum("cqm,cmd->cqd", bary, self.mesh.coords[cells])
            return A[:, None, None] * x + b[:, None, :]
        c, Q, _ = self._combined_quadratic(cells)
        return np.einsum("cm,cqm->cq", c, bary) + np.einsum("cqm,cmn,cqn->cq", bary, Q, bary)

    def gradients(self, bary, cells=None) -> np.ndarray:
        """Gradients at barycentric points, shape (n, nq, 2)."""
        bary, cells = self._prep(bary, cells)
        c, Q, G = self._combined_quadratic(cells)
        coef = c[:, None, :] + 2.0 * np.einsum("cmn,cqn->cqm", Q, bary)
        return np.einsum("cqm,cmd->cqd", coef, G)

    def hessians(self, cells=None) -> np.ndarray:
        """Constant per-cell Hessians, shape (n, 2, 2)."""
        cells = np.arange(self.mesh.n_cells) if cells is None else np.asarray(cells)
        c, Q, G = self._combined_quadratic(cells)
        return 2.0 * np.einsum("cmd,cmn,cne->cde", G, Q, G)

    def rt_affine(self, cells=None):
        """RT0 field on each cell written as v(x) = A x + b; returns (A, b)."""
        if self.dof_map.family != "RT0":
            raise ValueError("not an RT0 field")
        cells = np.arange(self.mesh.n_cells) if cells is None else np.asarray(cells)
        ed = element_data(self.mesh)
        u = self.local()[cells] / (2.0 * ed["area"][cells, None])
        A = u.sum(axis=1)
        b = -np.einsum("ci,cid->cd", u, self.mesh.coords[cells])
        return A, b

    def divergence(self) -> np.ndarray:
        A, _ = self.rt_affine()
        return 2.0 * A

    # ---- export
    def to_dict(self) -> dict:
        return {"space": self.kind, "coeffs": self.coeffs.tolist()}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, mesh: Mesh, data: dict) -> "GlobalField":
        dm = build_space(mesh, data["space"])
        return cls(dm, data["coeffs"])


# --------------------------------------------------------------------------
# face geometry helpers


def face_bary(mesh: Mesh, side: int, s) -> tuple:
    """Cells and barycentric coordinates of face points seen from one side.

    Face points are parametrised by s in [0, 1] from ``faces[f, 0]`` to
    ``faces[f, 1]``.  ``side`` 0 is the lower-indexed cell, 1 the higher; faces
    without that neighbour are skipped.  Returns (face_ids, cells, local_edge,
    bary (n, ns, 3)).
    """
    fd = mesh.fd
    s = np.asarray(s, dtype=float)
    fids = np.flatnonzero(fd.face_cells[:, side] >= 0)
    cells = fd.face_cells[fids, side]
    loc = np.argmax(fd.cell_faces[cells] == fids[:, None], axis=1)
    start = mesh.cells[cells, (loc + 1) % 3]
    forward = start == fd.faces[fids, 0]
    bary = np.zeros((len(fids), len(s), 3))
    r = np.arange(len(fids))
    a = np.where(forward[:, None], 1.0 - s[None, :], s[None, :])
    bary[r, :, (loc + 1) % 3] = a
    bary[r, :, (loc + 2) % 3] = 1.0 - a
    return fids, cells, loc, bary


def face_points(mesh: Mesh, s) -> np.ndarray:
    """Physical points (nf, ns, 2) along every face."""
    p0 = mesh.points[mesh.fd.faces[:, 0]]
    p1 = mesh.points[mesh.fd.faces[:, 1]]
    s = np.asarray(s, dtype=float)
    return p0[:, None, :] * (1.0 - s)[None, :, None] + p1[:, None, :] * s[None, :, None]


# --------------------------------------------------------------------------
# interpolation


def _call(fn, pts):
    shp = pts.shape[:-1]
    out = np.asarray(fn(pts.reshape(-1, pts.shape[-1])), dtype=float)
    return out.reshape(shp + out.shape[1:])


def global_interpolate(kind: str, dof_map: DofMap, phi, grad=None, degree: Optional[int] = None) -> GlobalField:
    """Global interpolant of an analytic field into the space of ``dof_map``.

    ``phi`` and ``grad`` are vectorised over (n, 2) point arrays.  Face
    functionals are computed once per face, so interior DOFs are single valued.
    For the "0" spaces the boundary functionals are dropped.
    """
    mesh = dof_map.mesh
    fam = dof_map.family
    if kind not in (fam, dof_map.kind):
        raise ValueError(f"interpolation kind {kind!r} does not match space {dof_map.kind!r}")
    er = edge_rule(5) if degree is None else edge_rule_matching(degree)
    fd = mesh.fd
    if fam == "P0dc":
        rule = triangle_rule(default_degree() if degree is None else degree)
        pts = np.einsum("qm,cmd->cqd", rule.points, mesh.coords)
        full = 2.0 * _call(phi, pts) @ rule.weights
    elif fam == "Lagrange":
        full = _call(phi, mesh.points)
    elif fam == "CR":
        full = _call(phi, face_points(mesh, er.points)) @ er.weights
    elif fam == "Morley":
        if grad is None:
            raise ValueError("Morley interpolation needs the gradient")
        g = _call(grad, face_points(mesh, er.points))
        dn = np.einsum("fqd,fd->fq", g, fd.normals) @ er.weights
        full = np.concatenate([_call(phi, mesh.points), dn])
    elif fam == "RT0":
        v = _call(phi, face_points(mesh, er.points))
        full = fd.measures * (np.einsum("fqd,fd->fq", v, fd.normals) @ er.weights)
    else:
        raise ValueError(fam)
    return GlobalField(dof_map, dof_map.restrict(full))


def morley_to_lagrange(dm_morley: DofMap, dm_lagrange: DofMap, psi_h: GlobalField) -> GlobalField:
    """Continuous P1 field through the vertex values of a Morley field."""
    nv = dm_morley.mesh.n_points
    vert = psi_h.full()[:nv]
    return GlobalField(dm_lagrange, dm_lagrange.restrict(vert))


def lagrange_lift_matrix(dm_morley: DofMap, dm_lagrange: DofMap):
    """Sparse matrix E with Lagrange coeffs = E @ Morley coeffs (active DOFs)."""
    from scipy.sparse import csr_matrix

    nv = dm_morley.mesh.n_points
    rows, cols = [], []
    for v in range(nv):
        a_l = dm_lagrange.full_to_active[v]
        a_m = dm_morley.full_to_active[v]
        if a_l >= 0 and a_m >= 0:
            rows.append(a_l)
            cols.append(a_m)
    return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(dm_lagrange.n_active, dm_morley.n_active))


def rt_from_face_fluxes(dm_rt: DofMap, fluxes) -> GlobalField:
    return GlobalField(dm_rt, np.asarray(fluxes, dtype=float))


# --------------------------------------------------------------------------
# broken curl


@dataclass
class BrokenVectorField:
    """Per-cell P1 vector field stored by its values at the cell vertices (nc, 3, 2)."""

    mesh: Mesh
    vertex_values: np.ndarray

    def values(self, bary, cells=None) -> np.ndarray:
        cells = np.arange(self.mesh.n_cells) if cells is None else np.asarray(cells)
        bary = np.asarray(bary, dtype=float)
        if bary.ndim == 2:
            return np.einsum("qm,cmd->cqd", bary, self.vertex_values[cells])
        return np.einsum("cqm,cmd->cqd", bary, self.vertex_values[cells])

    def divergence(self) -> np.ndarray:
        G = element_data(self.mesh)["grads"]
        return np.einsum("cmd,cmd->c", self.vertex_values, G)

    def edge_means(self) -> np.ndarray:
        """Mean over each local edge, shape (nc, 3, 2)."""
        V = self.vertex_values
        return 0.5 * (V[:, [1, 2, 0]] + V[:, [2, 0, 1]])

    def face_means(self, side: int = 0) -> np.ndarray:
        """Edge means taken from one adjacent cell per face (nf, 2), NaN where absent."""
        fd = self.mesh.fd
        out = np.full((self.mesh.n_faces, 2), np.nan)
        cells = fd.face_cells[:, side]
        ok = cells >= 0
        loc = np.argmax(fd.cell_faces[cells[ok]] == np.flatnonzero(ok)[:, None], axis=1)
        out[ok] = self.edge_means()[cells[ok], loc]
        return out

    def rt_interpolate(self, dm_rt: DofMap) -> GlobalField:
        """RT0 interpolant using the edge mean from the lower-indexed cell."""
        fd = self.mesh.fd
        flux = fd.measures * np.einsum("fd,fd->f", self.face_means(0), fd.normals)
        return GlobalField(dm_rt, flux)


def broken_curl(psi_h: GlobalField) -> BrokenVectorField:
    """Cellwise curl (d/dy, -d/dx) of a Morley field."""
    if psi_h.dof_map.family != "Morley":
        raise ValueError("broken_curl expects a Morley field")
    g = psi_h.gradients(np.eye(3))
    return BrokenVectorField(psi_h.mesh, np.stack([g[..., 1], -g[..., 0]], axis=-1))


# --------------------------------------------------------------------------
# face jumps

JUMP_QUANTITIES = ("value", "normal_derivative", "dx1", "dx2", "normal_flux")


def face_traces(field, quantity: str, s) -> np.ndarray:
    """Traces of a quantity on every face from both sides, shape (nf, 2, ns).

    Missing neighbours (boundary faces) give zero traces, so the jump
    trace[:, 0] - trace[:, 1] reduces to the one-sided trace there.
    """
    mesh = field.mesh
    nf = mesh.n_faces
    s = np.asarray(s, dtype=float)
    out = np.zeros((nf, 2, len(s)))
    normals = mesh.fd.normals
    for side in (0, 1):
        fids, cells, _, bary = face_bary(mesh, side, s)
        if len(fids) == 0:
            continue
        if quantity == "value":
            val = field.values(bary, cells)
        elif quantity == "normal_flux":
            v = field.values(bary, cells)
            val = np.einsum("cqd,cd->cq", v, normals[fids])
        else:
            g = field.gradients(bary, cells)
            if quantity == "normal_derivative":
                val = np.einsum("cqd,cd->cq", g, normals[fids])
            elif quantity == "dx1":
                val = g[..., 0]
            elif quantity == "dx2":
                val = g[..., 1]
            else:
                raise ValueError(f"unknown quantity {quantity!r}; choose from {JUMP_QUANTITIES}")
        out[fids, side] = val
    return out


def face_jump_integrals(field, quantity: str, npoints: int = 3) -> np.ndarray:
    """Integral over each face of the jump (lower cell minus higher cell).

    Boundary faces carry the one-sided trace integral.
    """
    er = edge_rule(npoints)
    tr = face_traces(field, quantity, er.points)
    jump = tr[:, 0] - tr[:, 1]
    return field.mesh.fd.measures * (jump @ er.weights)
