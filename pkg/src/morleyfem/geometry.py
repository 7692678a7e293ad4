"""
Simplicial meshes and the anisotropic element parameters.

For a triangle the vertices are relabelled so that p2p3 is the longest edge
and h1 = |p1 - p2| >= h2 = |p1 - p3|.  From that labelling come the
directions r1, r2, the parameter H_T = h1 h2 h_T / |T| and the scaled
heights (h1, h2 sin(angle at p1)).  Tetrahedra follow the shortest-edge
construction with a Type I / Type II split decided by the bisector plane of
the longest edge adjacent to the shortest one.

Mesh generation is restricted to the unit square; 3D meshes enter only
through JSON files and are used for geometry auditing.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import factorial
from typing import Optional

import numpy as np

from .errors import DegenerateSimplex, InvalidSpec, NonConformalMesh

DEGENERACY_TOL = 1e-14
TIE_TOL = 1e-14  # relative; lengths this close count as equal (a few ulp of rounding)
HALFSPACE_TOL = 1e-12


@dataclass(frozen=True)
class SimplexGeometry:
    """Anisotropic parameters of one simplex after vertex reordering.

    ``ordered_vertices`` are global point indices p1..p_{d+1}; ``coords`` are
    their coordinates in that order.  ``mathscrH`` holds the scaled lengths
    (h1, h2 t) in 2D and (h1, h2 t1, h3 t2) in 3D.
    """

    ordered_vertices: tuple
    coords: np.ndarray
    h: tuple
    h_T: float
    r: np.ndarray
    H_T: float
    mathscrH: tuple
    type3d: str
    max_angle: float
    measure: float
    good_ratios: tuple = ()
    assumption_ratio: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def semi_regularity(self) -> float:
        return self.H_T / self.h_T


@dataclass(frozen=True)
class Face:
    vertices: tuple
    cells: tuple
    normal: np.ndarray
    measure: float
    boundary: bool


# --------------------------------------------------------------------------
# simplex-level helpers


def simplex_measure(coords):
    """Signed measure of a d-simplex given (d+1, d) coordinates (batched)."""
    coords = np.asarray(coords, dtype=float)
    d = coords.shape[-1]
    B = coords[..., 1:, :] - coords[..., :1, :]
    return np.linalg.det(B) / factorial(d)


def barycentric_gradients(coords):
    """Gradients of the barycentric coordinates, shape (..., d+1, d)."""
    coords = np.asarray(coords, dtype=float)
    B = np.swapaxes(coords[..., 1:, :] - coords[..., :1, :], -1, -2)
    Binv = np.linalg.inv(B)
    g = Binv  # row j is grad lambda_{j+1}
    g0 = -g.sum(axis=-2, keepdims=True)
    return np.concatenate([g0, g], axis=-2)


def _edge_key(a, b, n):
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return lo.astype(np.int64) * (n + 1) + hi


def triangle_parameters(points, cells):
    """Vectorised vertex ordering and anisotropic parameters for triangles.

    Returns a dict of arrays indexed by cell.  Raises DegenerateSimplex if any
    triangle has |T| < 1e-14 h_T^2.
    """
    points = np.asarray(points, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    nc = len(cells)
    ar = np.arange(nc)
    P = points[cells]
    # length of the edge opposite local vertex i
    L = np.linalg.norm(P[:, [2, 0, 1]] - P[:, [1, 2, 0]], axis=-1)
    Lmax = L.max(axis=1)
    area = 0.5 * np.abs(
        (P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1])
        - (P[:, 2, 0] - P[:, 0, 0]) * (P[:, 1, 1] - P[:, 0, 1])
    )
    bad = ~(area >= DEGENERACY_TOL * Lmax**2) | ~(area > 0)
    if np.any(bad):
        raise DegenerateSimplex(f"degenerate triangle(s) at cells {np.flatnonzero(bad)[:10].tolist()}")

    big = np.iinfo(np.int64).max
    key = _edge_key(cells[:, [1, 2, 0]], cells[:, [2, 0, 1]], len(points))
    key = np.where(L >= Lmax[:, None] * (1 - TIE_TOL), key, big)
    i1 = np.argmin(key, axis=1)
    j = (i1 + 1) % 3
    k = (i1 + 2) % 3
    p1 = P[ar, i1]
    dj = np.linalg.norm(P[ar, j] - p1, axis=1)
    dk = np.linalg.norm(P[ar, k] - p1, axis=1)
    gj = cells[ar, j]
    gk = cells[ar, k]
    tie = np.abs(dj - dk) <= TIE_TOL * np.maximum(dj, dk)
    pick_j = np.where(tie, gj < gk, dj > dk)
    i2 = np.where(pick_j, j, k)
    i3 = np.where(pick_j, k, j)
    p2 = P[ar, i2]
    p3 = P[ar, i3]
    h1 = np.linalg.norm(p2 - p1, axis=1)
    h2 = np.linalg.norm(p3 - p1, axis=1)
    hT = Lmax
    r1 = (p2 - p1) / h1[:, None]
    r2 = (p3 - p1) / h2[:, None]
    # all three angles: within the tie tolerance the angle at p1 need not be the largest
    ea = P[:, [1, 2, 0]] - P
    eb = P[:, [2, 0, 1]] - P
    cross = np.abs(ea[..., 0] * eb[..., 1] - ea[..., 1] * eb[..., 0])
    dot = np.einsum("cij,cij->ci", ea, eb)
    max_angle = np.arctan2(cross, dot).max(axis=1)
    t = 2.0 * area / (h1 * h2)
    return {
        "order": np.column_stack([cells[ar, i1], cells[ar, i2], cells[ar, i3]]),
        "local_order": np.column_stack([i1, i2, i3]),
        "h1": h1,
        "h2": h2,
        "hT": hT,
        "r1": r1,
        "r2": r2,
        "area": area,
        "HT": h1 * h2 * hT / area,
        "t": t,
        "max_angle": max_angle,
    }


def order_vertices_2d(cell, points) -> SimplexGeometry:
    """Longest-edge vertex labelling of one triangle and its anisotropic parameters."""
    cell = np.asarray(cell, dtype=np.int64).reshape(1, 3)
    q = triangle_parameters(points, cell)
    order = tuple(int(v) for v in q["order"][0])
    h1, h2, hT, t = (float(q[n][0]) for n in ("h1", "h2", "hT", "t"))
    return SimplexGeometry(
        ordered_vertices=order,
        coords=np.asarray(points, dtype=float)[list(order)],
        h=(h1, h2),
        h_T=hT,
        r=np.vstack([q["r1"][0], q["r2"][0]]),
        H_T=float(q["HT"][0]),
        mathscrH=(h1, h2 * t),
        type3d="NotApplicable",
        max_angle=float(q["max_angle"][0]),
        measure=float(q["area"][0]),
        good_ratios=(t,),
    )


def _tet_angles(X):
    """Largest face angle and largest dihedral angle of a tetrahedron."""
    best = 0.0
    for i in range(4):
        for j, k in itertools.combinations([m for m in range(4) if m != i], 2):
            a = X[j] - X[i]
            b = X[k] - X[i]
            best = max(best, np.arctan2(np.linalg.norm(np.cross(a, b)), a @ b))
    g = barycentric_gradients(X)
    for i, j in itertools.combinations(range(4), 2):
        # dihedral angle along the edge opposite faces i and j
        c = -(g[i] @ g[j]) / (np.linalg.norm(g[i]) * np.linalg.norm(g[j]))
        best = max(best, np.arccos(np.clip(c, -1.0, 1.0)))
    return float(best)


def order_vertices_3d(cell, points) -> SimplexGeometry:
    """Shortest-edge vertex labelling of one tetrahedron.

    When several edges tie for the shortest / adjacent-longest role, every
    admissible choice is examined; choices giving a decisive half-space test
    are preferred over ones where a vertex lies on the bisector plane, and the
    remaining ties fall to the lexicographically smallest vertex pairs.
    """
    cell = [int(v) for v in cell]
    if len(cell) != 4:
        raise ValueError("a tetrahedron needs 4 vertices")
    X = {v: np.asarray(points[v], dtype=float) for v in cell}
    edges = [tuple(sorted(e)) for e in itertools.combinations(cell, 2)]
    length = {e: float(np.linalg.norm(X[e[0]] - X[e[1]])) for e in edges}
    hT = max(length.values())
    vol = abs(float(simplex_measure(np.array([X[v] for v in cell]))))
    if not (vol >= DEGENERACY_TOL * hT**3 and vol > 0):
        raise DegenerateSimplex(f"degenerate tetrahedron {cell}")

    lmin = min(length.values())
    min_edges = [e for e in edges if length[e] <= lmin * (1 + TIE_TOL)]
    candidates = []
    for emin in min_edges:
        adj = [e for e in edges if e != emin and set(e) & set(emin)]
        lmax = max(length[e] for e in adj)
        for emax in (e for e in adj if length[e] >= lmax * (1 - TIE_TOL)):
            a = (set(emin) & set(emax)).pop()
            b = (set(emax) - {a}).pop()
            c = (set(emin) - {a}).pop()
            d = (set(cell) - {a, b, c}).pop()
            mid = 0.5 * (X[a] + X[b])
            nrm = (X[a] - X[b]) / np.linalg.norm(X[a] - X[b])
            sc = (X[c] - mid) @ nrm
            sd = (X[d] - mid) @ nrm
            tol = HALFSPACE_TOL * hT
            on_plane = abs(sc) <= tol or abs(sd) <= tol
            if on_plane or np.sign(sc) == np.sign(sd):
                kind, order = "TypeI", (a, b, c, d)
            else:
                kind, order = "TypeII", (b, a, c, d)
            candidates.append((on_plane, emin, emax, kind, order))
    candidates.sort(key=lambda z: (z[0], z[1], z[2]))
    _, _, _, kind, order = candidates[0]
    p1, p2, p3, p4 = (X[v] for v in order)
    h1 = float(np.linalg.norm(p2 - p1))
    h3 = float(np.linalg.norm(p4 - p1))
    if kind == "TypeI":
        h2 = float(np.linalg.norm(p3 - p1))
        r2 = (p3 - p1) / h2
    else:
        h2 = float(np.linalg.norm(p3 - p2))
        r2 = (p3 - p2) / h2
    r1 = (p2 - p1) / h1
    r3 = (p4 - p1) / h3
    # local frame of the reference construction: e1 = r1, e2 in plane(r1, r2)
    t1 = float(np.linalg.norm(np.cross(r1, r2)))
    e2 = r2 - (r2 @ r1) * r1
    e2 /= np.linalg.norm(e2)
    e3 = np.cross(r1, e2)
    s22 = float(r3 @ e2)
    t2 = abs(float(r3 @ e3))
    return SimplexGeometry(
        ordered_vertices=tuple(order),
        coords=np.array([p1, p2, p3, p4]),
        h=(h1, h2, h3),
        h_T=hT,
        r=np.vstack([r1, r2, r3]),
        H_T=h1 * h2 * h3 * hT / vol,
        mathscrH=(h1, h2 * t1, h3 * t2),
        type3d=kind,
        max_angle=_tet_angles(np.array([p1, p2, p3, p4])),
        measure=vol,
        good_ratios=(t1, t2),
        assumption_ratio=abs(s22) * h3 / (h2 * t1),
    )


# --------------------------------------------------------------------------
# faces


@dataclass
class FaceData:
    """Face connectivity arrays.

    ``faces`` holds sorted vertex indices; ``face_cells`` the adjacent cells in
    increasing order (second entry -1 on the boundary); ``cell_faces[c, i]`` is
    the face opposite local vertex i; ``cell_face_sign[c, i]`` is +1 when the
    outward normal of cell c on that face equals the global normal ``normals``.
    The global normal is the outward normal of the lower-indexed adjacent cell,
    which is the outward normal of the domain on boundary faces.
    """

    faces: np.ndarray
    face_cells: np.ndarray
    cell_faces: np.ndarray
    cell_face_sign: np.ndarray
    normals: np.ndarray
    measures: np.ndarray
    boundary: np.ndarray

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_interior(self) -> int:
        return int(np.count_nonzero(~self.boundary))

    @property
    def n_boundary(self) -> int:
        return int(np.count_nonzero(self.boundary))


def _face_measure(coords):
    # coords (..., d, d): vertices of a (d-1)-simplex embedded in R^d
    d = coords.shape[-1]
    if d == 2:
        return np.linalg.norm(coords[..., 1, :] - coords[..., 0, :], axis=-1)
    return 0.5 * np.linalg.norm(
        np.cross(coords[..., 1, :] - coords[..., 0, :], coords[..., 2, :] - coords[..., 0, :]), axis=-1
    )


def build_faces(points, cells) -> FaceData:
    """Face list and adjacency of a conformal simplicial mesh."""
    points = np.asarray(points, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    nc, nv = cells.shape
    d = nv - 1
    srt = np.sort(cells, axis=1)
    if len(np.unique(srt, axis=0)) != nc:
        raise NonConformalMesh("duplicated cells")
    local = np.array([[m for m in range(nv) if m != i] for i in range(nv)])
    all_faces = np.sort(cells[:, local], axis=2).reshape(-1, d)
    faces, inverse, counts = np.unique(all_faces, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise NonConformalMesh(f"{int(np.count_nonzero(counts > 2))} face(s) shared by more than two cells")
    cell_faces = inverse.reshape(nc, nv)
    owner = np.repeat(np.arange(nc), nv)
    order = np.lexsort((owner, inverse))
    face_cells = np.full((len(faces), 2), -1, dtype=np.int64)
    f_sorted = inverse[order]
    c_sorted = owner[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = f_sorted[1:] != f_sorted[:-1]
    face_cells[f_sorted[first], 0] = c_sorted[first]
    face_cells[f_sorted[~first], 1] = c_sorted[~first]
    boundary = face_cells[:, 1] < 0

    grads = barycentric_gradients(points[cells])
    outward = -grads / np.linalg.norm(grads, axis=-1, keepdims=True)
    sign = np.where(face_cells[cell_faces, 0] == np.arange(nc)[:, None], 1, -1)
    # global normal = outward normal of the owning (lower-indexed) cell
    own_cell = face_cells[:, 0]
    own_local = np.argmax(cell_faces[own_cell] == np.arange(len(faces))[:, None], axis=1)
    normals = outward[own_cell, own_local]

    inner = ~boundary
    if np.any(inner):
        f_in = np.flatnonzero(inner)
        c1 = face_cells[f_in, 1]
        l1 = np.argmax(cell_faces[c1] == f_in[:, None], axis=1)
        n1 = outward[c1, l1]
        if np.any(np.einsum("ij,ij->i", n1, normals[f_in]) > -0.5):
            raise NonConformalMesh("overlapping cells: a shared face has both cells on one side")
    return FaceData(
        faces=faces,
        face_cells=face_cells,
        cell_faces=cell_faces,
        cell_face_sign=sign.astype(np.int64),
        normals=normals,
        measures=_face_measure(points[faces]),
        boundary=boundary,
    )


# --------------------------------------------------------------------------
# mesh


class Mesh:
    """Conformal simplicial mesh with positively oriented cells.

    Negatively oriented input cells are reoriented by swapping their last two
    vertices.  Faces are built on construction.
    """

    def __init__(self, points, cells):
        points = np.asarray(points, dtype=float)
        cells = np.array(cells, dtype=np.int64)
        if points.ndim != 2 or points.shape[1] not in (2, 3):
            raise InvalidSpec("points must be an (n, 2) or (n, 3) array")
        if cells.ndim != 2 or cells.shape[1] != points.shape[1] + 1:
            raise InvalidSpec("cells must list d+1 vertex indices each")
        if not np.all(np.isfinite(points)):
            raise InvalidSpec("non-finite coordinates")
        if cells.size and (cells.min() < 0 or cells.max() >= len(points)):
            raise InvalidSpec("cell vertex index out of range")
        d = points.shape[1]
        vol = simplex_measure(points[cells])
        diam = np.max(
            [np.linalg.norm(points[cells[:, i]] - points[cells[:, j]], axis=1)
             for i, j in itertools.combinations(range(d + 1), 2)],
            axis=0,
        )
        bad = ~(np.abs(vol) >= DEGENERACY_TOL * diam**d) | ~(np.abs(vol) > 0)
        if np.any(bad):
            raise DegenerateSimplex(f"degenerate cell(s) {np.flatnonzero(bad)[:10].tolist()}")
        neg = vol < 0
        cells[neg, -2], cells[neg, -1] = cells[neg, -1].copy(), cells[neg, -2].copy()
        self.points = points
        self.cells = cells
        self.fd = build_faces(points, cells)
        self._cache = {}

    # basic sizes
    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return self.fd.n_faces

    @property
    def coords(self) -> np.ndarray:
        """Cell vertex coordinates, shape (n_cells, d+1, d)."""
        if "coords" not in self._cache:
            self._cache["coords"] = self.points[self.cells]
        return self._cache["coords"]

    @property
    def measures(self) -> np.ndarray:
        if "measures" not in self._cache:
            self._cache["measures"] = simplex_measure(self.coords)
        return self._cache["measures"]

    @property
    def grads(self) -> np.ndarray:
        """Barycentric gradients, shape (n_cells, d+1, d)."""
        if "grads" not in self._cache:
            self._cache["grads"] = barycentric_gradients(self.coords)
        return self._cache["grads"]

    @property
    def boundary_points(self) -> np.ndarray:
        if "bpts" not in self._cache:
            mask = np.zeros(self.n_points, dtype=bool)
            mask[self.fd.faces[self.fd.boundary].ravel()] = True
            self._cache["bpts"] = mask
        return self._cache["bpts"]

    @property
    def diameters(self) -> np.ndarray:
        d = self.dim
        return np.max(
            [np.linalg.norm(self.coords[:, i] - self.coords[:, j], axis=1)
             for i, j in itertools.combinations(range(d + 1), 2)],
            axis=0,
        )

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def face(self, i: int) -> Face:
        fc = self.fd.face_cells[i]
        return Face(
            vertices=tuple(int(v) for v in self.fd.faces[i]),
            cells=tuple(int(c) for c in fc if c >= 0),
            normal=self.fd.normals[i].copy(),
            measure=float(self.fd.measures[i]),
            boundary=bool(self.fd.boundary[i]),
        )

    def parameters(self) -> dict:
        """Per-cell anisotropic parameters (2D, vectorised)."""
        if self.dim != 2:
            raise ValueError("vectorised parameters are 2D only; use geometry() for 3D")
        if "params" not in self._cache:
            self._cache["params"] = triangle_parameters(self.points, self.cells)
        return self._cache["params"]

    def geometry(self, c: int) -> SimplexGeometry:
        if self.dim == 2:
            return order_vertices_2d(self.cells[c], self.points)
        return order_vertices_3d(self.cells[c], self.points)

    # IO
    def to_dict(self) -> dict:
        return {"dim": self.dim, "points": self.points.tolist(), "cells": self.cells.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Mesh":
        try:
            dim = int(data["dim"])
            pts = np.asarray(data["points"], dtype=float)
            cells = np.asarray(data["cells"], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed mesh data: {exc}") from exc
        if pts.ndim != 2 or pts.shape[1] != dim:
            raise InvalidSpec("point dimension does not match 'dim'")
        return cls(pts, cells)


def save_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mesh.to_dict(), fh)


def load_mesh(path) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"mesh file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidSpec("mesh file must hold a JSON object")
    return Mesh.from_dict(data)


# --------------------------------------------------------------------------
# generators on the unit square


def tensor_mesh(xs, ys) -> Mesh:
    """Split each rectangle of the tensor grid xs x ys along its / diagonal."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise InvalidSpec("grid lines must be strictly increasing")
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.empty((2 * len(v00), 3), dtype=np.int64)
    cells[0::2] = lower
    cells[1::2] = upper
    return Mesh(pts, cells)


def uniform_mesh(n: int) -> Mesh:
    if int(n) != n or n < 2:
        raise InvalidSpec("uniform mesh needs n >= 2")
    g = np.linspace(0.0, 1.0, int(n) + 1)
    return tensor_mesh(g, g)


def tensor_graded_mesh(nx: int, ny: int, grading: float) -> Mesh:
    """Uniform in x, power-graded y_j = (j/ny)^grading toward y = 0."""
    if nx < 2 or ny < 2:
        raise InvalidSpec("tensor_graded needs nx, ny >= 2")
    if not grading >= 1.0:
        raise InvalidSpec("grading must be >= 1")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1) ** grading
    return tensor_mesh(xs, ys)


def boundary_layer_nodes(n: int, delta: float, layer_fraction: float = 0.5):
    """y-nodes with round(layer_fraction * n) uniform rows inside [0, delta]."""
    if n < 2:
        raise InvalidSpec("boundary_layer needs n >= 2")
    if not 0.0 < delta < 0.5:
        raise InvalidSpec("delta must lie in (0, 0.5)")
    if not 0.0 < layer_fraction < 1.0:
        raise InvalidSpec("layer_fraction must lie in (0, 1)")
    m = min(max(1, int(round(layer_fraction * n))), n - 1)
    inner = np.linspace(0.0, delta, m + 1)
    outer = np.linspace(delta, 1.0, n - m + 1)[1:]
    return np.concatenate([inner, outer])


def layer_mesh(nx: int, layer_rows: int, outer_rows: int, layer_width: float) -> Mesh:
    """Uniform columns; uniform rows inside [0, layer_width] and above it."""
    if min(nx, layer_rows, outer_rows) < 1 or not 0.0 < layer_width < 1.0:
        raise InvalidSpec("layer mesh needs positive row/column counts and 0 < layer_width < 1")
    ys = np.concatenate([
        np.linspace(0.0, layer_width, layer_rows + 1),
        np.linspace(layer_width, 1.0, outer_rows + 1)[1:],
    ])
    return tensor_mesh(np.linspace(0.0, 1.0, nx + 1), ys)


def boundary_layer_mesh(n: int, delta: float, layer_fraction: float = 0.5) -> Mesh:
    """n columns; rows refined into a layer of width delta at y = 0."""
    ys = boundary_layer_nodes(n, delta, layer_fraction)
    return tensor_mesh(np.linspace(0.0, 1.0, n + 1), ys)


def perturbed_mesh(n: int, amplitude: float, seed: int = 0) -> Mesh:
    """Uniform mesh with interior vertices shifted by up to amplitude * (1/n) per axis."""
    base = uniform_mesh(n)
    if not 0.0 <= amplitude < 0.5:
        raise InvalidSpec("amplitude must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    pts = base.points.copy()
    inner = ~base.boundary_points
    pts[inner] += amplitude / n * rng.uniform(-1.0, 1.0, size=(int(inner.sum()), 2))
    if np.any(simplex_measure(pts[base.cells]) <= 0):
        raise InvalidSpec("perturbation inverted a cell; lower the amplitude")
    return Mesh(pts, base.cells)


def generate_mesh(kind: str, **params) -> Mesh:
    """Dispatch to a unit-square generator by name.

    kinds: ``uniform(n)``, ``tensor_graded(nx, ny, grading)``,
    ``boundary_layer(n, delta, layer_fraction)``,
    ``perturbed(n, amplitude, seed)``.
    """
    gens = {
        "uniform": uniform_mesh,
        "tensor_graded": tensor_graded_mesh,
        "boundary_layer": boundary_layer_mesh,
        "perturbed": perturbed_mesh,
    }
    if kind not in gens:
        raise InvalidSpec(f"unknown mesh kind {kind!r}")
    try:
        return gens[kind](**params)
    except TypeError as exc:
        raise InvalidSpec(str(exc)) from exc


# --------------------------------------------------------------------------
# metrics


def mesh_metrics(mesh: Mesh) -> dict:
    """Semi-regularity constant estimate and shape statistics."""
    if mesh.dim == 2:
        q = mesh.parameters()
        ratio = q["HT"] / q["hT"]
        aspect = q["h1"] / q["h2"]
        return {
            "gamma0": float(ratio.max()),
            "max_angle": float(q["max_angle"].max()),
            "min_aspect": float(aspect.min()),
            "max_aspect": float(aspect.max()),
            "h": float(q["hT"].max()),
            "min_good_ratio": float(q["t"].min()),
            "n_cells": mesh.n_cells,
        }
    geos = [mesh.geometry(c) for c in range(mesh.n_cells)]
    aspect = np.array([g.h[0] / g.h[1] for g in geos])
    return {
        "gamma0": max(g.semi_regularity for g in geos),
        "max_angle": max(g.max_angle for g in geos),
        "min_aspect": float(aspect.min()),
        "max_aspect": float(aspect.max()),
        "h": max(g.h_T for g in geos),
        "min_good_ratio": min(min(g.good_ratios) for g in geos),
        "n_type2": sum(g.type3d == "TypeII" for g in geos),
        "max_assumption_ratio": max(g.assumption_ratio for g in geos),
        "n_cells": mesh.n_cells,
    }
