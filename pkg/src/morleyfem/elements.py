"""
Local finite elements on triangles, written in physical coordinates.

Every scalar basis function used here is a quadratic in the barycentric
coordinates, stored as ``c . lam + lam^T Q lam``.  With ``G`` the matrix of
barycentric gradients (rows grad lam_m) this gives

    gradient = sum_m (c_m + 2 (Q lam)_m) grad lam_m
    hessian  = 2 G^T Q G          (constant on the triangle)

Local numbering: vertex i is ``coords[i]``; local edge i is the edge opposite
vertex i, running from vertex i+1 to vertex i+2 (mod 3).  Its outward unit
normal is ``-grad lam_i / |grad lam_i|``.

Batch routines take ``coords`` of shape (nc, 3, 2); the single-triangle API
(``eval_morley`` and friends) wraps them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateSimplex
from .geometry import DEGENERACY_TOL, SimplexGeometry
from .quadrature import default_degree, edge_rule, edge_rule_matching, triangle_rule

KINDS = ("P0", "Lagrange", "CR", "Morley", "RT0")


@dataclass
class LocalBasisEval:
    """Basis values at a set of points.

    ``values`` is (npts, nbasis) for scalar bases and (npts, nbasis, 2) for
    RT0; ``gradients`` is (npts, nbasis, 2); ``hessians`` (nbasis, 2, 2) is
    filled for Morley only; ``divergence`` (nbasis,) for RT0 only.
    """

    values: np.ndarray
    gradients: Optional[np.ndarray] = None
    hessians: Optional[np.ndarray] = None
    divergence: Optional[np.ndarray] = None


@dataclass
class MorleyLocalDofs:
    vertex_values: np.ndarray
    edge_normal_means: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.vertex_values, self.edge_normal_means])


@dataclass
class AnalyticField:
    """Closed-form field with optional derivatives, all vectorised over (n, 2) points."""

    value: Callable
    grad: Optional[Callable] = None
    hessian: Optional[Callable] = None
    div: Optional[Callable] = None


# --------------------------------------------------------------------------
# batch geometry and tabulation


def _as_coords(T) -> np.ndarray:
    if isinstance(T, SimplexGeometry):
        return np.asarray(T.coords, dtype=float)
    return np.asarray(T, dtype=float)


def triangle_data(coords):
    """Signed areas (nc,) and barycentric gradients (nc, 3, 2)."""
    coords = np.asarray(coords, dtype=float)
    x = coords[..., 0]
    y = coords[..., 1]
    area2 = (x[..., 1] - x[..., 0]) * (y[..., 2] - y[..., 0]) - (x[..., 2] - x[..., 0]) * (y[..., 1] - y[..., 0])
    grads = np.empty(coords.shape, dtype=float)
    # degenerate input is rejected by the caller, so silence the division here
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[..., i, 0] = (y[..., j] - y[..., k]) / area2
            grads[..., i, 1] = (x[..., k] - x[..., j]) / area2
    return 0.5 * area2, grads


def _check_nondegenerate(coords, area):
    e = coords[..., [1, 2, 0], :] - coords[..., [2, 0, 1], :]
    hT = np.linalg.norm(e, axis=-1).max(axis=-1)
    if np.any(~(np.abs(area) >= DEGENERACY_TOL * hT**2) | (area == 0)):
        raise DegenerateSimplex("degenerate triangle")


def edge_points(s):
    """Barycentric coordinates of parameters s on each local edge: (3, ns, 3)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros((3, len(s), 3))
    for i in range(3):
        out[i, :, (i + 1) % 3] = 1.0 - s
        out[i, :, (i + 2) % 3] = s
    return out


def outward_normals(grads):
    return -grads / np.linalg.norm(grads, axis=-1, keepdims=True)


def edge_lengths(coords):
    """Length of the local edge opposite each vertex, shape (..., 3)."""
    return np.linalg.norm(coords[..., [2, 0, 1], :] - coords[..., [1, 2, 0], :], axis=-1)


def morley_coefficients(grads):
    """Barycentric-quadratic coefficients (c, Q) of the six Morley functions.

    Functions 0..2 are dual to vertex values, 3..5 to the mean outward normal
    derivative on local edges 0..2.
    """
    nc = grads.shape[0]
    gg = np.einsum("cid,cjd->cij", grads, grads)
    nrm2 = np.einsum("cii->ci", gg)
    nrm = np.sqrt(nrm2)
    c = np.zeros((nc, 6, 3))
    Q = np.zeros((nc, 6, 3, 3))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        g = gg[:, i, j]
        c[:, k, k] = 1.0
        c[:, k, i] = g / nrm2[:, i]
        c[:, k, j] = g / nrm2[:, j]
        Q[:, k, i, j] = 1.0
        Q[:, k, j, i] = 1.0
        Q[:, k, i, i] = -g / nrm2[:, i]
        Q[:, k, j, j] = -g / nrm2[:, j]
        c[:, 3 + k, k] = -1.0 / nrm[:, k]
        Q[:, 3 + k, k, k] = 1.0 / nrm[:, k]
    return c, Q


def quadratic_values(c, Q, bary):
    """Values (nc, nb, nq) of barycentric quadratics at barycentric points (nq, 3)."""
    return np.einsum("cbm,qm->cbq", c, bary) + np.einsum("qm,cbmn,qn->cbq", bary, Q, bary)


def quadratic_gradients(c, Q, grads, bary):
    """Gradients (nc, nb, nq, 2)."""
    coef = c[:, :, None, :] + 2.0 * np.einsum("cbmn,qn->cbqm", Q, bary)
    return np.einsum("cbqm,cmd->cbqd", coef, grads)


def quadratic_hessians(Q, grads):
    """Constant Hessians (nc, nb, 2, 2)."""
    return 2.0 * np.einsum("cmd,cbmn,cne->cbde", grads, Q, grads)


def to_physical(coords, bary):
    """Physical points (nc, nq, 2) for barycentric points (nq, 3)."""
    return np.einsum("qm,cmd->cqd", bary, coords)


# --------------------------------------------------------------------------
# single-triangle API


def barycentric(T, x):
    """Barycentric coordinates of point(s) x and the constant gradients."""
    coords = _as_coords(T)
    area, grads = triangle_data(coords[None])
    _check_nondegenerate(coords[None], area)
    x = np.asarray(x, dtype=float)
    lam1 = (x - coords[0]) @ grads[0, 1:].T
    lam = np.concatenate([1.0 - lam1.sum(axis=-1, keepdims=True), lam1], axis=-1)
    return lam, grads[0]


def eval_lagrange(T, x) -> LocalBasisEval:
    lam, G = barycentric(T, x)
    lam = np.atleast_2d(lam)
    return LocalBasisEval(values=lam, gradients=np.broadcast_to(G, (len(lam), 3, 2)).copy())


def eval_cr(T, x) -> LocalBasisEval:
    """Crouzeix-Raviart basis 1 - 2 lam_i, dual to edge means."""
    lam, G = barycentric(T, x)
    lam = np.atleast_2d(lam)
    return LocalBasisEval(values=1.0 - 2.0 * lam, gradients=np.broadcast_to(-2.0 * G, (len(lam), 3, 2)).copy())


def eval_morley(T, x) -> LocalBasisEval:
    """Morley basis: three vertex functions then three edge functions."""
    lam, G = barycentric(T, x)
    lam = np.atleast_2d(lam)
    c, Q = morley_coefficients(G[None])
    return LocalBasisEval(
        values=quadratic_values(c, Q, lam)[0].T,
        gradients=quadratic_gradients(c, Q, G[None], lam)[0].transpose(1, 0, 2),
        hessians=quadratic_hessians(Q, G[None])[0],
    )


def eval_rt0(T, x, signs=(1, 1, 1)) -> LocalBasisEval:
    """Lowest-order Raviart-Thomas basis s_i (x - p_i) / (2|T|)."""
    coords = _as_coords(T)
    lam, _ = barycentric(T, x)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    area, _ = triangle_data(coords[None])
    area = abs(area[0])
    s = np.asarray(signs, dtype=float)
    vals = s[None, :, None] * (x[:, None, :] - coords[None, :, :]) / (2.0 * area)
    return LocalBasisEval(values=vals, divergence=s / area)


def morley_dofs(T, phi, grad, npts: int = 5) -> MorleyLocalDofs:
    """Vertex values and mean outward normal derivatives of a field."""
    coords = _as_coords(T)
    _, G = barycentric(T, coords[0])
    er = edge_rule(npts)
    ep = edge_points(er.points)
    nrm = outward_normals(G)
    means = np.empty(3)
    for i in range(3):
        pts = ep[i] @ coords
        means[i] = er.weights @ (np.asarray(grad(pts)) @ nrm[i])
    return MorleyLocalDofs(np.asarray(phi(coords), dtype=float), means)


def local_interp(kind: str, T, phi, grad=None, signs=None, degree: Optional[int] = None) -> np.ndarray:
    """Local interpolant coefficients of ``phi`` for one element family.

    ``signs`` (length 3) flips the edge functionals of Morley and RT0 so that
    they refer to a global normal instead of the outward one.
    """
    coords = _as_coords(T)
    area, G = triangle_data(coords[None])
    _check_nondegenerate(coords[None], area)
    s = np.ones(3) if signs is None else np.asarray(signs, dtype=float)
    if kind == "P0":
        rule = triangle_rule(default_degree() if degree is None else degree)
        pts = rule.points @ coords
        return np.array([2.0 * (rule.weights @ np.asarray(phi(pts)))])
    if kind == "Lagrange":
        return np.asarray(phi(coords), dtype=float)
    er = edge_rule(5) if degree is None else edge_rule_matching(degree)
    ep = edge_points(er.points)
    if kind == "CR":
        return np.array([er.weights @ np.asarray(phi(ep[i] @ coords)) for i in range(3)])
    nrm = outward_normals(G[0])
    if kind == "Morley":
        if grad is None:
            raise ValueError("Morley interpolation needs the gradient of phi")
        vals = np.asarray(phi(coords), dtype=float)
        means = np.array([er.weights @ (np.asarray(grad(ep[i] @ coords)) @ nrm[i]) for i in range(3)])
        return np.concatenate([vals, s * means])
    if kind == "RT0":
        L = edge_lengths(coords)
        flux = np.array([L[i] * (er.weights @ (np.asarray(phi(ep[i] @ coords)) @ nrm[i])) for i in range(3)])
        return s * flux
    raise ValueError(f"unknown element kind {kind!r}")


def _mean_over(coords, f, degree=None):
    rule = triangle_rule(default_degree() if degree is None else degree)
    pts = rule.points @ coords
    return 2.0 * np.tensordot(rule.weights, np.asarray(f(pts), dtype=float), axes=(0, 0))


def commuting_check(kind: str, T, field, degree: Optional[int] = None) -> float:
    """Max deviation in the commuting identities for CR, Morley or RT0.

    CR: grad(I phi) = mean(grad phi); Morley: hess(I phi) = mean(hess phi);
    RT0: div(I v) = mean(div v).  ``field`` supplies value/grad/hessian/div.
    """
    coords = _as_coords(T)
    if kind == "CR":
        coef = local_interp("CR", coords, field.value, degree=degree)
        lhs = coef @ eval_cr(coords, coords[0]).gradients[0]
        rhs = _mean_over(coords, field.grad, degree)
    elif kind == "Morley":
        coef = local_interp("Morley", coords, field.value, grad=field.grad, degree=degree)
        lhs = np.einsum("b,bde->de", coef, eval_morley(coords, coords[0]).hessians)
        rhs = _mean_over(coords, field.hessian, degree)
    elif kind == "RT0":
        coef = local_interp("RT0", coords, field.value, degree=degree)
        lhs = coef @ eval_rt0(coords, coords[0]).divergence
        rhs = _mean_over(coords, field.div, degree)
    else:
        raise ValueError(f"no commuting identity for {kind!r}")
    return float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs))))
