"""
Quadrature on the reference triangle and on edges.

Triangle rules are collapsed (Duffy) Gauss-Jacobi products on the reference
triangle (0,0)-(1,0)-(0,1); points are stored in barycentric form so they can
be pushed to any physical triangle by ``x = sum_i lambda_i p_i``. Edge rules
are Gauss-Legendre on the unit interval.

Every rule checks its own monomial exactness when it is built.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi

from .errors import QuadratureInsufficient

TRIANGLE_DEGREES = (2, 4, 6, 10)
EDGE_POINTS = (1, 3, 5)
DEFAULT_DEGREE = 10
MIN_RHS_DEGREE = 4


@dataclass(frozen=True)
class QuadratureRule:
    """Points, weights and declared exactness degree.

    For triangle rules ``points`` has shape (nq, 3) (barycentric) and the
    weights sum to 1/2, the reference-triangle area. For edge rules ``points``
    has shape (nq,) (parameter in [0, 1]) and the weights sum to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    domain: str

    @property
    def size(self) -> int:
        return len(self.weights)


def _check_triangle(rule: QuadratureRule) -> None:
    x = rule.points[:, 1]
    y = rule.points[:, 2]
    for a in range(rule.exactness_degree + 1):
        for b in range(rule.exactness_degree + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            approx = np.dot(rule.weights, x**a * y**b)
            if abs(approx - exact) > 1e-13 * exact:
                raise AssertionError(
                    f"triangle rule of degree {rule.exactness_degree} fails on x^{a} y^{b}"
                )


def _check_edge(rule: QuadratureRule) -> None:
    for a in range(rule.exactness_degree + 1):
        exact = 1.0 / (a + 1)
        approx = np.dot(rule.weights, rule.points**a)
        if abs(approx - exact) > 1e-13 * exact:
            raise AssertionError(f"edge rule fails on s^{a}")


@lru_cache(maxsize=None)
def triangle_rule(degree: int = DEFAULT_DEGREE) -> QuadratureRule:
    """Smallest stocked triangle rule integrating P^degree exactly."""
    stocked = [d for d in TRIANGLE_DEGREES if d >= degree]
    if not stocked:
        raise QuadratureInsufficient(
            f"no triangle rule with exactness {degree}; maximum is {TRIANGLE_DEGREES[-1]}"
        )
    deg = stocked[0]
    n = deg // 2 + 1
    # x along Jacobi(1, 0) to absorb the collapse Jacobian, y = (1 - x) u
    t, wt = roots_jacobi(n, 1.0, 0.0)
    s = (1.0 + t) / 2.0
    ws = wt / 4.0
    u, wu = np.polynomial.legendre.leggauss(n)
    u = (1.0 + u) / 2.0
    wu = wu / 2.0
    X = np.repeat(s, n)
    Y = (1.0 - X) * np.tile(u, n)
    W = np.outer(ws, wu).ravel()
    pts = np.column_stack([1.0 - X - Y, X, Y])
    rule = QuadratureRule(pts, W, deg, "triangle")
    _check_triangle(rule)
    return rule


@lru_cache(maxsize=None)
def edge_rule(npoints: int = 5) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] with 1, 3 or 5 points."""
    if npoints not in EDGE_POINTS:
        raise QuadratureInsufficient(f"edge rules exist for {EDGE_POINTS} points, not {npoints}")
    s, w = np.polynomial.legendre.leggauss(npoints)
    rule = QuadratureRule((1.0 + s) / 2.0, w / 2.0, 2 * npoints - 1, "edge")
    _check_edge(rule)
    return rule


def edge_rule_for_degree(degree: int) -> QuadratureRule:
    for n in EDGE_POINTS:
        if 2 * n - 1 >= degree:
            return edge_rule(n)
    raise QuadratureInsufficient(f"no edge rule with exactness {degree}")


def edge_rule_matching(degree: int) -> QuadratureRule:
    """Edge rule paired with a triangle rule of the given degree.

    Uses the smallest rule of sufficient exactness, capped at the 5-point rule.
    """
    return edge_rule(next((n for n in EDGE_POINTS if 2 * n - 1 >= degree), EDGE_POINTS[-1]))


def default_degree() -> int:
    """Default triangle-rule degree, overridable through MORLEY_QUAD_DEGREE."""
    raw = os.environ.get("MORLEY_QUAD_DEGREE")
    if raw is None or raw == "":
        return DEFAULT_DEGREE
    deg = int(raw)
    if deg not in TRIANGLE_DEGREES:
        raise QuadratureInsufficient(f"MORLEY_QUAD_DEGREE must be one of {TRIANGLE_DEGREES}")
    return deg
