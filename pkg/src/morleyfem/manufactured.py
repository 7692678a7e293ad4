"""
Closed-form test solutions for the clamped plate problem.

Each built-in solution is separable, psi(x, y) = X(x) Y(y), with one-variable
derivatives coded by hand up to order 4.  Mixed derivatives follow from the
product structure, and derived data are

    g = nu (psi_xxxx + 2 psi_xxyy + psi_yyyy)
    f = -nu Laplace(curl psi) = -nu (psi_xxy + psi_yyy, -psi_xxx - psi_xyy)

so that rot f = g.  ``Poly2D`` is a general polynomial with the same
interface, used by property tests.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, pi
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

MAX_ORDER = 4


class Profile1D:
    """A function of one variable with derivatives 0..4."""

    def __init__(self, name: str, deriv: Callable[[np.ndarray, int], np.ndarray]):
        self.name = name
        self._deriv = deriv

    def __call__(self, t, k: int = 0) -> np.ndarray:
        if not 0 <= k <= MAX_ORDER:
            raise ValueError(f"derivative order {k} not available")
        return self._deriv(np.asarray(t, dtype=float), k)


def sin2_profile() -> Profile1D:
    """sin^2(pi t) = (1 - cos 2 pi t) / 2."""

    def d(t, k):
        if k == 0:
            return np.sin(pi * t) ** 2
        return -0.5 * (2 * pi) ** k * np.cos(2 * pi * t + k * pi / 2)

    return Profile1D("sin2", d)


def poly_profile(coeffs) -> Profile1D:
    """Polynomial with increasing-power coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    ders = [coeffs]
    for _ in range(MAX_ORDER):
        ders.append(npoly.polyder(ders[-1]))
    return Profile1D("poly", lambda t, k: npoly.polyval(t, ders[k]))


def bump_profile() -> Profile1D:
    """t^2 (1 - t)^2."""
    return poly_profile([0.0, 0.0, 1.0, -2.0, 1.0])


def layer_profile(delta: float) -> Profile1D:
    """(1 - exp(-t/delta))^2 (1 - t)^2: clamped at both ends, layer of width delta at t = 0."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    v = [lambda t: (1 - t) ** 2, lambda t: -2 * (1 - t), lambda t: 2 + 0 * t]

    def u(t, k):
        e1 = np.exp(-t / delta)
        if k == 0:
            return (1 - e1) ** 2
        return -2 * (-1 / delta) ** k * e1 + (-2 / delta) ** k * e1**2

    def d(t, k):
        return sum(comb(k, j) * u(t, k - j) * v[j](t) for j in range(min(k, 2) + 1))

    return Profile1D(f"layer({delta:g})", d)


class FieldBase:
    """Shared derivative bookkeeping for closed-form 2D fields.

    Subclasses implement ``derivative(pts, a, b)`` = d^a/dx^a d^b/dy^b.
    """

    name = "field"

    def derivative(self, pts, a: int, b: int) -> np.ndarray:
        raise NotImplementedError

    def value(self, pts):
        return self.derivative(pts, 0, 0)

    def __call__(self, pts):
        return self.value(pts)

    def grad(self, pts):
        return np.stack([self.derivative(pts, 1, 0), self.derivative(pts, 0, 1)], axis=-1)

    def hessian(self, pts):
        return self.tensor(pts, 2)

    def tensor(self, pts, order: int) -> np.ndarray:
        """All partial derivatives of the given order, shape (n,) + (2,)*order."""
        pts = np.asarray(pts, dtype=float)
        cache = {}
        out = np.empty(pts.shape[:-1] + (2,) * order)
        for idx in itertools.product((0, 1), repeat=order):
            b = sum(idx)
            a = order - b
            if a not in cache:
                cache[a] = self.derivative(pts, a, b)
            out[(...,) + idx] = cache[a]
        return out

    def curl(self, pts):
        return np.stack([self.derivative(pts, 0, 1), -self.derivative(pts, 1, 0)], axis=-1)

    def g(self, pts, nu: float = 1.0):
        """nu times the bilaplacian."""
        return nu * (self.derivative(pts, 4, 0) + 2 * self.derivative(pts, 2, 2) + self.derivative(pts, 0, 4))

    def f(self, pts, nu: float = 1.0):
        """Body force -nu Laplace(curl psi) of the stream-function problem."""
        fx = self.derivative(pts, 2, 1) + self.derivative(pts, 0, 3)
        fy = -self.derivative(pts, 3, 0) - self.derivative(pts, 1, 2)
        return -nu * np.stack([fx, fy], axis=-1)

    def laplacian_grad(self, pts):
        """grad of the Laplacian (third-order term of the consistency error)."""
        return np.stack(
            [self.derivative(pts, 3, 0) + self.derivative(pts, 1, 2),
             self.derivative(pts, 2, 1) + self.derivative(pts, 0, 3)],
            axis=-1,
        )


class ManufacturedSolution(FieldBase):
    """Separable psi(x, y) = X(x) Y(y)."""

    def __init__(self, name: str, X: Profile1D, Y: Profile1D):
        self.name = name
        self.X = X
        self.Y = Y

    def derivative(self, pts, a: int, b: int) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.X(pts[..., 0], a) * self.Y(pts[..., 1], b)


class Poly2D(FieldBase):
    """Polynomial sum c[i, j] x^i y^j."""

    def __init__(self, coeffs, name: str = "poly2d"):
        self.c = np.asarray(coeffs, dtype=float)
        self.name = name

    @classmethod
    def random(cls, degree: int, rng, scale: float = 1.0) -> "Poly2D":
        c = np.zeros((degree + 1, degree + 1))
        for i in range(degree + 1):
            for j in range(degree + 1 - i):
                c[i, j] = scale * rng.standard_normal()
        return cls(c)

    def derivative(self, pts, a: int, b: int) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        c = self.c
        if a:
            c = npoly.polyder(c, a, axis=0)
        if b:
            c = npoly.polyder(c, b, axis=1)
        return npoly.polyval2d(pts[..., 0], pts[..., 1], c)


@dataclass
class GradientField:
    """grad p for a polynomial pressure, used to check gradient annihilation."""

    p: Poly2D

    def __call__(self, pts):
        return self.p.grad(pts)


def sin2_solution() -> ManufacturedSolution:
    return ManufacturedSolution("sin2", sin2_profile(), sin2_profile())


def poly_solution() -> ManufacturedSolution:
    return ManufacturedSolution("poly", bump_profile(), bump_profile())


def layer_solution(delta: float) -> ManufacturedSolution:
    return ManufacturedSolution(f"layer(delta={delta:g})", bump_profile(), layer_profile(delta))


def pressure_x2y() -> Poly2D:
    """x^2 y minus its mean over the unit square."""
    c = np.zeros((3, 2))
    c[2, 1] = 1.0
    c[0, 0] = -1.0 / 6.0
    return Poly2D(c, "x2y")


SOLUTIONS = {"sin2": sin2_solution, "poly": poly_solution}


def get_solution(name: str, delta: float = 1e-2) -> FieldBase:
    if name in ("layer", "delta"):
        return layer_solution(delta)
    if name not in SOLUTIONS:
        raise ValueError(f"unknown solution {name!r}; choose from {sorted(SOLUTIONS) + ['layer']}")
    return SOLUTIONS[name]()


def check_derivatives(field: FieldBase, pts, step: float = 1e-5) -> float:
    """Largest relative mismatch between coded derivatives and central differences.

    Each derivative of order k >= 1 is compared against the central difference
    of the coded order k-1 derivative; the error is scaled by the magnitude of
    the derivative over the sample.
    """
    pts = np.asarray(pts, dtype=float)
    ex = np.array([step, 0.0])
    ey = np.array([0.0, step])
    worst = 0.0
    for order in range(1, MAX_ORDER + 1):
        for b in range(order + 1):
            a = order - b
            exact = field.derivative(pts, a, b)
            if a > 0:
                fd = (field.derivative(pts + ex, a - 1, b) - field.derivative(pts - ex, a - 1, b)) / (2 * step)
            else:
                fd = (field.derivative(pts + ey, a, b - 1) - field.derivative(pts - ey, a, b - 1)) / (2 * step)
            scale = max(np.max(np.abs(exact)), 1e-300)
            worst = max(worst, float(np.max(np.abs(exact - fd)) / scale))
    return worst
