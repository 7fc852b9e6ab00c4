"""Orthonormal polynomial bases on the reference triangle and interval.

Cell bases are obtained by orthonormalizing graded-lexicographic monomials
x^a y^b under the reference-triangle L2 inner product.  The orthonormalization
is an LDL^T factorization of the monomial Gram matrix carried out in exact
rational arithmetic, so the only floating point error is in evaluation.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
from numpy.polynomial import legendre


def monomial_exponents(degree: int) -> list[tuple[int, int]]:
    """Exponents (a, b) of x^a y^b, graded by total degree, x-power descending."""
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


def triangle_monomial_integral(p: int, q: int) -> Fraction:
    """Exact integral of x^p y^q over the reference triangle."""
    return Fraction(factorial(p) * factorial(q), factorial(p + q + 2))


@lru_cache(maxsize=None)
def _orthonormal_coefficients(degree: int) -> np.ndarray:
    exps = monomial_exponents(degree)
    n = len(exps)
    gram = [
        [triangle_monomial_integral(a1 + a2, b1 + b2) for (a2, b2) in exps]
        for (a1, b1) in exps
    ]

    # G = L D L^T with L unit lower triangular
    L = [[Fraction(0)] * n for _ in range(n)]
    D = [Fraction(0)] * n
    for j in range(n):
        D[j] = gram[j][j] - sum(L[j][m] ** 2 * D[m] for m in range(j))
        L[j][j] = Fraction(1)
        for i in range(j + 1, n):
            L[i][j] = (gram[i][j] - sum(L[i][m] * L[j][m] * D[m] for m in range(j))) / D[j]

    # Linv = L^{-1} by forward substitution on the identity
    Linv = [[Fraction(0)] * n for _ in range(n)]
    for c in range(n):
        Linv[c][c] = Fraction(1)
        for i in range(c + 1, n):
            Linv[i][c] = -sum(L[i][m] * Linv[m][c] for m in range(c, i))

    coeffs = np.array([[float(v) for v in row] for row in Linv])
    scale = np.array([1.0 / np.sqrt(float(d)) for d in D])
    coeffs = scale[:, None] * coeffs
    coeffs.setflags(write=False)
    return coeffs


class CellBasis:
    """Orthonormal basis of P_degree on the reference triangle.

    ``coeffs[i, j]`` is the coefficient of monomial ``j`` in basis function
    ``i``; the mass matrix over the reference triangle is the identity.
    """

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError(f"degree must be >= 0, got {degree}")
        self.degree = degree
        self.exponents = np.array(monomial_exponents(degree), dtype=int)
        self.coeffs = _orthonormal_coefficients(degree)

    @property
    def dim(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2

    def __repr__(self):
        return f"CellBasis(degree={self.degree})"

    def _powers(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        p = self.degree
        xp = np.ones((len(x), p + 1))
        yp = np.ones((len(y), p + 1))
        for i in range(1, p + 1):
            xp[:, i] = xp[:, i - 1] * x
            yp[:, i] = yp[:, i - 1] * y
        return xp, yp

    def eval(self, points) -> np.ndarray:
        """Values at ``points`` (shape (npts, 2)) -> (npts, dim)."""
        xp, yp = self._powers(points)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        mono = xp[:, a] * yp[:, b]
        return mono @ self.coeffs.T

    def grad(self, points) -> np.ndarray:
        """Reference gradients at ``points`` -> (npts, dim, 2)."""
        xp, yp = self._powers(points)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        dx = a * xp[:, np.maximum(a - 1, 0)] * yp[:, b]
        dy = b * xp[:, a] * yp[:, np.maximum(b - 1, 0)]
        return np.stack([dx @ self.coeffs.T, dy @ self.coeffs.T], axis=-1)


class FaceBasis:
    """Orthonormal Legendre basis of P_degree on [0, 1]."""

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError(f"degree must be >= 0, got {degree}")
        self.degree = degree
        self._scale = np.sqrt(2.0 * np.arange(degree + 1) + 1.0)

    @property
    def dim(self) -> int:
        return self.degree + 1

    def __repr__(self):
        return f"FaceBasis(degree={self.degree})"

    def eval(self, t) -> np.ndarray:
        """Values at parameters ``t`` -> (npts, dim)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return legendre.legvander(2.0 * t - 1.0, self.degree) * self._scale


def cell_basis_eval(basis: CellBasis, point) -> np.ndarray:
    return basis.eval(np.reshape(point, (1, 2)))[0]


def cell_basis_grad(basis: CellBasis, point) -> np.ndarray:
    return basis.grad(np.reshape(point, (1, 2)))[0]


def face_basis_eval(basis: FaceBasis, t: float) -> np.ndarray:
    return basis.eval([t])[0]
