"""Quadrature rules on the reference interval [0, 1] and the reference
triangle {(0,0), (1,0), (0,1)}.

Triangle rules are collapsed (Duffy) tensor products: Gauss-Legendre in the
collapsed direction times Gauss-Jacobi(1, 0) across it, so the Jacobian of the
collapse is absorbed into the Jacobi weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadRule:
    """Points, weights and the total polynomial degree integrated exactly.

    ``points`` is ``(npts,)`` for interval rules and ``(npts, 2)`` for
    triangle rules.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness: int

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def npoints(self) -> int:
        return len(self.weights)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _npoints(exactness: int) -> int:
    if exactness < 0:
        raise ValueError(f"exactness must be >= 0, got {exactness}")
    return (exactness + 2) // 2


def interval_rule(exactness: int) -> QuadRule:
    """Gauss-Legendre rule on [0, 1] exact for polynomials of degree <= exactness."""
    x, w = leggauss(_npoints(exactness))
    return QuadRule(0.5 * (x + 1.0), 0.5 * w, exactness)


def triangle_rule(exactness: int) -> QuadRule:
    """Collapsed Gauss rule on the reference triangle, all weights positive."""
    n = _npoints(exactness)
    s, ws = leggauss(n)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    # weight (1 - x) on [-1, 1]; maps to (1 - t) on [0, 1] times 1/4
    t, wt = roots_jacobi(n, 1.0, 0.0)
    t = 0.5 * (t + 1.0)
    wt = 0.25 * wt

    ss, tt = np.meshgrid(s, t, indexing="ij")
    x = ss * (1.0 - tt)
    y = tt
    w = np.outer(ws, wt)
    return QuadRule(np.column_stack([x.ravel(), y.ravel()]), w.ravel(), exactness)


def solver_exactness(k: int, l: int) -> int:
    """Default rule exactness for a discretization with trace degree k and
    vector-space excess l."""
    return 2 * max(k + l, k + 2) + 3
