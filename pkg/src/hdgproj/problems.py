"""Exact solutions used for verification.

Each problem describes -div(grad u) = f on the unit square with u = g on the
boundary, written in mixed form q = -grad u.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Problem:
    name: str
    u: Callable
    q: Callable
    f: Callable
    g: Callable
    polynomial_degree: int | None = None


def paper_sin() -> Problem:
    pi = np.pi

    def u(x, y):
        return np.sin(pi * x) * np.sin(pi * y)

    def q(x, y):
        return (-pi * np.cos(pi * x) * np.sin(pi * y), -pi * np.sin(pi * x) * np.cos(pi * y))

    def f(x, y):
        return 2.0 * pi ** 2 * np.sin(pi * x) * np.sin(pi * y)

    return Problem("paper-sin", u, q, f, u)


def _patch_coefficients(degree):
    # every monomial up to the requested degree, with distinct nonzero weights
    return {
        (a, d - a): (-1.0) ** a / (1.0 + a + 2.0 * (d - a))
        for d in range(degree + 1)
        for a in range(d + 1)
    }


def patch(degree: int) -> Problem:
    """Full polynomial of the given total degree."""
    if degree < 0:
        raise ValueError(f"patch degree must be >= 0, got {degree}")
    coeffs = _patch_coefficients(degree)

    def mono(x, y, a, b):
        if a < 0 or b < 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.asarray(x, dtype=float) ** a * np.asarray(y, dtype=float) ** b

    def u(x, y):
        return sum(c * mono(x, y, a, b) for (a, b), c in coeffs.items())

    def q(x, y):
        qx = sum(-c * a * mono(x, y, a - 1, b) for (a, b), c in coeffs.items())
        qy = sum(-c * b * mono(x, y, a, b - 1) for (a, b), c in coeffs.items())
        return (qx + 0.0 * x, qy + 0.0 * x)

    def f(x, y):
        lap = sum(
            c * (a * (a - 1) * mono(x, y, a - 2, b) + b * (b - 1) * mono(x, y, a, b - 2))
            for (a, b), c in coeffs.items()
        )
        return -lap + 0.0 * x

    return Problem(f"patch:{degree}", u, q, f, u, polynomial_degree=degree)


def get_problem(problem_id: str) -> Problem:
    if problem_id == "paper-sin":
        return paper_sin()
    if problem_id.startswith("patch:"):
        try:
            degree = int(problem_id.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad patch degree in problem id {problem_id!r}") from None
        return patch(degree)
    raise ValueError(f"unknown problem id {problem_id!r} (expected 'paper-sin' or 'patch:<degree>')")
