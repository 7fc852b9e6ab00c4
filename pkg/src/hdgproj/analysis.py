"""Error norms and observed convergence orders."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import CellBasis, FaceBasis
from .geometry import CellGeometry
from .hdg import Solution
from .projection import evaluate_in_cells, evaluate_traces
from .quadrature import QuadRule, interval_rule, triangle_rule


@dataclass(frozen=True)
class ErrorReport:
    n: int
    h_global: float
    err_q: float
    err_u: float
    err_jump: float

    def __post_init__(self):
        for name in ("err_q", "err_u", "err_jump"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")


def _error_rule(solution: Solution, rule):
    return rule if rule is not None else triangle_rule(solution.config.quad_exactness)


def _cell_l2(field, coeffs, degree, exact, mesh, rule: QuadRule) -> float:
    geom = CellGeometry.from_mesh(mesh)
    phi = CellBasis(degree).eval(rule.points)
    ex = evaluate_in_cells(exact, geom, slice(None), rule.points)
    if coeffs.ndim == 3:
        approx = np.einsum("pd,ced->cpe", phi, coeffs)
        sq = np.sum((ex - approx) ** 2, axis=-1)
    else:
        sq = (ex - coeffs @ phi.T) ** 2
    return math.sqrt(float(np.sum(geom.det * (sq @ rule.weights))))


def error_q_l2(solution: Solution, exact_q, mesh=None, rule: QuadRule = None) -> float:
    """||q - q_h|| over the domain."""
    mesh = mesh or solution.mesh
    return _cell_l2("q", solution.q, solution.config.degree_v, exact_q, mesh,
                    _error_rule(solution, rule))


def error_u_l2(solution: Solution, exact_u, mesh=None, rule: QuadRule = None) -> float:
    """||u - u_h|| over the domain."""
    mesh = mesh or solution.mesh
    return _cell_l2("u", solution.u, solution.config.degree_w, exact_u, mesh,
                    _error_rule(solution, rule))


def jump_norm(solution: Solution, mesh=None, config=None) -> float:
    """||h^{-1/2} (P_M u_h - uhat_h)|| over all cell boundaries, with the global h.

    Both quantities live in the orthonormal face basis, so the face integral
    is ``length * |coefficient difference|^2``.
    """
    mesh = mesh or solution.mesh
    config = config or solution.config
    rule = interval_rule(2 * config.degree_w + 2)
    geom = CellGeometry.from_mesh(mesh)
    psi = FaceBasis(config.degree_m).eval(rule.points)
    traces = evaluate_traces(solution.u_field, geom, rule.points)
    pu = np.einsum("cft,td->cfd", traces, rule.weights[:, None] * psi)
    diff = pu - solution.uhat[mesh.cell_faces]
    total = np.sum(geom.face_len * np.sum(diff ** 2, axis=-1))
    return math.sqrt(float(total) / mesh.h_global)


def error_report(solution: Solution, problem, n: int, rule: QuadRule = None) -> ErrorReport:
    return ErrorReport(
        n=n,
        h_global=solution.mesh.h_global,
        err_q=error_q_l2(solution, problem.q, rule=rule),
        err_u=error_u_l2(solution, problem.u, rule=rule),
        err_jump=jump_norm(solution),
    )


def observed_order(coarse, fine) -> float:
    """log(E1/E2) / log(h1/h2) for (h, E) pairs; errors must be positive."""
    (h1, e1), (h2, e2) = coarse, fine
    if not (e1 > 0 and e2 > 0):
        raise ValueError(f"observed order undefined for non-positive errors ({e1}, {e2})")
    if not h1 > h2 > 0:
        raise ValueError(f"mesh sizes must satisfy h1 > h2 > 0, got {h1}, {h2}")
    return math.log(e1 / e2) / math.log(h1 / h2)
