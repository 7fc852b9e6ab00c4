"""L2-orthogonal projections onto cell and face polynomial spaces.

Because the reference bases are orthonormal and cells are affine images of
the reference triangle, every projection is a weighted quadrature sum: the
physical mass matrix is ``|det J| * I`` on cells and ``length * I`` on faces,
and those factors cancel against the Jacobian in the load integral.

Fields passed to the projections are either plain callables ``f(x, y)`` of
coordinate arrays (returning an array, or a pair of arrays for a vector
field) or :class:`CellwisePolynomial` instances, which are double-valued on
faces and therefore evaluated from a declared side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .basis import CellBasis, FaceBasis
from .geometry import CellGeometry, face_reference_points
from .mesh import Mesh
from .quadrature import QuadRule, interval_rule, triangle_rule


class CellwisePolynomial:
    """Broken polynomial field with one coefficient block per cell.

    ``coeffs`` has shape (ncells, dim) for scalar fields and
    (ncells, 2, dim) for vector fields.
    """

    def __init__(self, mesh: Mesh, degree: int, coeffs):
        self.mesh = mesh
        self.degree = degree
        self.basis = CellBasis(degree)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape[0] != mesh.n_cells or self.coeffs.shape[-1] != self.basis.dim:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match "
                f"{mesh.n_cells} cells of degree {degree}"
            )

    @property
    def is_vector(self) -> bool:
        return self.coeffs.ndim == 3

    def eval_ref(self, cells, ref_points: np.ndarray) -> np.ndarray:
        """Values at reference points of the given cells.

        ``ref_points`` is (npts, 2) (same points in every cell) or
        (ncells, npts, 2).  Returns (ncells, npts) or (ncells, npts, 2).
        """
        c = self.coeffs[cells]
        if ref_points.ndim == 2:
            phi = self.basis.eval(ref_points)
            if self.is_vector:
                return np.einsum("pd,ced->cpe", phi, c)
            return c @ phi.T
        shape = ref_points.shape
        phi = self.basis.eval(ref_points.reshape(-1, 2)).reshape(shape[0], shape[1], -1)
        if self.is_vector:
            return np.einsum("cpd,ced->cpe", phi, c)
        return np.einsum("cpd,cd->cp", phi, c)

    def __call__(self, *args):
        raise TypeError("CellwisePolynomial is double-valued; evaluate via eval_ref")


Field = Union[Callable, CellwisePolynomial]


def evaluate_in_cells(f: Field, geom: CellGeometry, cells, ref_points) -> np.ndarray:
    """Evaluate ``f`` at reference points of ``cells``.

    Vector results carry the component on the last axis.
    """
    if isinstance(f, CellwisePolynomial):
        return f.eval_ref(cells, ref_points)
    if ref_points.ndim == 2:
        x = geom.to_physical(ref_points, cells)
    else:
        x = geom.origin[cells, None, :] + np.einsum("cij,cpj->cpi", geom.jac[cells], ref_points)
    value = f(x[..., 0], x[..., 1])
    if isinstance(value, (tuple, list)):
        return np.stack([np.broadcast_to(v, x.shape[:-1]) for v in value], axis=-1)
    return np.broadcast_to(np.asarray(value, dtype=float), x.shape[:-1])


def trace_reference_points(geom: CellGeometry, t: np.ndarray, cells=slice(None)) -> np.ndarray:
    """(ncells, 3, nt, 2) reference points of each local face at parameters t."""
    table = face_reference_points(t)
    return table[geom.face_key[cells]]


def evaluate_traces(f: Field, geom: CellGeometry, t: np.ndarray, cells=slice(None)) -> np.ndarray:
    """Traces of ``f`` on every local face from the inside of each cell.

    Returns (ncells, 3, nt) or (ncells, 3, nt, 2).
    """
    ref = trace_reference_points(geom, t, cells)
    nc = ref.shape[0]
    flat = ref.reshape(nc, -1, 2)
    vals = evaluate_in_cells(f, geom, cells, flat)
    return vals.reshape((nc, 3, len(t)) + vals.shape[2:])


@dataclass(frozen=True)
class ProjectedField:
    """Coefficients of an L2 projection on one mesh entity.

    ``kind`` is ``"cell"`` or ``"face"``; for faces ``side`` is the cell whose
    trace was projected (``None`` when the field was single-valued).
    Vector fields have coefficient shape (2, dim).
    """

    kind: str
    index: int
    degree: int
    coeffs: np.ndarray
    side: Optional[int] = None


def _cell_rule(degree, rule):
    return rule if rule is not None else triangle_rule(2 * degree + 8)


def _face_rule(degree, rule):
    return rule if rule is not None else interval_rule(2 * degree + 8)


def _check_rule(rule: QuadRule, degree: int):
    if rule.exactness < 2 * degree:
        raise ValueError(
            f"rule exactness {rule.exactness} is below 2*degree = {2 * degree}"
        )


def project_cells(f: Field, degree: int, mesh: Mesh, rule: QuadRule = None,
                  geom: CellGeometry = None) -> CellwisePolynomial:
    """Cellwise L2 projection onto P_degree on every cell (scalar or vector)."""
    rule = _cell_rule(degree, rule)
    _check_rule(rule, degree)
    geom = geom or CellGeometry.from_mesh(mesh)
    phi = CellBasis(degree).eval(rule.points)
    vals = evaluate_in_cells(f, geom, slice(None), rule.points)
    wphi = rule.weights[:, None] * phi
    if vals.ndim == 3:
        coeffs = np.einsum("cpe,pd->ced", vals, wphi)
    else:
        coeffs = vals @ wphi
    return CellwisePolynomial(mesh, degree, coeffs)


def project_cell(f: Field, degree: int, mesh: Mesh, cell: int,
                 rule: QuadRule = None) -> ProjectedField:
    """L2 projection of ``f`` onto P_degree on a single cell."""
    rule = _cell_rule(degree, rule)
    _check_rule(rule, degree)
    geom = CellGeometry.from_mesh(mesh)
    phi = CellBasis(degree).eval(rule.points)
    vals = evaluate_in_cells(f, geom, [cell], rule.points)[0]
    coeffs = (rule.weights[:, None] * phi).T @ vals
    return ProjectedField("cell", cell, degree, coeffs.T if coeffs.ndim == 2 else coeffs)


def project_face(f: Field, degree: int, mesh: Mesh, face: int, side: Optional[int] = None,
                 rule: QuadRule = None) -> ProjectedField:
    """L2 projection onto P_degree on one face in its global parameterization.

    ``side`` selects the adjacent cell whose trace is projected; it is
    required for :class:`CellwisePolynomial` fields.
    """
    rule = _face_rule(degree, rule)
    _check_rule(rule, degree)
    psi = FaceBasis(degree).eval(rule.points)
    if isinstance(f, CellwisePolynomial):
        if side is None:
            raise ValueError("a side is required to project a double-valued field")
        adjacent = list(mesh.face_cells[face])
        if side not in adjacent:
            raise ValueError(f"cell {side} is not adjacent to face {face}")
        local = mesh.face_local[face, adjacent.index(side)]
        geom = CellGeometry.from_mesh(mesh)
        ref = face_reference_points(rule.points)[geom.face_key[side, local]]
        vals = f.eval_ref([side], ref)[0]
    else:
        x = mesh.face_point(face, rule.points)
        value = f(x[:, 0], x[:, 1])
        if isinstance(value, (tuple, list)):
            vals = np.stack([np.broadcast_to(v, x.shape[:-1]) for v in value], axis=-1)
        else:
            vals = np.broadcast_to(np.asarray(value, dtype=float), x.shape[:-1])
    coeffs = (rule.weights[:, None] * psi).T @ vals
    return ProjectedField("face", face, degree, coeffs.T if coeffs.ndim == 2 else coeffs, side)


def project_traces(f: Field, degree: int, mesh: Mesh, rule: QuadRule = None,
                   geom: CellGeometry = None) -> np.ndarray:
    """Face projections of every cell's inner trace -> (ncells, 3, dim)."""
    rule = _face_rule(degree, rule)
    _check_rule(rule, degree)
    geom = geom or CellGeometry.from_mesh(mesh)
    psi = FaceBasis(degree).eval(rule.points)
    vals = evaluate_traces(f, geom, rule.points)
    return np.einsum("cft,td->cfd", vals, rule.weights[:, None] * psi)


def face_projection_error(f: Field, degree: int, mesh: Mesh, rule: QuadRule = None) -> float:
    """||f - P_M f|| over the skeleton of all cells, traces taken side by side."""
    rule = _face_rule(degree, rule)
    geom = CellGeometry.from_mesh(mesh)
    psi = FaceBasis(degree).eval(rule.points)
    vals = evaluate_traces(f, geom, rule.points)
    coeffs = np.einsum("cft,td->cfd", vals, rule.weights[:, None] * psi)
    diff = vals - coeffs @ psi.T
    return float(np.sqrt(np.sum(geom.face_len * (diff ** 2 @ rule.weights))))


def residual_R(v: Field, w: Field, mesh: Mesh, k: int, rule: QuadRule = None) -> float:
    """Sum over all cell boundaries of ((v.n) - P_M(v.n)) * w, with P_M onto P_k(F).

    Both fields are traced from the cell whose boundary is integrated.
    """
    rule = _face_rule(k, rule)
    _check_rule(rule, k)
    geom = CellGeometry.from_mesh(mesh)
    psi = FaceBasis(k).eval(rule.points)
    vt = evaluate_traces(v, geom, rule.points)
    vn = np.einsum("cfte,cfe->cft", vt, geom.normals)
    pvn = np.einsum("cft,td->cfd", vn, rule.weights[:, None] * psi) @ psi.T
    wt = evaluate_traces(w, geom, rule.points)
    return float(np.sum(geom.face_len * (((vn - pvn) * wt) @ rule.weights)))
