"""Conforming triangular meshes of the unit square.

Conventions used everywhere else in the package:

* cells are counter-clockwise vertex triples;
* local face ``j`` of a cell is the edge opposite local vertex ``j``;
* a face is stored as ``(a, b)`` with ``a < b`` and is parameterized from
  ``a`` to ``b``; both neighbours evaluate trace quantities in that
  parameterization;
* the global face normal points out of the lower-indexed adjacent cell (out
  of the domain on the boundary); ``cell_face_sign[K, j]`` is +1 when the
  global normal is the outward normal of ``K`` and -1 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray        # (nv, 2)
    cells: np.ndarray           # (nc, 3) counter-clockwise
    faces: np.ndarray           # (nf, 2) lower vertex index first
    face_normals: np.ndarray    # (nf, 2) unit
    face_boundary: np.ndarray   # (nf,) bool
    face_cells: np.ndarray      # (nf, 2) adjacent cells, -1 if absent
    face_local: np.ndarray      # (nf, 2) local face index in each adjacent cell
    face_signs: np.ndarray      # (nf, 2) +1 / -1, 0 if absent
    cell_faces: np.ndarray      # (nc, 3) global face of each local face
    cell_face_signs: np.ndarray  # (nc, 3)
    h_global: float

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, np.ndarray):
                value.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(~self.face_boundary)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_boundary)

    def face_lengths(self) -> np.ndarray:
        d = self.vertices[self.faces[:, 1]] - self.vertices[self.faces[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def cell_areas(self) -> np.ndarray:
        return 0.5 * _signed_double_areas(self.vertices, self.cells)

    def face_point(self, face: int, t) -> np.ndarray:
        """Physical points at face parameters ``t``."""
        a, b = self.vertices[self.faces[face]]
        t = np.asarray(t, dtype=float)[..., None]
        return a + t * (b - a)

    def outward_normal(self, cell: int, local_face: int) -> np.ndarray:
        f = self.cell_faces[cell, local_face]
        return self.cell_face_signs[cell, local_face] * self.face_normals[f]

    def face_orientation(self) -> np.ndarray:
        """(nc, 3) array: 0 if local face j runs from local vertex j+1 to j+2
        in the global parameterization, 1 if reversed."""
        c = self.cells
        nxt = np.roll(c, -1, axis=1)
        nxt2 = np.roll(c, -2, axis=1)
        return (nxt > nxt2).astype(int)


def _signed_double_areas(vertices, cells):
    p0, p1, p2 = (vertices[cells[:, i]] for i in range(3))
    e1, e2 = p1 - p0, p2 - p0
    return e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]


def build_connectivity(vertices, cells) -> Mesh:
    """Build a :class:`Mesh` from raw vertex coordinates and cell triples.

    Cells listed clockwise are flipped.  Raises :class:`MeshError` for
    degenerate cells, edges shared by more than two cells, or boundary edges
    that do not lie on the boundary of the unit square (hanging vertices).
    """
    vertices = np.array(vertices, dtype=float).reshape(-1, 2)
    cells = np.array(cells, dtype=np.int64).reshape(-1, 3)
    if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
        raise MeshError("cell references a vertex index out of range")

    area2 = _signed_double_areas(vertices, cells)
    if np.any(np.abs(area2) <= 1e-14):
        raise MeshError("degenerate cell with zero area")
    flip = area2 < 0
    cells[flip] = cells[flip][:, [0, 2, 1]]

    nc = len(cells)
    # local face j is opposite vertex j
    edges = np.stack([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]], axis=1)
    edges = np.sort(edges, axis=2).reshape(-1, 2)
    faces, inverse, counts = np.unique(edges, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise MeshError("non-conforming mesh: an edge is shared by more than two cells")

    nf = len(faces)
    cell_faces = inverse.reshape(nc, 3)
    face_cells = -np.ones((nf, 2), dtype=np.int64)
    face_local = -np.ones((nf, 2), dtype=np.int64)
    # entries sorted by cell index, so slot 0 is always the lower-indexed cell
    for slot_entry in range(3 * nc):
        f = inverse[slot_entry]
        K, j = divmod(slot_entry, 3)
        s = 0 if face_cells[f, 0] < 0 else 1
        face_cells[f, s] = K
        face_local[f, s] = j

    boundary = face_cells[:, 1] < 0

    a, b = vertices[faces[:, 0]], vertices[faces[:, 1]]
    tangent = b - a
    lengths = np.hypot(tangent[:, 0], tangent[:, 1])
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / lengths[:, None]
    # make the normal outward for the first adjacent cell
    K0 = face_cells[:, 0]
    opposite = vertices[cells[K0, face_local[:, 0]]]
    flip_n = np.einsum("ij,ij->i", normals, opposite - a) > 0
    normals[flip_n] *= -1.0

    face_signs = np.zeros((nf, 2), dtype=np.int64)
    face_signs[:, 0] = 1
    face_signs[~boundary, 1] = -1
    cell_face_signs = np.empty((nc, 3), dtype=np.int64)
    cell_face_signs[face_cells[:, 0], face_local[:, 0]] = 1
    interior = ~boundary
    cell_face_signs[face_cells[interior, 1], face_local[interior, 1]] = -1

    ab, bb = a[boundary], b[boundary]
    on_side = np.any(
        (np.abs(ab - bb) < 1e-12) & ((np.abs(ab) < 1e-12) | (np.abs(ab - 1.0) < 1e-12)),
        axis=1,
    )
    if not np.all(on_side):
        raise MeshError(
            "non-conforming mesh: boundary edge off the unit-square boundary "
            "(hanging vertex or hole)"
        )

    h_global = float(lengths.max())
    return Mesh(
        vertices=vertices,
        cells=cells,
        faces=faces.astype(np.int64),
        face_normals=normals,
        face_boundary=boundary,
        face_cells=face_cells,
        face_local=face_local,
        face_signs=face_signs,
        cell_faces=cell_faces.astype(np.int64),
        cell_face_signs=cell_face_signs,
        h_global=h_global,
    )


def generate_structured(n: int) -> Mesh:
    """Uniform n x n grid of the unit square, each square cut along the
    (i, j)-(i+1, j+1) diagonal."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return build_connectivity(vertices, cells)


def read_mesh(path) -> Mesh:
    """Read the plain-text format: header ``V C``, V lines ``x y``, C lines
    ``i j k`` (0-based).  The caller is responsible for shape regularity."""
    tokens = Path(path).read_text().split()
    try:
        nv, nc = int(tokens[0]), int(tokens[1])
        body = tokens[2:]
        coords = np.array(body[: 2 * nv], dtype=float).reshape(nv, 2)
        tri = np.array(body[2 * nv: 2 * nv + 3 * nc], dtype=np.int64).reshape(nc, 3)
    except (IndexError, ValueError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    if len(body) != 2 * nv + 3 * nc:
        raise MeshError(f"malformed mesh file {path}: expected {2 * nv + 3 * nc} values")
    return build_connectivity(coords, tri)


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"{mesh.n_vertices} {mesh.n_cells}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")
