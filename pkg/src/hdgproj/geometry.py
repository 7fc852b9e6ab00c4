"""Batched affine-map data for all cells and their faces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def face_slots(local_face: int, reversed_: int) -> tuple[int, int]:
    """Local vertex slots of a face's start and end point."""
    i, j = (local_face + 1) % 3, (local_face + 2) % 3
    return (j, i) if reversed_ else (i, j)


def face_reference_points(t: np.ndarray) -> np.ndarray:
    """Reference-triangle points along every (local face, orientation) pair.

    Returns (6, len(t), 2) indexed by ``2 * local_face + reversed``.
    """
    out = np.empty((6, len(t), 2))
    for j in range(3):
        for o in range(2):
            s, e = face_slots(j, o)
            out[2 * j + o] = REF_VERTICES[s] + np.outer(t, REF_VERTICES[e] - REF_VERTICES[s])
    return out


@dataclass(frozen=True, eq=False)
class CellGeometry:
    origin: np.ndarray     # (nc, 2) first vertex
    jac: np.ndarray        # (nc, 2, 2) columns are edge vectors
    det: np.ndarray        # (nc,) positive
    inv_jac: np.ndarray    # (nc, 2, 2)
    face_key: np.ndarray   # (nc, 3) 2 * local_face + reversed
    face_len: np.ndarray   # (nc, 3)
    normals: np.ndarray    # (nc, 3, 2) outward

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "CellGeometry":
        p = mesh.vertices[mesh.cells]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv /= det[:, None, None]
        key = 2 * np.arange(3)[None, :] + mesh.face_orientation()
        flen = mesh.face_lengths()[mesh.cell_faces]
        normals = mesh.face_normals[mesh.cell_faces] * mesh.cell_face_signs[..., None]
        return cls(p[:, 0], jac, det, inv, key, flen, normals)

    def to_physical(self, ref_points: np.ndarray, cells=slice(None)) -> np.ndarray:
        """Map reference points (npts, 2) into cells -> (ncells, npts, 2)."""
        return self.origin[cells, None, :] + np.einsum("cij,pj->cpi", self.jac[cells], ref_points)

    def physical_gradients(self, ref_grads: np.ndarray, cells=slice(None)) -> np.ndarray:
        """Chain rule: (npts, dim, 2) reference gradients -> (ncells, npts, dim, 2)."""
        return np.einsum("pdj,cji->cpdi", ref_grads, self.inv_jac[cells])
