import numpy as np
import pytest

from hdgproj.mesh import MeshError, build_connectivity, generate_structured, read_mesh, write_mesh
from hdgproj.quadrature import interval_rule

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@pytest.mark.parametrize("n, cells, verts, faces, interior", [
    (1, 2, 4, 5, 1),
    (2, 8, 9, 16, 8),
    (10, 200, 121, 320, 280),
])
def test_structured_counts(n, cells, verts, faces, interior):
    m = generate_structured(n)
    assert (m.n_cells, m.n_vertices, m.n_faces) == (cells, verts, faces)
    assert len(m.interior_faces) == interior
    assert m.n_vertices - m.n_faces + m.n_cells == 1
    assert m.h_global == pytest.approx(np.sqrt(2) / n, rel=1e-14)


def test_rejects_zero():
    with pytest.raises(ValueError):
        generate_structured(0)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_invariants(n):
    m = generate_structured(n)
    assert np.all(m.cell_areas() > 0)
    for f in range(m.n_faces):
        cells = m.face_cells[f]
        if m.face_boundary[f]:
            assert cells[1] == -1 and m.face_signs[f, 0] == 1
        else:
            assert cells[0] < cells[1]
            assert sorted(m.face_signs[f]) == [-1, 1]
        assert np.isclose(np.linalg.norm(m.face_normals[f]), 1.0)
        assert m.faces[f, 0] < m.faces[f, 1]
    # global normal = sign * outward normal of every adjacent cell
    for K in range(m.n_cells):
        centroid = m.vertices[m.cells[K]].mean(axis=0)
        for j in range(3):
            f = m.cell_faces[K, j]
            out = m.outward_normal(K, j)
            mid = m.vertices[m.faces[f]].mean(axis=0)
            assert np.dot(out, mid - centroid) > 0
            assert m.cells[K, j] not in m.faces[f]
    diam = max(
        np.linalg.norm(m.vertices[a] - m.vertices[b])
        for c in m.cells for a, b in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])]
    )
    assert m.h_global == diam


def test_refinement_halves_h():
    for n in (1, 2, 5, 10, 20):
        assert generate_structured(2 * n).h_global == pytest.approx(
            generate_structured(n).h_global / 2, rel=1e-14
        )


def test_boundary_faces_on_square():
    m = generate_structured(5)
    for f in m.boundary_faces:
        pts = m.vertices[m.faces[f]]
        on = (np.abs(pts) < 1e-14) | (np.abs(pts - 1) < 1e-14)
        assert np.all(on.any(axis=1))


def test_flux_of_continuous_field_cancels():
    # sum of signed per-cell normal fluxes of a polynomial field over an
    # interior face vanishes
    m = generate_structured(6)
    rule = interval_rule(6)

    def field(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([x ** 2 * y + 1, x - y ** 3], axis=-1)

    L = m.face_lengths()
    for f in m.interior_faces:
        pts = m.face_point(f, rule.points)
        total = 0.0
        for s in range(2):
            K, j = m.face_cells[f, s], m.face_local[f, s]
            flux = field(pts) @ m.outward_normal(K, j)
            total += L[f] * rule.integrate(flux)
        assert abs(total) < 1e-12


def test_two_triangles():
    m = build_connectivity(UNIT_SQUARE, [[0, 1, 2], [0, 2, 3]])
    assert len(m.interior_faces) == 1
    f = m.interior_faces[0]
    assert sorted(m.face_signs[f]) == [-1, 1]


def test_clockwise_cell_normalized():
    ccw = build_connectivity(UNIT_SQUARE, [[0, 1, 2], [0, 2, 3]])
    cw = build_connectivity(UNIT_SQUARE, [[0, 2, 1], [0, 2, 3]])
    assert np.all(cw.cell_areas() > 0)
    assert np.array_equal(ccw.faces, cw.faces)
    assert np.allclose(ccw.face_normals, cw.face_normals)
    assert np.array_equal(ccw.face_cells, cw.face_cells)


def test_round_trip_structured():
    m = generate_structured(4)
    m2 = build_connectivity(m.vertices, m.cells)
    for name in ("cells", "faces", "face_cells", "face_local", "cell_faces", "cell_face_signs"):
        assert np.array_equal(getattr(m, name), getattr(m2, name))
    assert np.allclose(m.face_normals, m2.face_normals)


def test_rejects_overshared_edge():
    verts = np.vstack([UNIT_SQUARE, [[0.5, -0.5]]])
    with pytest.raises(MeshError):
        build_connectivity(verts, [[0, 1, 2], [0, 2, 3], [0, 4, 1], [0, 1, 3]])


def test_rejects_hanging_vertex():
    verts = np.vstack([UNIT_SQUARE, [[0.5, 0.5]]])
    # lower-right triangle keeps the full diagonal, upper-left is split at its midpoint
    with pytest.raises(MeshError):
        build_connectivity(verts, [[0, 1, 2], [0, 4, 3], [4, 2, 3]])


def test_mesh_is_read_only():
    m = generate_structured(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_file_round_trip(tmp_path):
    m = generate_structured(3)
    p = tmp_path / "mesh.txt"
    write_mesh(m, p)
    assert p.read_text().splitlines()[0] == "16 18"
    m2 = read_mesh(p)
    assert np.array_equal(m.cells, m2.cells)
    assert np.allclose(m.vertices, m2.vertices)


def test_read_malformed(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("4 2\n0 0\n1 0\n1 1\n")
    with pytest.raises(MeshError):
        read_mesh(p)
