import numpy as np
import pytest

from hdgproj.basis import CellBasis, FaceBasis
from hdgproj.geometry import CellGeometry
from hdgproj.mesh import build_connectivity, generate_structured
from hdgproj.projection import (
    CellwisePolynomial, evaluate_traces, face_projection_error, project_cell, project_cells,
    project_face, project_traces, residual_R,
)
from hdgproj.quadrature import interval_rule, triangle_rule


def sin_field(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


SMALL = build_connectivity([[0, 0], [0.1, 0], [0, 0.1], [1, 0], [0, 1], [1, 1]],
                           [[0, 1, 2], [1, 3, 5], [1, 5, 2], [2, 5, 4]])


def gram_solve_oracle(f, degree, mesh, cell, exactness=20):
    """Projection by an explicit Gram solve in a physical monomial basis."""
    rule = triangle_rule(exactness)
    v = mesh.vertices[mesh.cells[cell]]
    J = np.column_stack([v[1] - v[0], v[2] - v[0]])
    det = abs(np.linalg.det(J))
    x = v[0] + rule.points @ J.T
    c = x.mean(axis=0)
    exps = [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]
    M = np.column_stack([(x[:, 0] - c[0]) ** a * (x[:, 1] - c[1]) ** b for a, b in exps])
    w = rule.weights * det
    gram = M.T @ (w[:, None] * M)
    coef = np.linalg.solve(gram, M.T @ (w * f(x[:, 0], x[:, 1])))

    def approx(pts):
        P = np.column_stack([(pts[:, 0] - c[0]) ** a * (pts[:, 1] - c[1]) ** b for a, b in exps])
        return P @ coef
    return approx, (v, J)


def test_constant_reproduced():
    m = generate_structured(3)
    for degree in range(4):
        p = project_cells(lambda x, y: np.ones_like(x), degree, m)
        vals = p.eval_ref(np.arange(m.n_cells), triangle_rule(4).points)
        assert np.abs(vals - 1).max() < 1e-13


def test_degree_zero_is_mean():
    m = generate_structured(2)
    p = project_cell(lambda x, y: x + y, 0, m, 3)
    centroid = m.vertices[m.cells[3]].mean(axis=0)
    value = p.coeffs[0] * CellBasis(0).eval([[0.2, 0.2]])[0, 0]
    assert value == pytest.approx(centroid.sum(), abs=1e-14)


def test_sin_projection_matches_gram_oracle():
    cell = 0  # {(0,0), (0.1,0), (0,0.1)}
    p = project_cell(sin_field, 2, SMALL, cell, rule=triangle_rule(20))
    approx, (v, J) = gram_solve_oracle(sin_field, 2, SMALL, cell)
    ref = triangle_rule(6).points
    ours = CellBasis(2).eval(ref) @ p.coeffs
    theirs = approx(v[0] + ref @ J.T)
    assert np.abs(ours - theirs).max() < 1e-10

    # coefficients against an orthonormal-basis Gram solve that does not
    # assume the Gram matrix is diagonal
    rule = triangle_rule(20)
    phi = CellBasis(2).eval(rule.points)
    det = abs(np.linalg.det(J))
    x = v[0] + rule.points @ J.T
    gram = phi.T @ ((rule.weights * det)[:, None] * phi)
    rhs = phi.T @ (rule.weights * det * sin_field(x[:, 0], x[:, 1]))
    assert np.abs(np.linalg.solve(gram, rhs) - p.coeffs).max() < 1e-10


def test_vector_projection_shape():
    m = generate_structured(2)
    p = project_cell(lambda x, y: (x, 2 * y), 1, m, 0)
    assert p.coeffs.shape == (2, 3)


def test_face_examples():
    m = generate_structured(1)
    f = int(np.flatnonzero((m.faces == [0, 1]).all(axis=1))[0])  # (0,0)-(1,0)
    assert np.allclose(m.vertices[m.faces[f]], [[0, 0], [1, 0]])
    p1 = project_face(lambda x, y: x, 1, m, f)
    t = np.linspace(0, 1, 7)
    assert np.abs(FaceBasis(1).eval(t) @ p1.coeffs - t).max() < 1e-14
    p0 = project_face(lambda x, y: x ** 2, 0, m, f)
    assert p0.coeffs[0] == pytest.approx(1 / 3, abs=1e-15)


def test_double_valued_trace():
    m = generate_structured(2)
    rng = np.random.default_rng(3)
    w = CellwisePolynomial(m, 2, rng.standard_normal((m.n_cells, 6)))
    f = m.interior_faces[0]
    a, b = m.face_cells[f]
    pa = project_face(w, 1, m, f, side=a)
    pb = project_face(w, 1, m, f, side=b)
    assert pa.side == a and pb.side == b
    assert np.abs(pa.coeffs - pb.coeffs).max() > 1e-3
    with pytest.raises(ValueError):
        project_face(w, 1, m, f)


def test_idempotence_and_orthogonality():
    m = generate_structured(3)
    rng = np.random.default_rng(1)
    for d in range(4):
        p = CellwisePolynomial(m, d, rng.standard_normal((m.n_cells, CellBasis(d).dim)))
        again = project_cells(p, d, m)
        assert np.abs(again.coeffs - p.coeffs).max() < 1e-13

    rule = triangle_rule(14)
    for d in range(4):
        p = project_cells(sin_field, d, m, rule=rule)
        phi = CellBasis(d).eval(rule.points)
        x = CellGeometry.from_mesh(m).to_physical(rule.points)
        resid = sin_field(x[..., 0], x[..., 1]) - p.coeffs @ phi.T
        inner = (resid * rule.weights) @ phi
        assert np.abs(inner).max() < 1e-12


def test_face_trace_idempotence():
    m = generate_structured(3)
    rng = np.random.default_rng(2)
    for k in range(3):
        coeffs = rng.standard_normal((m.n_cells, CellBasis(k).dim))
        p = CellwisePolynomial(m, k, coeffs)
        tr = project_traces(p, k, m)
        # trace of a P_k cell polynomial is in P_k(F): projecting twice is a no-op
        ref = interval_rule(2 * k + 2)
        recon = tr @ FaceBasis(k).eval(ref.points).T
        direct = evaluate_traces(p, CellGeometry.from_mesh(m), ref.points)
        assert np.abs(recon - direct).max() < 1e-12


def test_best_approximation_perturbation():
    m = generate_structured(2)
    rule = triangle_rule(14)
    p = project_cell(sin_field, 2, m, 5, rule=rule)
    v = m.vertices[m.cells[5]]
    x = v[0] + rule.points @ np.column_stack([v[1] - v[0], v[2] - v[0]]).T
    phi = CellBasis(2).eval(rule.points)
    target = sin_field(x[:, 0], x[:, 1])

    def l2(c):
        return rule.integrate((target - phi @ c) ** 2)

    base = l2(p.coeffs)
    for i in range(len(p.coeffs)):
        for delta in (1e-3, -1e-3):
            c = p.coeffs.copy()
            c[i] += delta
            assert l2(c) > base


@pytest.mark.parametrize("k", [0, 1, 2])
def test_face_projection_error_order(k):
    errs = [face_projection_error(sin_field, k, generate_structured(n)) for n in (4, 8, 16, 32)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders[-1] >= k + 0.5 - 0.2


def _random_fields(m, degree, rng):
    dim = CellBasis(degree).dim
    v = CellwisePolynomial(m, degree, rng.standard_normal((m.n_cells, 2, dim)))
    w = CellwisePolynomial(m, degree, rng.standard_normal((m.n_cells, dim)))
    return v, w


def residual_rhs(v, w, m, k):
    """<(I - P_M)(v - Pi_k v).n, (I - P_M) w> summed side by side."""
    rule = interval_rule(2 * (k + 2) + 4)
    geom = CellGeometry.from_mesh(m)
    psi = FaceBasis(k).eval(rule.points)
    pik = project_cells(v, k, m)
    dv = CellwisePolynomial(m, v.degree, v.coeffs - _raise_degree(pik, v.degree))
    vn = np.einsum("cfte,cfe->cft", evaluate_traces(dv, geom, rule.points), geom.normals)
    wt = evaluate_traces(w, geom, rule.points)

    def defect(vals):
        c = np.einsum("cft,td->cfd", vals, rule.weights[:, None] * psi)
        return vals - c @ psi.T

    return float(np.sum(geom.face_len * ((defect(vn) * defect(wt)) @ rule.weights)))


def _raise_degree(p, degree):
    """Coefficients of a lower-degree CellwisePolynomial in the degree basis."""
    return project_cells(p, degree, p.mesh).coeffs


@pytest.mark.parametrize("k", [0, 1, 2])
def test_residual_identity(k):
    m = generate_structured(3)
    rng = np.random.default_rng(10 + k)
    rule = interval_rule(2 * (k + 2) + 4)
    for _ in range(5):
        v, w = _random_fields(m, k + 1, rng)
        lhs = residual_R(v, w, m, k, rule=rule)
        rhs = residual_rhs(v, w, m, k)
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_R_vanishes_for_piecewise_Pk(k):
    m = generate_structured(3)
    rng = np.random.default_rng(20 + k)
    v, _ = _random_fields(m, k, rng)
    _, w = _random_fields(m, k + 2, rng)
    assert abs(residual_R(v, w, m, k)) < 1e-12
    # also for smooth, non-polynomial w
    assert abs(residual_R(v, sin_field, m, k)) < 1e-12


@pytest.mark.parametrize("k", [0, 1])
def test_R_vanishes_for_single_valued_trace_test(k):
    # w continuous and in P_k on each face -> <(I - P_M) a, w> = 0
    m = generate_structured(3)
    rng = np.random.default_rng(30)
    v, _ = _random_fields(m, k + 2, rng)
    if k == 0:
        w = lambda x, y: 0.0 * x + 2.5  # noqa: E731
    else:
        w = lambda x, y: 1.0 + 2.0 * x - 3.0 * y  # noqa: E731
    assert abs(residual_R(v, w, m, k)) < 1e-12


def test_rule_exactness_checked():
    m = generate_structured(1)
    with pytest.raises(ValueError):
        project_cells(sin_field, 3, m, rule=triangle_rule(4))
