"""HDG discretizations of the mixed Poisson problem and their hybridized solve.

All three variants share one bilinear structure.  With the coupling

    b(u, uhat; v) = (grad u, v)_K - <J1(u, uhat), v.n>_{dK}

and stabilization ``tau * <J2(u, uhat), J2(w, mu)>``, the cell equations are

    (q, v) + b(u, uhat; v)                     = 0
    -b(w, mu; q) + tau <J2(u,uhat), J2(w,mu)>   = (f, w)

where the second row already has the flux-continuity equation (tested with
mu) subtracted.  The variants differ only in the jumps:

    STD   J1 = u - uhat        J2 = u - uhat
    LS    J1 = u - uhat        J2 = P_M u - uhat
    PROJ  J1 = P_M u - uhat    J2 = P_M u - uhat

Local unknown ordering is q_x, q_y (degree k+l), u (degree k+1), then uhat
on local faces 0, 1, 2 (degree k).  Since the q-mass matrix is |det J| * I in
the orthonormal basis, q is eliminated in closed form; the remaining (u,
uhat) matrix is G^T A^{-1} G + S, symmetric positive semidefinite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .basis import CellBasis, FaceBasis
from .geometry import CellGeometry, face_reference_points
from .mesh import Mesh
from .projection import CellwisePolynomial, evaluate_in_cells, project_traces
from .quadrature import interval_rule, solver_exactness, triangle_rule


class MethodVariant(str, enum.Enum):
    STD = "STD"
    LS = "LS"
    PROJ = "PROJ"

    @classmethod
    def parse(cls, value) -> "MethodVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown method {value!r}; choose from std, ls, proj") from None


class SolverError(RuntimeError):
    pass


class SingularLocalBlock(SolverError):
    pass


class NotPositiveDefinite(SolverError):
    pass


@dataclass(frozen=True)
class DiscretizationConfig:
    """Trace degree ``k``, vector excess ``l`` (V = P_{k+l}, W = P_{k+1},
    M = P_k) and tau = tau_coeff / h_global."""

    k: int
    l: int = 0
    tau_coeff: float = 1.0
    exactness: int | None = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"k must be a non-negative integer, got {self.k}")
        if int(self.l) != self.l or self.l < 0:
            raise ValueError(f"l must be a non-negative integer, got {self.l}")
        if not self.tau_coeff > 0:
            raise ValueError(f"tau coefficient must be positive, got {self.tau_coeff}")
        if self.exactness is not None and self.exactness < 2 * (self.k + self.l + 1):
            raise ValueError("quadrature exactness too low for the polynomial integrands")

    @property
    def degree_v(self) -> int:
        return self.k + self.l

    @property
    def degree_w(self) -> int:
        return self.k + 1

    @property
    def degree_m(self) -> int:
        return self.k

    @property
    def quad_exactness(self) -> int:
        return self.exactness if self.exactness is not None else solver_exactness(self.k, self.l)

    def tau(self, mesh: Mesh) -> float:
        return self.tau_coeff / mesh.h_global


class _Tables:
    """Reference tabulations shared by all cells for one configuration."""

    def __init__(self, config: DiscretizationConfig):
        self.cell_rule = triangle_rule(config.quad_exactness)
        self.face_rule = interval_rule(config.quad_exactness)
        bv, bw, bm = CellBasis(config.degree_v), CellBasis(config.degree_w), FaceBasis(config.degree_m)
        self.nV, self.nW, self.nM = bv.dim, bw.dim, bm.dim

        w = self.cell_rule.weights
        phiV = bv.eval(self.cell_rule.points)
        self.phiW = bw.eval(self.cell_rule.points)
        dW = bw.grad(self.cell_rule.points)
        # T[d, i, j] = int_ref phiV_i d_d phiW_j
        self.grad_coupling = np.einsum("p,pi,pjd->dij", w, phiV, dW)

        t, wt = self.face_rule.points, self.face_rule.weights
        self.psi = bm.eval(t)
        ref = face_reference_points(t)  # (6, nt, 2)
        TV = np.stack([bv.eval(r) for r in ref])
        TW = np.stack([bw.eval(r) for r in ref])
        self.traceV = TV
        self.traceW = TW
        self.VW = np.einsum("t,kti,ktj->kij", wt, TV, TW)
        self.VM = np.einsum("t,kti,tm->kim", wt, TV, self.psi)
        self.WW = np.einsum("t,kti,ktj->kij", wt, TW, TW)
        # coefficients of P_M of a W-trace: (6, nM, nW)
        self.PW = np.einsum("t,tm,ktj->kmj", wt, self.psi, TW)


@dataclass
class LocalSystem:
    """Element matrices for a batch of cells.

    ``G`` (ncells, 2 nV, nW + 3 nM) is the coupling b(u, uhat; v), ``S`` the
    stabilization on (u, uhat), ``load`` the (f, w) vector and ``det`` the
    Jacobian determinants (the q-mass block is ``det * I``).
    """

    cells: np.ndarray
    det: np.ndarray
    G: np.ndarray
    S: np.ndarray
    load: np.ndarray
    nV: int
    nW: int
    nM: int

    @property
    def A(self) -> np.ndarray:
        """Dense q-q mass blocks, (ncells, 2 nV, 2 nV)."""
        eye = np.eye(2 * self.nV)
        return self.det[:, None, None] * eye

    def full_matrix(self) -> np.ndarray:
        """Symmetric uncondensed blocks in (q, u, uhat) order:
        [[-A, -G], [-G^T, S]]."""
        n2v = 2 * self.nV
        m = n2v + self.G.shape[2]
        out = np.zeros((len(self.cells), m, m))
        out[:, :n2v, :n2v] = -self.A
        out[:, :n2v, n2v:] = -self.G
        out[:, n2v:, :n2v] = -np.transpose(self.G, (0, 2, 1))
        out[:, n2v:, n2v:] = self.S
        return out


def local_matrices(mesh: Mesh, config: DiscretizationConfig, variant, f, cells=None,
                   geom: CellGeometry = None, tables: _Tables = None) -> LocalSystem:
    """Assemble the element matrices of ``variant`` on ``cells`` (default all)."""
    variant = MethodVariant.parse(variant)
    geom = geom or CellGeometry.from_mesh(mesh)
    tab = tables or _Tables(config)
    cells = np.arange(mesh.n_cells) if cells is None else np.atleast_1d(np.asarray(cells))
    nV, nW, nM = tab.nV, tab.nW, tab.nM
    nc = len(cells)
    tau = config.tau(mesh)

    det = geom.det[cells]
    inv = geom.inv_jac[cells]
    key = geom.face_key[cells]
    flen = geom.face_len[cells]
    normals = geom.normals[cells]

    G = np.zeros((nc, 2, nV, nW + 3 * nM))
    # (grad u, v)_K: physical d_c = sum_d invJ[d, c] d_d
    G[:, :, :, :nW] = np.einsum("c,cde,dij->ceij", det, inv, tab.grad_coupling)

    S = np.zeros((nc, nW + 3 * nM, nW + 3 * nM))
    for j in range(3):
        kj = key[:, j]
        L = flen[:, j]
        n = normals[:, j]
        VM = tab.VM[kj]
        PW = tab.PW[kj]
        if variant is MethodVariant.PROJ:
            j1 = VM @ PW
        else:
            j1 = tab.VW[kj]
        ln = L[:, None] * n  # (nc, 2)
        G[:, :, :, :nW] -= ln[:, :, None, None] * j1[:, None]
        cols = slice(nW + j * nM, nW + (j + 1) * nM)
        G[:, :, :, cols] += ln[:, :, None, None] * VM[:, None]

        tl = (tau * L)[:, None, None]
        if variant is MethodVariant.STD:
            S[:, :nW, :nW] += tl * tab.WW[kj]
        else:
            S[:, :nW, :nW] += tl * np.einsum("cmi,cmj->cij", PW, PW)
        S[:, :nW, cols] -= tl * np.transpose(PW, (0, 2, 1))
        S[:, cols, :nW] -= tl * PW
        S[:, cols, cols] += tl * np.eye(nM)

    fvals = evaluate_in_cells(f, geom, cells, tab.cell_rule.points)
    load = det[:, None] * (fvals * tab.cell_rule.weights) @ tab.phiW

    return LocalSystem(cells, det, G.reshape(nc, 2 * nV, -1), S, load, nV, nW, nM)


@dataclass
class CondensedLocal:
    """Per-cell Schur complements on uhat and the data to recover (q, u)."""

    trace_matrix: np.ndarray   # (ncells, 3 nM, 3 nM)
    trace_rhs: np.ndarray      # (ncells, 3 nM)
    u_particular: np.ndarray   # (ncells, nW): u when uhat = 0
    u_from_trace: np.ndarray   # (ncells, nW, 3 nM): u = u_particular - u_from_trace @ uhat
    local: LocalSystem

    def recover(self, uhat_local: np.ndarray):
        """Cell unknowns from local trace coefficients (ncells, 3 nM)."""
        loc = self.local
        u = self.u_particular - np.einsum("cij,cj->ci", self.u_from_trace, uhat_local)
        x = np.concatenate([u, uhat_local], axis=1)
        q = -np.einsum("cij,cj->ci", loc.G, x) / loc.det[:, None]
        return q.reshape(len(loc.cells), 2, loc.nV), u


def condense_local(local: LocalSystem) -> CondensedLocal:
    """Eliminate (q, u) cell by cell.  Raises :class:`SingularLocalBlock` if the
    u block is not positive definite (tau <= 0 or a degenerate cell)."""
    nW = local.nW
    Gt = np.transpose(local.G, (0, 2, 1))
    K = np.einsum("cij,cjk->cik", Gt, local.G) / local.det[:, None, None] + local.S
    Kuu = K[:, :nW, :nW]
    Kut = K[:, :nW, nW:]
    Ktt = K[:, nW:, nW:]
    try:
        chol = np.linalg.cholesky(Kuu)
    except np.linalg.LinAlgError as exc:
        raise SingularLocalBlock("local (q, u) block is singular") from exc
    rhs = np.concatenate([local.load[:, :, None], Kut], axis=2)
    y = np.linalg.solve(chol, rhs)
    sol = np.linalg.solve(np.transpose(chol, (0, 2, 1)), y)
    u_part = sol[:, :, 0]
    u_from_t = sol[:, :, 1:]
    trace = Ktt - np.einsum("cji,cjk->cik", Kut, u_from_t)
    trace = 0.5 * (trace + np.transpose(trace, (0, 2, 1)))
    trace_rhs = -np.einsum("cji,cj->ci", Kut, u_part)
    return CondensedLocal(trace, trace_rhs, u_part, u_from_t, local)


@dataclass
class TraceSystem:
    """Global SPD system over interior-face trace dofs.

    Interior face ``f`` owns dofs ``dof_of_face[f] * nM + (0..nM-1)``;
    boundary faces have ``dof_of_face == -1`` and prescribed coefficients in
    ``boundary_values`` (indexed by face).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_of_face: np.ndarray
    boundary_values: np.ndarray
    nM: int
    condensed: CondensedLocal | None = field(default=None, repr=False)

    @property
    def ndofs(self) -> int:
        return self.matrix.shape[0]


def assemble(mesh: Mesh, config: DiscretizationConfig, variant, f, g,
             geom: CellGeometry = None) -> TraceSystem:
    """Condense every cell and assemble the trace system; boundary traces are
    fixed at P_M g and moved to the right-hand side."""
    geom = geom or CellGeometry.from_mesh(mesh)
    tab = _Tables(config)
    local = local_matrices(mesh, config, variant, f, geom=geom, tables=tab)
    cond = condense_local(local)
    nM = tab.nM

    interior = ~mesh.face_boundary
    dof_of_face = -np.ones(mesh.n_faces, dtype=np.int64)
    dof_of_face[interior] = np.arange(interior.sum())

    gvals = boundary_trace_values(mesh, config, g)

    # global index over all faces; boundary faces eliminated afterwards
    idx = (mesh.cell_faces[:, :, None] * nM + np.arange(nM)).reshape(mesh.n_cells, -1)
    rows = np.repeat(idx, idx.shape[1], axis=1).ravel()
    cols = np.tile(idx, (1, idx.shape[1])).ravel()
    ntot = mesh.n_faces * nM
    full = sp.coo_matrix((cond.trace_matrix.ravel(), (rows, cols)), shape=(ntot, ntot)).tocsr()
    b = np.bincount(idx.ravel(), weights=cond.trace_rhs.ravel(), minlength=ntot)

    free = np.repeat(interior, nM)
    fixed = ~free
    A = full[free][:, free].tocsr()
    A.sort_indices()
    rhs = b[free] - full[free][:, fixed] @ gvals[mesh.face_boundary].ravel()
    return TraceSystem(A, rhs, dof_of_face, gvals, nM, cond)


def boundary_trace_values(mesh: Mesh, config: DiscretizationConfig, g) -> np.ndarray:
    """(nfaces, nM) face projections of g; zero rows on interior faces."""
    nM = config.degree_m + 1
    out = np.zeros((mesh.n_faces, nM))
    bf = mesh.boundary_faces
    if len(bf) == 0:
        return out
    rule = interval_rule(config.quad_exactness)
    psi = FaceBasis(config.degree_m).eval(rule.points)
    a = mesh.vertices[mesh.faces[bf, 0]]
    d = mesh.vertices[mesh.faces[bf, 1]] - a
    x = a[:, None, :] + rule.points[None, :, None] * d[:, None, :]
    vals = np.broadcast_to(np.asarray(g(x[..., 0], x[..., 1]), dtype=float), x.shape[:-1])
    out[bf] = vals @ (rule.weights[:, None] * psi)
    return out


def check_symmetric(A, tol: float = 1e-12) -> float:
    """Relative asymmetry ||A - A^T||_max / ||A||_max; raises above ``tol``."""
    A = sp.csr_matrix(A)
    scale = abs(A).max() if A.nnz else 0.0
    diff = abs(A - A.T).max() if A.nnz else 0.0
    rel = diff / scale if scale > 0 else 0.0
    if rel > tol:
        raise NotPositiveDefinite(f"trace matrix is not symmetric (relative asymmetry {rel:.3e})")
    return rel


class SPDFactor:
    """Symmetric-pivoting sparse LDL^T (SuperLU with diagonal pivots only).

    A symmetric matrix is positive definite iff every pivot of this
    factorization is positive, which is what a Cholesky factorization would
    establish; :class:`NotPositiveDefinite` is raised otherwise.
    """

    def __init__(self, A):
        A = sp.csc_matrix(A)
        check_symmetric(A)
        n = A.shape[0]
        self.n = n
        if n == 0:
            self._lu = None
            return
        try:
            lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise NotPositiveDefinite(f"factorization failed: {exc}") from exc
        if not np.array_equal(lu.perm_r, lu.perm_c):
            raise NotPositiveDefinite("factorization required off-diagonal pivoting")
        pivots = lu.U.diagonal()
        if not np.all(pivots > 0):
            raise NotPositiveDefinite(f"non-positive pivot {pivots.min():.3e}")
        self._lu = lu
        self.pivots = pivots

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._lu is None:
            return np.zeros(0)
        return self._lu.solve(np.asarray(b, dtype=float))


def solve_trace(system: TraceSystem) -> np.ndarray:
    """Direct sparse SPD solve of the trace system."""
    if system.ndofs == 0:
        return np.zeros(0)
    factor = SPDFactor(system.matrix)
    if not np.any(system.rhs):
        return np.zeros(system.ndofs)
    return factor.solve(system.rhs)


@dataclass
class Solution:
    """Coefficient blocks: q (ncells, 2, nV), u (ncells, nW), uhat (nfaces, nM)."""

    mesh: Mesh
    config: DiscretizationConfig
    variant: MethodVariant
    q: np.ndarray
    u: np.ndarray
    uhat: np.ndarray

    @cached_property
    def q_field(self) -> CellwisePolynomial:
        return CellwisePolynomial(self.mesh, self.config.degree_v, self.q)

    @cached_property
    def u_field(self) -> CellwisePolynomial:
        return CellwisePolynomial(self.mesh, self.config.degree_w, self.u)

    def coefficient_vector(self) -> np.ndarray:
        return np.concatenate([self.q.ravel(), self.u.ravel(), self.uhat.ravel()])


def _uhat_from_dofs(system: TraceSystem, x: np.ndarray, mesh: Mesh) -> np.ndarray:
    uhat = system.boundary_values.copy()
    interior = system.dof_of_face >= 0
    uhat[interior] = x.reshape(-1, system.nM)[system.dof_of_face[interior]]
    return uhat


def solve(mesh: Mesh, config: DiscretizationConfig, variant, f, g) -> Solution:
    """Hybridized solve: assemble, factor, solve for traces, recover cells."""
    variant = MethodVariant.parse(variant)
    system = assemble(mesh, config, variant, f, g)
    x = solve_trace(system)
    uhat = _uhat_from_dofs(system, x, mesh)
    q, u = system.condensed.recover(uhat[mesh.cell_faces].reshape(mesh.n_cells, -1))
    return Solution(mesh, config, variant, q, u, uhat)


MONOLITHIC_MAX_CELLS = 200


def monolithic_matrix(mesh: Mesh, config: DiscretizationConfig, variant, f, g):
    """Dense uncondensed system over (q, u, interior uhat) in symmetric form.

    Returns (matrix, rhs, layout) where layout gives the offsets of the three
    blocks.
    """
    if mesh.n_cells > MONOLITHIC_MAX_CELLS:
        raise ValueError(
            f"monolithic oracle is limited to {MONOLITHIC_MAX_CELLS} cells, got {mesh.n_cells}"
        )
    variant = MethodVariant.parse(variant)
    local = local_matrices(mesh, config, variant, f)
    nV2, nW, nM = 2 * local.nV, local.nW, local.nM
    nc = mesh.n_cells
    interior = ~mesh.face_boundary
    dof_of_face = -np.ones(mesh.n_faces, dtype=np.int64)
    dof_of_face[interior] = np.arange(interior.sum())
    nq, nu, nt = nc * nV2, nc * nW, int(interior.sum()) * nM
    N = nq + nu + nt

    M = np.zeros((N, N))
    rhs = np.zeros(N)
    gvals = boundary_trace_values(mesh, config, g)
    blocks = local.full_matrix()
    for K in range(nc):
        idx = list(range(K * nV2, (K + 1) * nV2)) + list(range(nq + K * nW, nq + (K + 1) * nW))
        fixed_cols, fixed_vals = [], []
        loc_cols = list(range(nV2 + nW))
        glob = list(idx)
        for j, F in enumerate(mesh.cell_faces[K]):
            lc = list(range(nV2 + nW + j * nM, nV2 + nW + (j + 1) * nM))
            if dof_of_face[F] >= 0:
                loc_cols += lc
                glob += list(range(nq + nu + dof_of_face[F] * nM, nq + nu + (dof_of_face[F] + 1) * nM))
            else:
                fixed_cols += lc
                fixed_vals += list(gvals[F])
        B = blocks[K]
        M[np.ix_(glob, glob)] += B[np.ix_(loc_cols, loc_cols)]
        rhs[nq + K * nW: nq + (K + 1) * nW] += local.load[K]
        if fixed_cols:
            rhs[glob] -= B[np.ix_(loc_cols, fixed_cols)] @ np.array(fixed_vals)
    return M, rhs, (nq, nu, nt)


def solve_monolithic(mesh: Mesh, config: DiscretizationConfig, variant, f, g) -> Solution:
    """Dense solve of the full (q, u, uhat) system; an oracle for :func:`solve`."""
    variant = MethodVariant.parse(variant)
    M, rhs, (nq, nu, nt) = monolithic_matrix(mesh, config, variant, f, g)
    x = np.linalg.solve(M, rhs)
    nc = mesh.n_cells
    q = x[:nq].reshape(nc, 2, -1)
    u = x[nq:nq + nu].reshape(nc, -1)
    gvals = boundary_trace_values(mesh, config, g)
    interior = ~mesh.face_boundary
    uhat = gvals.copy()
    uhat[interior] = x[nq + nu:].reshape(-1, gvals.shape[1])
    return Solution(mesh, config, variant, q, u, uhat)


def flux_residual(solution: Solution, relative: bool = False) -> float:
    """Largest violation of flux continuity <qhat.n, mu> = 0 over interior
    faces and trace test functions.

    With ``relative=True`` the value is divided by the largest single-side
    flux moment, giving a scale-free measure.
    """
    mesh, config = solution.mesh, solution.config
    tab = _Tables(config)
    geom = CellGeometry.from_mesh(mesh)
    tau = config.tau(mesh)
    nM = tab.nM
    side = np.zeros((mesh.n_cells, 3, nM))
    for j in range(3):
        kj = geom.face_key[:, j]
        L = geom.face_len[:, j]
        n = geom.normals[:, j]
        # <q.n, psi_m> = L * sum_c n_c VM^T q_c
        qn = np.einsum("cim,cei,ce->cm", tab.VM[kj], solution.q, n)
        pu = np.einsum("cmj,cj->cm", tab.PW[kj], solution.u)
        uh = solution.uhat[mesh.cell_faces[:, j]]
        side[:, j] = L[:, None] * (qn + tau * (pu - uh))
    total = np.zeros((mesh.n_faces, nM))
    np.add.at(total, mesh.cell_faces.ravel(), side.reshape(-1, nM))
    interior = ~mesh.face_boundary
    res = float(np.abs(total[interior]).max()) if interior.any() else 0.0
    if relative:
        scale = float(np.abs(side).max())
        return res / scale if scale > 0 else res
    return res


def interpolate_solution(mesh: Mesh, config: DiscretizationConfig, variant, q, u) -> Solution:
    """Solution whose blocks are the L2 projections of exact fields."""
    from .projection import project_cells

    geom = CellGeometry.from_mesh(mesh)
    qc = project_cells(q, config.degree_v, mesh, geom=geom).coeffs
    uc = project_cells(u, config.degree_w, mesh, geom=geom).coeffs
    traces = project_traces(u, config.degree_m, mesh, geom=geom)
    uhat = traces[mesh.face_cells[:, 0], mesh.face_local[:, 0]]
    return Solution(mesh, config, MethodVariant.parse(variant), qc, uc, uhat)
