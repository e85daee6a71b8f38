"""Quadrature, Galerkin assembly, least-squares fitting and the biharmonic
Dirichlet solve.

Quadrature is tensor Gauss-Legendre with p+2 points per direction on quads
and a collapsed (Duffy) tensor rule on triangles, which integrates the mass
integrands exactly (|det J| is affine on bilinear quads).  Dirichlet data is
imposed strongly by fixing all six vertex dofs at boundary vertices and all
edge dofs on boundary edges from the exact-solution oracle.
"""

import logging
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .bernstein import tensor_basis_matrix, triangle_basis_matrix
from .interpolation import collect_data
from .space import combine, physical_jet

logger = logging.getLogger(__name__)


class AssemblyError(RuntimeError):
    pass


# ----------------------------------------------------------------------
# quadrature
# ----------------------------------------------------------------------

class QuadratureRule:
    """Reference-element rule with positive weights and stated exactness."""

    def __init__(self, kind, points, weights, exactness):
        self.kind = kind
        self.points = points
        self.weights = weights
        self.exactness = exactness


@lru_cache(maxsize=None)
def gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def square_rule(n):
    """Tensor Gauss-Legendre; exact for bi-degree <= 2n-1."""
    x, w = gauss01(n)
    U, V = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return QuadratureRule("quad", np.stack([U.ravel(), V.ravel()], axis=1),
                          W.ravel(), 2 * n - 1)


@lru_cache(maxsize=None)
def triangle_rule(n):
    """Duffy-collapsed tensor rule; exact for total degree <= 2n-2."""
    x, w = gauss01(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X.ravel(), (Y * (1.0 - X)).ravel()], axis=1)
    wts = (np.outer(w, w) * (1.0 - X)).ravel()
    return QuadratureRule("triangle", pts, wts, 2 * n - 2)


def rule_for(kind, p, extra=2):
    n = p + extra
    return square_rule(n) if kind == "quad" else triangle_rule(n)


def integrate(mesh, func, p=5):
    """Integrate func(x) (vectorized, physical points) over the mesh."""
    from .space import frames
    fr = frames(mesh, p)
    total = 0.0
    for elem, el in enumerate(mesh.elements):
        rule = rule_for(el.kind, p)
        J = fr.maps[elem].jacobian_at(rule.points)
        det = np.abs(np.linalg.det(J))
        total += np.dot(rule.weights * det, func(fr.maps[elem](rule.points)))
    return total


# ----------------------------------------------------------------------
# physical derivatives at a single point (wrapper over physical_jet)
# ----------------------------------------------------------------------

def physical_derivatives(gmap, patch, u, v, order=2):
    """Value, physical gradient and Hessian of phi = f o F^{-1} at (u, v)."""
    jet = physical_jet(gmap, patch, [[u, v]], order)
    out = [jet["value"][0]]
    if order >= 1:
        out.append(jet["gradient"][0])
    if order >= 2:
        out.append(jet["hessian"][0])
    return tuple(out)


# ----------------------------------------------------------------------
# element tables: per element, the supported dofs and their ordinates
# ----------------------------------------------------------------------

def _element_tables(basis):
    cache = getattr(basis, "_element_tables", None)
    if cache is not None:
        return cache
    mesh = basis.mesh
    rows = [[] for _ in range(len(mesh.elements))]
    for g, phi in enumerate(basis.functions):
        for elem, patch in phi.patches.items():
            rows[elem].append((g, patch.ordinates.ravel()))
    tables = []
    for elem, entries in enumerate(rows):
        idx = np.array([g for g, _ in entries], dtype=int)
        O = np.array([o for _, o in entries])
        tables.append((idx, O))
    basis._element_tables = tables
    return tables


@lru_cache(maxsize=None)
def _basis_matrices(kind, p, n_rule):
    rule = square_rule(n_rule) if kind == "quad" else triangle_rule(n_rule)
    bm = tensor_basis_matrix if kind == "quad" else triangle_basis_matrix
    return {
        "v": bm(p, rule.points),
        "u1": bm(p, rule.points, 1, 0), "v1": bm(p, rule.points, 0, 1),
        "uu": bm(p, rule.points, 2, 0), "uv": bm(p, rule.points, 1, 1),
        "vv": bm(p, rule.points, 0, 2),
    }


def _element_geometry(basis, elem, rule):
    from .space import frames
    fr = frames(basis.mesh, basis.p)
    gmap = fr.maps[elem]
    J = gmap.jacobian_at(rule.points)
    det = np.linalg.det(J)
    adet = np.abs(det)
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1] / det
    Jinv[:, 0, 1] = -J[:, 0, 1] / det
    Jinv[:, 1, 0] = -J[:, 1, 0] / det
    Jinv[:, 1, 1] = J[:, 0, 0] / det
    return gmap, J, adet, Jinv


def _assemble(basis, integrand):
    """Generic symmetric Galerkin assembly over per-element value tables."""
    mesh, p = basis.mesh, basis.p
    tables = _element_tables(basis)
    n = len(basis)
    ii, jj, vv = [], [], []
    for elem, el in enumerate(mesh.elements):
        idx, O = tables[elem]
        rule = rule_for(el.kind, p)
        V = integrand(basis, elem, el, O, rule)    # (nloc, nq) rows
        gmap, J, adet, Jinv = _element_geometry(basis, elem, rule)
        M_loc = (V * (rule.weights * adet)) @ V.T
        ii.append(np.repeat(idx, len(idx)))
        jj.append(np.tile(idx, len(idx)))
        vv.append(M_loc.ravel())
    A = scipy.sparse.coo_matrix(
        (np.concatenate(vv), (np.concatenate(ii), np.concatenate(jj))),
        shape=(n, n)).tocsr()
    return A


def _values_integrand(basis, elem, el, O, rule):
    B = _basis_matrices(el.kind, basis.p, rule_size(basis.p))["v"]
    return O @ B


def rule_size(p, extra=2):
    return p + extra


def _laplacian_rows(basis, elem, el, O, rule):
    mats = _basis_matrices(el.kind, basis.p, rule_size(basis.p))
    Fu, Fv = O @ mats["u1"], O @ mats["v1"]
    Fuu, Fuv, Fvv = O @ mats["uu"], O @ mats["uv"], O @ mats["vv"]
    gmap, J, adet, Jinv = _element_geometry(basis, elem, rule)
    # physical gradient components (needed for the bilinear curvature term)
    gx = Jinv[:, 0, 0] * Fu + Jinv[:, 1, 0] * Fv
    gy = Jinv[:, 0, 1] * Fu + Jinv[:, 1, 1] * Fv
    H1, H2 = gmap.second_derivatives()
    Auv = Fuv - gx * H1[0, 1] - gy * H2[0, 1]
    C = np.einsum("nik,njk->nij", Jinv, Jinv)
    return (Fuu * C[:, 0, 0] + 2.0 * Auv * C[:, 0, 1] + Fvv * C[:, 1, 1])


def assemble_mass(basis, mesh=None):
    """M_ab = integral of phi_a phi_b; symmetric positive definite."""
    return _assemble(basis, _values_integrand)


def assemble_bilaplacian(basis, mesh=None):
    """B_ab = integral of (Laplace phi_a)(Laplace phi_b); PSD with the
    global linear polynomials in its kernel."""
    return _assemble(basis, _laplacian_rows)


def load_vector(f_value, basis):
    """Right-hand side (integral of f phi_a)_a by element-wise quadrature."""
    mesh, p = basis.mesh, basis.p
    tables = _element_tables(basis)
    rhs = np.zeros(len(basis))
    for elem, el in enumerate(mesh.elements):
        idx, O = tables[elem]
        rule = rule_for(el.kind, p)
        V = O @ _basis_matrices(el.kind, p, rule_size(p))["v"]
        gmap, J, adet, Jinv = _element_geometry(basis, elem, rule)
        fvals = f_value(gmap(rule.points))
        rhs[idx] += V @ (rule.weights * adet * fvals)
    return rhs


# ----------------------------------------------------------------------
# solvers
# ----------------------------------------------------------------------

def solve_spd(A, b, dense_limit=2000):
    """Direct solve of a symmetric positive definite system.

    Symmetric Jacobi scaling first: the dof functionals mix values with
    second derivatives, so the raw systems carry an avoidable h^-4 in
    their condition numbers.
    """
    diag = A.diagonal() if scipy.sparse.issparse(A) else np.diag(A)
    if (diag <= 0).any():
        raise AssemblyError("system has non-positive diagonal entries")
    d = 1.0 / np.sqrt(diag)
    n = A.shape[0]
    if n <= dense_limit:
        dense = A.toarray() if scipy.sparse.issparse(A) else np.asarray(A)
        scaled = dense * d[:, None] * d[None, :]
        try:
            c, low = scipy.linalg.cho_factor(scaled)
        except scipy.linalg.LinAlgError as exc:
            raise AssemblyError("system is not positive definite") from exc
        return d * scipy.linalg.cho_solve((c, low), d * b)
    D = scipy.sparse.diags(d)
    scaled = scipy.sparse.csc_matrix(D @ A @ D)
    lu = scipy.sparse.linalg.splu(scaled)
    return d * lu.solve(d * b)


def l2_fit(f, basis, mesh=None):
    """Least-squares approximation: the minimizer of ||f_h - f||_L2."""
    M = assemble_mass(basis)
    b = load_vector(f.value if hasattr(f, "value") else f, basis)
    coeffs = solve_spd(M, b)
    spline = combine(basis, coeffs)
    spline.coefficients = coeffs
    return spline


def zero_bc_prolongation(dofs):
    """Columns spanning the discrete space with zero boundary value and
    normal derivative.

    Unit columns for the non-boundary dofs, plus one n n^T Hessian mode per
    boundary vertex whose two boundary edges are collinear: there the
    normal-normal second derivative does not touch the Dirichlet data and
    stays a free test/trial direction.
    """
    mesh = dofs.mesh
    bnd = dofs.boundary_mask()
    cols_i, cols_j, cols_v = [], [], []
    col = 0
    for dof in np.nonzero(~bnd)[0]:
        cols_i.append(dof)
        cols_j.append(col)
        cols_v.append(1.0)
        col += 1
    for v in mesh.boundary_vertices:
        dirs = []
        for e in mesh.vertex_edges[v]:
            edge = mesh.edges[e]
            if edge.boundary:
                d = (mesh.vertices[edge.vertices[1]]
                     - mesh.vertices[edge.vertices[0]])
                dirs.append(d / np.linalg.norm(d))
        if len(dirs) != 2:
            continue
        if abs(dirs[0][0] * dirs[1][1] - dirs[0][1] * dirs[1][0]) > 1e-12:
            continue   # genuine corner: the full Hessian is boundary data
        n = np.array([dirs[0][1], -dirs[0][0]])
        for order, w in ((3, n[0] ** 2), (4, n[0] * n[1]), (5, n[1] ** 2)):
            cols_i.append(dofs.vertex_dof(v, order))
            cols_j.append(col)
            cols_v.append(w)
        col += 1
    P = scipy.sparse.coo_matrix((cols_v, (cols_i, cols_j)),
                                shape=(dofs.size, col)).tocsr()
    return P


def solve_biharmonic(exact, basis, mesh=None):
    """Galerkin solve of Delta^2 u = g with strong Dirichlet data.

    The manufactured-solution oracle supplies g (bilaplacian) plus the
    boundary data; boundary dofs (all six vertex dofs at boundary vertices,
    all edge dofs on boundary edges) are fixed by interpolating that data.
    The reduced SPD system runs over the zero-boundary-condition modes,
    which include the free normal-normal Hessian directions at straight
    boundary vertices.
    """
    mesh = basis.mesh
    dofs = basis.dofs
    if exact.bilaplacian is None:
        raise AssemblyError("biharmonic solve needs a bilaplacian oracle")
    B = assemble_bilaplacian(basis)
    rhs = load_vector(exact.bilaplacian, basis)
    data = collect_data(exact, mesh, basis.p)
    fixed = data.to_vector(dofs)
    u_tilde = np.where(dofs.boundary_mask(), fixed, 0.0)
    P = zero_bc_prolongation(dofs)
    B_red = scipy.sparse.csr_matrix(P.T @ B @ P)
    rhs_red = P.T @ (rhs - B @ u_tilde)
    u_hat = solve_spd(B_red, rhs_red)
    energy_lhs = u_hat @ (B_red @ u_hat)
    energy_rhs = u_hat @ rhs_red
    rel = abs(energy_lhs - energy_rhs) / max(1.0, abs(energy_rhs))
    if rel > 1e-8:
        logger.warning("biharmonic energy identity off by %.2e", rel)
    u = u_tilde + P @ u_hat
    spline = combine(basis, u)
    spline.coefficients = u
    return spline
