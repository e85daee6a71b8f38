"""The super-smooth C1 spline space: degrees of freedom, interface ordinate
coupling, element-wise construction and membership diagnostics.

Degrees of freedom are the interpolation functionals: six C2 values per
vertex in the order (0,0),(1,0),(0,1),(2,0),(1,1),(0,2); p-5 edge values and
p-4 edge normal derivatives per edge (normal n = (V2-V1)^perp/|V2-V1| with
V1 the lower-index endpoint); interior point values per element.  The basis
is cardinal with respect to these functionals, so the coefficient vector of
any member equals its functional values.
"""

import json
import logging
import math
from functools import lru_cache

import numpy as np
import scipy.linalg

from .bernstein import (TensorPatch, TriangularPatch, bernstein_basis,
                        hermite_fit_operator, tensor_basis_matrix,
                        triangle_basis_matrix, tri_index_list, tri_ncoef)
from .geometry import GeometryMap, SideFrame, perp
from . import geometry

logger = logging.getLogger(__name__)

VERTEX_DOF_ORDERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


class SpaceError(ValueError):
    pass


# ----------------------------------------------------------------------
# dimension and dof layout
# ----------------------------------------------------------------------

def interior_count(kind, p):
    if kind == "quad":
        return (p - 3) ** 2
    return math.comb(p - 4, 2)


def dimension(mesh, p):
    """dim = 6 |V| + (2p-9) |E| + (p-3)^2 |Q| + C(p-4,2) |T|."""
    if p < 5:
        raise SpaceError("degree must be >= 5, got %d" % p)
    c = mesh.counts()
    return (6 * c["vertices"] + (2 * p - 9) * c["edges"]
            + (p - 3) ** 2 * c["quads"] + math.comb(p - 4, 2) * c["triangles"])


def dimension_breakdown(mesh, p):
    if p < 5:
        raise SpaceError("degree must be >= 5, got %d" % p)
    c = mesh.counts()
    return {
        "vertex": 6 * c["vertices"],
        "edge": (2 * p - 9) * c["edges"],
        "quad_interior": (p - 3) ** 2 * c["quads"],
        "triangle_interior": math.comb(p - 4, 2) * c["triangles"],
        "total": dimension(mesh, p),
    }


class DofTable:
    """Global indexing of the interpolation functionals."""

    def __init__(self, mesh, p):
        if p < 5:
            raise SpaceError("degree must be >= 5, got %d" % p)
        self.mesh = mesh
        self.p = p
        nv, ne = len(mesh.vertices), len(mesh.edges)
        self.n_vertex = 6 * nv
        self.n_edge_value = (p - 5) * ne
        self.n_edge_normal = (p - 4) * ne
        self._interior_offsets = np.zeros(len(mesh.elements) + 1, dtype=int)
        for i, el in enumerate(mesh.elements):
            self._interior_offsets[i + 1] = (self._interior_offsets[i]
                                             + interior_count(el.kind, p))
        self.n_interior = int(self._interior_offsets[-1])
        self.size = (self.n_vertex + self.n_edge_value + self.n_edge_normal
                     + self.n_interior)

    def vertex_dof(self, v, order):
        return 6 * v + order

    def edge_value_dof(self, e, l):
        return self.n_vertex + (self.p - 5) * e + l

    def edge_normal_dof(self, e, l):
        return self.n_vertex + self.n_edge_value + (self.p - 4) * e + l

    def interior_dof(self, elem, m):
        return (self.n_vertex + self.n_edge_value + self.n_edge_normal
                + int(self._interior_offsets[elem]) + m)

    def describe(self, dof):
        p = self.p
        if dof < self.n_vertex:
            return ("vertex", dof // 6, VERTEX_DOF_ORDERS[dof % 6])
        dof -= self.n_vertex
        if dof < self.n_edge_value:
            return ("edge_value", dof // (p - 5), dof % (p - 5))
        dof -= self.n_edge_value
        if dof < self.n_edge_normal:
            return ("edge_normal", dof // (p - 4), dof % (p - 4))
        dof -= self.n_edge_normal
        elem = int(np.searchsorted(self._interior_offsets, dof, side="right")) - 1
        return ("interior", elem, dof - int(self._interior_offsets[elem]))

    def boundary_mask(self):
        """True for dofs fixed by Dirichlet data: all six vertex dofs at
        boundary vertices plus value and normal dofs on boundary edges."""
        mask = np.zeros(self.size, dtype=bool)
        for v in self.mesh.boundary_vertices:
            mask[6 * v:6 * v + 6] = True
        for e, edge in enumerate(self.mesh.edges):
            if edge.boundary:
                for l in range(self.p - 5):
                    mask[self.edge_value_dof(e, l)] = True
                for l in range(self.p - 4):
                    mask[self.edge_normal_dof(e, l)] = True
        return mask

    def support_elements(self, dof):
        kind, owner, _ = self.describe(dof)
        mesh = self.mesh
        if kind == "vertex":
            return list(mesh.vertex_elements[owner])
        if kind in ("edge_value", "edge_normal"):
            return list(mesh.edges[owner].elements)
        return [owner]


# ----------------------------------------------------------------------
# interpolation parameters in the unit edge / reference interiors
# ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def edge_parameters(p):
    """Edge parameters (r, s) of the value and normal-derivative points.

    Candidates are equispaced between the 2/p and (p-2)/p points of the
    edge; the selection drops the middle candidates so that value and
    derivative conditions interleave, with separate odd/even rules.
    """
    m = 2 * (p // 2) - 2
    cand = np.array([2 / p + l * (p - 4) / (m * p)
                     for l in range(1, 2 * (p // 2) - 2)])
    if p % 2:
        r_idx = (list(range(1, (p - 5) // 2 + 1))
                 + [l + 1 for l in range((p - 3) // 2, p - 4)])
        s_idx = list(range(1, p - 3))
    else:
        r_idx = (list(range(1, (p - 6) // 2 + 1)) + [(p - 2) // 2]
                 + [l + 2 for l in range((p - 2) // 2, p - 4)])
        s_idx = (list(range(1, (p - 4) // 2 + 1))
                 + [l + 1 for l in range((p - 2) // 2, p - 3)])
    r = cand[np.array(r_idx, dtype=int) - 1] if r_idx else np.empty(0)
    s = cand[np.array(s_idx, dtype=int) - 1]
    if len(r) != p - 5 or len(s) != p - 4:
        raise AssertionError("point selection rule produced wrong counts")
    return r, s


@lru_cache(maxsize=None)
def interior_grid(kind, p, shrink=1.0):
    """Reference interior collocation points F^-1(Q), uniform p-grid."""
    pts = []
    if kind == "quad":
        for l in range(2, p - 1):
            for k in range(2, p - 1):
                pts.append((l / p, k / p))
    else:
        for l in range(2, p - 1):
            for k in range(2, p - 1 - l):
                pts.append((l / p, k / p))
    pts = np.array(pts, dtype=float).reshape(-1, 2)
    if shrink != 1.0 and len(pts):
        center = np.array([0.5, 0.5]) if kind == "quad" else np.array([1/3, 1/3])
        pts = center + shrink * (pts - center)
    return pts


@lru_cache(maxsize=None)
def _interior_solver(kind, p):
    """LU of the interior collocation block plus the boundary-ring coupling.

    Returns (known_idx, int_idx, A_known, lu) with collocation rows ordered
    like interior_grid.  The uniform grid is unisolvent in practice; its
    conditioning is checked, shrinking triangle grids toward the barycenter
    once if needed.
    """
    n_int = interior_count(kind, p)
    if n_int == 0:
        return None
    if kind == "quad":
        flat = np.arange((p + 1) ** 2).reshape(p + 1, p + 1)
        inner = flat[2:p - 1, 2:p - 1].ravel()
        known = np.setdiff1d(flat.ravel(), inner)
        basis = tensor_basis_matrix
    else:
        inner, known = [], []
        for n, (i, j) in enumerate(tri_index_list(p)):
            k = p - i - j
            (inner if min(i, j, k) >= 2 else known).append(n)
        inner, known = np.array(inner), np.array(known)
        basis = triangle_basis_matrix
    for shrink in (1.0, 0.9):
        grid = interior_grid(kind, p, shrink)
        B = basis(p, grid)            # (ncoef, nQ)
        A_int = B[inner].T
        cond = np.linalg.cond(A_int)
        if cond < 1e12:
            break
        logger.warning("interior grid for %s p=%d ill-conditioned "
                       "(cond %.2e); shrinking toward barycenter", kind, p, cond)
    else:
        raise SpaceError("interior collocation system for %s p=%d is "
                         "numerically singular" % (kind, p))
    if cond > 1e8:
        logger.warning("interior collocation conditioning for %s p=%d: %.2e",
                       kind, p, cond)
    logger.debug("interior collocation cond(%s, p=%d) = %.3e", kind, p, cond)
    return {
        "inner": inner, "known": known, "A_known": B[known].T,
        "lu": scipy.linalg.lu_factor(A_int), "cond": cond, "grid": grid,
    }


def interior_condition_number(kind, p):
    solver = _interior_solver(kind, p)
    return 0.0 if solver is None else solver["cond"]


# ----------------------------------------------------------------------
# ordinate coupling along an edge (Propositions 1-3)
# ----------------------------------------------------------------------

class EdgeTrace:
    """Edge data (c, d): value coefficients of degree p and scaled normal
    derivative coefficients of degree p-1; the physical normal derivative
    along the edge is beta * sum d_j B^{p-1}_j."""

    def __init__(self, c, d):
        self.c = np.asarray(c, dtype=float)
        self.d = np.asarray(d, dtype=float)


def side_rows(kind, alpha, beta, trace, p):
    """First two ordinate rows of one element side in the interface frame.

    alpha, beta are the side's degree-1 Bernstein pairs (constant for
    triangles).  Quad rows have length p+1 each; triangle row 1 length p.
    """
    c, d = trace.c, trace.d
    row0 = c.copy()
    if kind == "quad":
        j = np.arange(p + 1)
        cpad = np.concatenate(([0.0], c, [0.0]))      # c_{-1} = c_{p+1} = 0
        dpad = np.concatenate(([0.0], d, [0.0]))
        row1 = c + (1.0 / p) * (
            (1.0 / p) * ((p - j) * alpha[0] * dpad[j + 1]
                         + j * alpha[1] * dpad[j])
            + (p - j) * beta[0] * (cpad[j + 2] - c)
            + j * beta[1] * (c - cpad[j]))
    else:
        row1 = c[:-1] + beta[0] * np.diff(c) + alpha[0] * d / p
    return row0, row1


def interface_ordinates(iface, glue, trace):
    """Rows (row0, row1) of both sides in interface-frame indexing."""
    p = len(trace.c) - 1
    out = []
    for side in (iface.side1, iface.side2):
        out.append(side_rows(side.kind, side.alpha, side.beta, trace, p))
    return tuple(out)


# ----------------------------------------------------------------------
# interpolation data and element-wise construction
# ----------------------------------------------------------------------

class HermiteData:
    """Values of the interpolation functionals.

    vertex: (nV, 6) rows ordered as VERTEX_DOF_ORDERS; edge_r: (nE, p-5);
    edge_s: (nE, p-4); interior: list of per-element value arrays.
    """

    def __init__(self, mesh, p):
        self.mesh = mesh
        self.p = p
        self.vertex = np.zeros((len(mesh.vertices), 6))
        self.edge_r = np.zeros((len(mesh.edges), p - 5))
        self.edge_s = np.zeros((len(mesh.edges), p - 4))
        self.interior = [np.zeros(interior_count(el.kind, p))
                         for el in mesh.elements]

    @classmethod
    def unit(cls, dofs, dof):
        data = cls(dofs.mesh, dofs.p)
        kind, owner, extra = dofs.describe(dof)
        if kind == "vertex":
            data.vertex[owner, VERTEX_DOF_ORDERS.index(extra)] = 1.0
        elif kind == "edge_value":
            data.edge_r[owner, extra] = 1.0
        elif kind == "edge_normal":
            data.edge_s[owner, extra] = 1.0
        else:
            data.interior[owner][extra] = 1.0
        return data

    def vertex_jet(self, v):
        row = self.vertex[v]
        grad = row[1:3]
        hess = np.array([[row[3], row[4]], [row[4], row[5]]])
        return row[0], grad, hess

    def to_vector(self, dofs):
        vec = np.empty(dofs.size)
        vec[:dofs.n_vertex] = self.vertex.ravel()
        vec[dofs.n_vertex:dofs.n_vertex + dofs.n_edge_value] = self.edge_r.ravel()
        vec[dofs.n_vertex + dofs.n_edge_value:
            dofs.n_vertex + dofs.n_edge_value + dofs.n_edge_normal] = \
            self.edge_s.ravel()
        off = dofs.n_vertex + dofs.n_edge_value + dofs.n_edge_normal
        for i, arr in enumerate(self.interior):
            vec[off:off + len(arr)] = arr
            off += len(arr)
        return vec

    @classmethod
    def from_vector(cls, dofs, vec):
        data = cls(dofs.mesh, dofs.p)
        n6 = dofs.n_vertex
        data.vertex[:] = vec[:n6].reshape(-1, 6)
        data.edge_r[:] = vec[n6:n6 + dofs.n_edge_value].reshape(
            len(dofs.mesh.edges), -1)
        data.edge_s[:] = vec[n6 + dofs.n_edge_value:
                             n6 + dofs.n_edge_value + dofs.n_edge_normal
                             ].reshape(len(dofs.mesh.edges), -1)
        off = n6 + dofs.n_edge_value + dofs.n_edge_normal
        for i, arr in enumerate(data.interior):
            arr[:] = vec[off:off + len(arr)]
            off += len(arr)
        return data


class Frames:
    """Cached per-(mesh, degree) construction machinery."""

    def __init__(self, mesh, p):
        self.mesh = mesh
        self.p = p
        self.dofs = DofTable(mesh, p)
        self.sides = {}
        for eid, edge in enumerate(mesh.edges):
            for el in edge.elements:
                self.sides[(eid, el)] = SideFrame(mesh, eid, el, p)
        r, s = edge_parameters(p)
        theta_key = tuple([(0.0, 0), (0.0, 1), (0.0, 2),
                           (1.0, 0), (1.0, 1), (1.0, 2)]
                          + [(float(t), 0) for t in r])
        omega_key = tuple([(0.0, 0), (0.0, 1), (1.0, 0), (1.0, 1)]
                          + [(float(t), 0) for t in s])
        self.theta_solve = hermite_fit_operator(p, theta_key)
        self.omega_solve = hermite_fit_operator(p - 1, omega_key)
        self.maps = [GeometryMap.from_element(mesh, i)
                     for i in range(len(mesh.elements))]

    def edge_trace(self, eid, data):
        """Fit theta (degree p) and omega (degree p-1) from Hermite data."""
        mesh = self.mesh
        v1, v2 = mesh.edges[eid].vertices
        e = mesh.vertices[v2] - mesh.vertices[v1]
        beta = np.linalg.norm(e)
        n = perp(e) / beta
        f1, g1, h1 = data.vertex_jet(v1)
        f2, g2, h2 = data.vertex_jet(v2)
        theta_rhs = np.concatenate((
            [f1, g1 @ e, e @ h1 @ e, f2, g2 @ e, e @ h2 @ e],
            data.edge_r[eid]))
        omega_rhs = np.concatenate((
            [n @ g1, n @ (h1 @ e), n @ g2, n @ (h2 @ e)],
            data.edge_s[eid]))
        c = self.theta_solve(theta_rhs)
        d = self.omega_solve(omega_rhs) / beta
        return EdgeTrace(c, d)

    def build_element(self, elem, traces, interior_values):
        """Assemble one element patch from its edge traces and interior data."""
        mesh, p = self.mesh, self.p
        el = mesh.elements[elem]
        if el.kind == "quad":
            ords = np.zeros((p + 1, p + 1))
        else:
            ords = np.zeros(tri_ncoef(p))
        for eid in el.edges:
            side = self.sides[(eid, elem)]
            row0, row1 = side_rows(side.kind, side.alpha, side.beta,
                                   traces[eid], p)
            side.remap.scatter_rows(ords, row0, row1)
        solver = _interior_solver(el.kind, p)
        if solver is not None:
            flat = ords.ravel() if el.kind == "quad" else ords
            rhs = interior_values - solver["A_known"] @ flat[solver["known"]]
            try:
                flat[solver["inner"]] = scipy.linalg.lu_solve(solver["lu"], rhs)
            except (ValueError, scipy.linalg.LinAlgError) as exc:
                raise SpaceError("interior interpolation system failed on "
                                 "element %d" % elem) from exc
        if el.kind == "quad":
            return TensorPatch(p, ords)
        return TriangularPatch(p, ords)


def frames(mesh, p):
    key = ("frames", p)
    if key not in mesh._cache:
        mesh._cache[key] = Frames(mesh, p)
    return mesh._cache[key]


def interpolate_data(mesh, p, data, elements=None):
    """The unique space member matching the given interpolation data."""
    fr = frames(mesh, p)
    if elements is None:
        elements = range(len(mesh.elements))
    needed_edges = sorted({eid for el in elements
                           for eid in mesh.elements[el].edges})
    traces = {eid: fr.edge_trace(eid, data) for eid in needed_edges}
    patches = {el: fr.build_element(el, traces, data.interior[el])
               for el in elements}
    return SplineFunction(mesh, p, patches)


# ----------------------------------------------------------------------
# spline functions
# ----------------------------------------------------------------------

class SplineFunction:
    """One Bezier patch per element; absent patches are identically zero."""

    def __init__(self, mesh, p, patches):
        self.mesh = mesh
        self.p = p
        self.patches = patches

    def patch(self, elem):
        got = self.patches.get(elem)
        if got is not None:
            return got
        if self.mesh.elements[elem].kind == "quad":
            return TensorPatch.zero(self.p)
        return TriangularPatch.zero(self.p)

    def value_on(self, elem, ref_pts):
        return self.patch(elem).value(ref_pts)

    def jet_on(self, elem, ref_pts, order=2):
        """Physical value/gradient/Hessian arrays on one element."""
        fr = frames(self.mesh, self.p)
        return physical_jet(fr.maps[elem], self.patch(elem), ref_pts, order)

    def max_ordinate(self):
        vals = [np.abs(pt.ordinates).max() for pt in self.patches.values()]
        return max(vals) if vals else 0.0

    def coefficient_difference(self, other):
        d = 0.0
        for elem in set(self.patches) | set(other.patches):
            d = max(d, np.abs(self.patch(elem).ordinates
                              - other.patch(elem).ordinates).max())
        return d


def combine(basis, coeffs):
    """Weighted sum of basis splines as a full SplineFunction."""
    mesh, p = basis.mesh, basis.p
    acc = {}
    for a, phi in enumerate(basis.functions):
        w = coeffs[a]
        if w == 0.0:
            continue
        for elem, patch in phi.patches.items():
            if elem not in acc:
                acc[elem] = patch.ordinates * w
            else:
                acc[elem] = acc[elem] + patch.ordinates * w
    patches = {}
    for elem, ords in acc.items():
        if basis.mesh.elements[elem].kind == "quad":
            patches[elem] = TensorPatch(p, ords)
        else:
            patches[elem] = TriangularPatch(p, ords)
    for elem in range(len(mesh.elements)):
        patches.setdefault(elem, SplineFunction(mesh, p, {}).patch(elem))
    return SplineFunction(mesh, p, patches)


def physical_jet(gmap, patch, ref_pts, order=2):
    """Value and physical derivatives of phi = f o F^{-1} at reference points.

    Gradient solves J^T g = grad f; the Hessian subtracts the geometry
    curvature terms before the two-sided J^{-1} transform.
    """
    from .bernstein import patch_jet
    ref_pts = np.asarray(ref_pts, dtype=float).reshape(-1, 2)
    jets = patch_jet(patch, ref_pts, order)
    out = {"value": jets["v"]}
    if order == 0:
        return out
    J = gmap.jacobian_at(ref_pts)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if (np.abs(det) < 1e-14).any():
        raise geometry.GeometryError("singular Jacobian in physical_jet")
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1] / det
    Jinv[:, 0, 1] = -J[:, 0, 1] / det
    Jinv[:, 1, 0] = -J[:, 1, 0] / det
    Jinv[:, 1, 1] = J[:, 0, 0] / det
    grad_param = np.stack([jets["du"], jets["dv"]], axis=1)
    grad = np.einsum("nji,nj->ni", Jinv, grad_param)
    out["gradient"] = grad
    if order >= 2:
        H1, H2 = gmap.second_derivatives()
        Hf = np.empty((len(ref_pts), 2, 2))
        Hf[:, 0, 0] = jets["duu"]
        Hf[:, 0, 1] = Hf[:, 1, 0] = jets["duv"]
        Hf[:, 1, 1] = jets["dvv"]
        Hf = Hf - grad[:, 0, None, None] * H1 - grad[:, 1, None, None] * H2
        out["hessian"] = np.einsum("nki,nkl,nlj->nij", Jinv, Hf, Jinv)
    return out


# ----------------------------------------------------------------------
# cardinal basis
# ----------------------------------------------------------------------

class Basis:
    def __init__(self, mesh, p, functions, dofs):
        self.mesh = mesh
        self.p = p
        self.functions = functions
        self.dofs = dofs

    def __len__(self):
        return len(self.functions)


def build_basis(mesh, p, threads=1):
    """Cardinal basis: one space member per dof with unit functional value.

    Each function is built independently on its support elements; the
    family size equals the dimension formula.
    """
    dofs = DofTable(mesh, p)
    frames(mesh, p)   # warm shared caches before any thread fan-out

    def build_one(dof):
        data = HermiteData.unit(dofs, dof)
        return interpolate_data(mesh, p, data,
                                elements=dofs.support_elements(dof))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            functions = list(pool.map(build_one, range(dofs.size)))
    else:
        functions = [build_one(dof) for dof in range(dofs.size)]
    return Basis(mesh, p, functions, dofs)


# ----------------------------------------------------------------------
# membership diagnostics
# ----------------------------------------------------------------------

class MembershipReport:
    def __init__(self, value_defect, gradient_defect, vertex_hessian_defect,
                 normal_degree_residual):
        self.value_defect = value_defect
        self.gradient_defect = gradient_defect
        self.vertex_hessian_defect = vertex_hessian_defect
        self.normal_degree_residual = normal_degree_residual

    def __repr__(self):
        return ("MembershipReport(value=%.3e, gradient=%.3e, hessian=%.3e, "
                "normal_fit=%.3e)" % (self.value_defect, self.gradient_defect,
                                      self.vertex_hessian_defect,
                                      self.normal_degree_residual))

    def ok(self, value_tol=1e-9, gradient_tol=1e-9, hessian_tol=1e-8,
           normal_tol=1e-10):
        return (self.value_defect < value_tol
                and self.gradient_defect < gradient_tol
                and self.vertex_hessian_defect < hessian_tol
                and self.normal_degree_residual < normal_tol)


def check_membership(spline, n_samples=33):
    """Sampled interface/vertex smoothness defects, scaled to be relative.

    Checks values and physical gradients across every interior edge, the
    physical Hessians of all elements incident to each vertex, and the
    degree-(p-1) polynomial fit of each edge's normal derivative.
    """
    mesh, p = spline.mesh, spline.p
    fr = frames(mesh, p)
    scale = max(1.0, spline.max_ordinate())
    ts = np.linspace(0.0, 1.0, n_samples)
    line = np.stack([np.zeros_like(ts), ts], axis=1)
    val_defect = grad_defect = 0.0
    grad_scale = 1.0
    normal_resid = 0.0
    fit_basis = bernstein_basis(p - 1, ts).T
    for eid, edge in enumerate(mesh.edges):
        samples = []
        for elem in edge.elements:
            side = fr.sides[(eid, elem)]
            ref = side.remap.to_std_point(line)
            jet = spline.jet_on(elem, ref, order=1)
            samples.append(jet)
        n = perp(mesh.vertices[edge.vertices[1]]
                 - mesh.vertices[edge.vertices[0]])
        n = n / np.linalg.norm(n)
        for jet in samples:
            grad_scale = max(grad_scale, np.abs(jet["gradient"]).max())
        if len(samples) == 2:
            val_defect = max(val_defect, np.abs(samples[0]["value"]
                                                - samples[1]["value"]).max())
            grad_defect = max(grad_defect,
                              np.abs(samples[0]["gradient"]
                                     - samples[1]["gradient"]).max())
        # normal derivative along the edge must be a degree p-1 polynomial
        w = samples[0]["gradient"] @ n
        coef, *_ = np.linalg.lstsq(fit_basis, w, rcond=None)
        resid = np.abs(fit_basis @ coef - w).max()
        normal_resid = max(normal_resid,
                           resid / max(1.0, np.abs(w).max()))
    hess_defect = 0.0
    hess_scale = 1.0
    corner_ref = {
        ("triangle", 0): (0.0, 0.0), ("triangle", 1): (1.0, 0.0),
        ("triangle", 2): (0.0, 1.0),
        ("quad", 0): (0.0, 0.0), ("quad", 1): (1.0, 0.0),
        ("quad", 2): (1.0, 1.0), ("quad", 3): (0.0, 1.0),
    }
    for v in range(len(mesh.vertices)):
        hessians = []
        for elem in mesh.vertex_elements[v]:
            el = mesh.elements[elem]
            local = el.vertices.index(v)
            ref = corner_ref[(el.kind, local)]
            jet = spline.jet_on(elem, [ref], order=2)
            hessians.append(jet["hessian"][0])
            hess_scale = max(hess_scale, np.abs(jet["hessian"]).max())
        for a in range(1, len(hessians)):
            hess_defect = max(hess_defect,
                              np.abs(hessians[a] - hessians[0]).max())
    return MembershipReport(val_defect / scale,
                            grad_defect / grad_scale,
                            hess_defect / hess_scale,
                            normal_resid)


# ----------------------------------------------------------------------
# spline serialization
# ----------------------------------------------------------------------

def save_spline(spline, path):
    """JSON export: degree, per-element ordinates, mesh integrity hash.

    Tensor ordinates are nested rows with the u-index outer; triangular
    ordinates are flat in lexicographic (i, j) order with k = p - i - j.
    """
    doc = {
        "format": "c1mixed-spline",
        "degree": spline.p,
        "mesh_hash": spline.mesh.canonical_hash(),
        "elements": [],
    }
    for elem in range(len(spline.mesh.elements)):
        patch = spline.patch(elem)
        doc["elements"].append({
            "kind": patch.kind,
            "ordinates": patch.ordinates.tolist(),
        })
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_spline(path, mesh):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "c1mixed-spline":
        raise SpaceError("not a spline file: %s" % path)
    if doc["mesh_hash"] != mesh.canonical_hash():
        raise SpaceError("spline file %s was written for a different mesh "
                         "(hash mismatch)" % path)
    p = doc["degree"]
    patches = {}
    for elem, entry in enumerate(doc["elements"]):
        expected = mesh.elements[elem].kind
        if entry["kind"] != expected:
            raise SpaceError("element %d kind mismatch in %s" % (elem, path))
        if expected == "quad":
            patches[elem] = TensorPatch(p, np.array(entry["ordinates"]))
        else:
            patches[elem] = TriangularPatch(p, np.array(entry["ordinates"]))
    return SplineFunction(mesh, p, patches)
