"""Element geometry maps, canonical interface frames and gluing data.

Geometry maps are stored by parameter corner, so the same class serves the
standard element parametrization and the interface-adapted one (shared edge
at u = 0, edge parameter v running from the lower-index vertex V1 to the
higher-index vertex V2).  The orthogonal-vector convention is
(x, y)^perp = (y, -x) throughout; the edge normal is n = (V2-V1)^perp/|V2-V1|.
"""

import numpy as np

from .bernstein import UnivariateBernstein, tri_index, tri_index_list


class GeometryError(ValueError):
    pass


def perp(v):
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


class GeometryMap:
    """Linear (triangle) or bilinear (quad) map from the reference element."""

    def __init__(self, kind, corners):
        self.kind = kind
        if kind == "quad":
            # corners by parameter position: c00, c10, c11, c01
            self.c00, self.c10, self.c11, self.c01 = \
                [np.asarray(c, dtype=float) for c in corners]
            self.mixed = self.c00 - self.c10 + self.c11 - self.c01
        elif kind == "triangle":
            # t0 at (0,0), t1 at (1,0), t2 at (0,1)
            self.t0, self.t1, self.t2 = \
                [np.asarray(c, dtype=float) for c in corners]
        else:
            raise GeometryError("unknown element kind %r" % kind)

    # -- constructors ----------------------------------------------------

    @classmethod
    def triangle_standard(cls, v1, v2, v3):
        """F(u,v) = (1-u-v) v1 + u v2 + v v3."""
        return cls("triangle", (v1, v2, v3))

    @classmethod
    def quad_standard(cls, v1, v2, v3, v4):
        """F(u,v) = (1-u)(1-v) v1 + u(1-v) v2 + uv v3 + (1-u)v v4."""
        return cls("quad", (v1, v2, v3, v4))

    @classmethod
    def quad_interface(cls, v1, v2, v3, v4):
        """Interface layout: edge v1->v2 at u = 0, cycle continues v3, v4."""
        return cls("quad", (v1, v4, v3, v2))

    @classmethod
    def triangle_interface(cls, v1, v2, apex):
        """Interface layout: F(u,v) = u apex + v v2 + (1-u-v) v1."""
        return cls("triangle", (v1, apex, v2))

    @classmethod
    def from_element(cls, mesh, index):
        el = mesh.elements[index]
        pts = [mesh.vertices[v] for v in el.vertices]
        if el.kind == "triangle":
            return cls.triangle_standard(*pts)
        return cls.quad_standard(*pts)

    # -- evaluation --------------------------------------------------------

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        u, v = pts[:, [0]], pts[:, [1]]
        if self.kind == "triangle":
            return (1 - u - v) * self.t0 + u * self.t1 + v * self.t2
        return ((1 - u) * (1 - v) * self.c00 + u * (1 - v) * self.c10
                + u * v * self.c11 + (1 - u) * v * self.c01)

    def jacobian_at(self, pts):
        """Jacobian matrices, shape (npts, 2, 2); columns d_u F, d_v F."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        n = len(pts)
        J = np.empty((n, 2, 2))
        if self.kind == "triangle":
            J[:, :, 0] = self.t1 - self.t0
            J[:, :, 1] = self.t2 - self.t0
        else:
            u, v = pts[:, [0]], pts[:, [1]]
            J[:, :, 0] = (1 - v) * (self.c10 - self.c00) + v * (self.c11 - self.c01)
            J[:, :, 1] = (1 - u) * (self.c01 - self.c00) + u * (self.c11 - self.c10)
        return J

    def jacobian(self, u, v):
        """Jacobian, determinant and inverse at one reference point."""
        J = self.jacobian_at([[u, v]])[0]
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) < 1e-14:
            raise GeometryError("singular Jacobian at (%g, %g)" % (u, v))
        inv = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / det
        return J, det, inv

    def second_derivatives(self):
        """Hessians of both coordinate functions (constant over the element)."""
        H1 = np.zeros((2, 2))
        H2 = np.zeros((2, 2))
        if self.kind == "quad":
            H1[0, 1] = H1[1, 0] = self.mixed[0]
            H2[0, 1] = H2[1, 0] = self.mixed[1]
        return H1, H2

    def invert(self, xy, tol=1e-12, maxiter=50):
        """Newton inversion of the map; returns reference coordinates."""
        xy = np.asarray(xy, dtype=float)
        uv = np.array([1 / 3, 1 / 3]) if self.kind == "triangle" else \
            np.array([0.5, 0.5])
        for _ in range(maxiter):
            r = self(uv[None])[0] - xy
            if np.linalg.norm(r) < tol:
                return uv
            _, _, inv = self.jacobian(uv[0], uv[1])
            uv = uv - inv @ r
        raise GeometryError("map inversion did not converge for %s" % (xy,))

    def corners(self):
        if self.kind == "triangle":
            return [self.t0, self.t1, self.t2]
        return [self.c00, self.c10, self.c11, self.c01]


def directional_derivative_field(gmap, patch, pts):
    """Physical gradient G of phi = f o F^{-1} at reference points; (npts, 2).

    <n, G> reproduces the directional derivative along any unit vector n.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    fu = patch.derivative("u").value(pts)
    fv = patch.derivative("v").value(pts)
    J = gmap.jacobian_at(pts)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if (np.abs(det) < 1e-14).any():
        raise GeometryError("singular Jacobian in derivative field")
    Fu, Fv = J[:, :, 0], J[:, :, 1]
    return (fu[:, None] * perp(Fv) - fv[:, None] * perp(Fu)) / det[:, None]


# ----------------------------------------------------------------------
# interface frames and ordinate remaps
# ----------------------------------------------------------------------

_QUAD_STD_CORNER = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (1.0, 1.0), 3: (0.0, 1.0)}


class QuadRemap:
    """Reindexing between interface-frame and stored tensor ordinates."""

    def __init__(self, cycle_local, p):
        # cycle_local: local vertex positions playing canonical V1, V2, C, D
        self.p = p
        corners = {  # canonical parameter corner -> std parameter corner
            (0.0, 0.0): _QUAD_STD_CORNER[cycle_local[0]],
            (0.0, 1.0): _QUAD_STD_CORNER[cycle_local[1]],
            (1.0, 1.0): _QUAD_STD_CORNER[cycle_local[2]],
            (1.0, 0.0): _QUAD_STD_CORNER[cycle_local[3]],
        }
        o = np.array(corners[(0.0, 0.0)])
        du = np.array(corners[(1.0, 0.0)]) - o
        dv = np.array(corners[(0.0, 1.0)]) - o
        self._affine = (o, du, dv)
        ga, gb = np.meshgrid(np.arange(p + 1), np.arange(p + 1), indexing="ij")
        # std slot expression is u, 1-u, v or 1-v of the canonical frame;
        # b^canon_{a,b} = b^std_{i',j'} with i' read off the first slot
        self.si = self._slot_index(du[0], dv[0], ga, gb)
        self.sj = self._slot_index(du[1], dv[1], ga, gb)

    def _slot_index(self, cu, cv, ga, gb):
        if cu == 1:       # slot = u      -> index a
            return ga
        if cu == -1:      # slot = 1 - u  -> index p - a
            return self.p - ga
        if cv == 1:       # slot = v      -> index b
            return gb
        return self.p - gb

    def to_std_point(self, pts):
        o, du, dv = self._affine
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return o + np.outer(pts[:, 0], du) + np.outer(pts[:, 1], dv)

    def gather(self, std_ordinates):
        return std_ordinates[self.si, self.sj]

    def scatter_rows(self, std_ordinates, row0, row1):
        std_ordinates[self.si[0], self.sj[0]] = row0
        std_ordinates[self.si[1], self.sj[1]] = row1


class TriangleRemap:
    """Reindexing between interface-frame and stored triangular ordinates."""

    def __init__(self, slot_perm, p):
        # slot_perm maps canonical exponent slots (i, j, k) to std slots
        self.p = p
        self.slot_perm = slot_perm
        self._std_flat = {}
        for r in (0, 1):
            idx = []
            for j in range(p + 1 - r):
                tri = {"i": r, "j": j, "k": p - r - j}
                std = {slot_perm[s]: tri[s] for s in ("i", "j", "k")}
                idx.append(tri_index(p, std["i"], std["j"]))
            self._std_flat[r] = np.array(idx)
        full = []
        for (i, j) in tri_index_list(p):
            tri = {"i": i, "j": j, "k": p - i - j}
            std = {slot_perm[s]: tri[s] for s in ("i", "j", "k")}
            full.append(tri_index(p, std["i"], std["j"]))
        self.full = np.array(full)

    def to_std_point(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        bary = {"i": pts[:, 0], "j": pts[:, 1], "k": 1 - pts[:, 0] - pts[:, 1]}
        std = {self.slot_perm[s]: bary[s] for s in ("i", "j", "k")}
        return np.stack([std["i"], std["j"]], axis=1)

    def gather(self, std_ordinates):
        return std_ordinates[self.full]

    def scatter_rows(self, std_ordinates, row0, row1):
        std_ordinates[self._std_flat[0]] = row0
        std_ordinates[self._std_flat[1]] = row1


class SideFrame:
    """One element's view of an edge: interface-frame map, remap, gluing data.

    alpha and beta are the degree-1 Bernstein coefficient pairs of
    det J_F(0, v) and <V2-V1, d_u F(0, v)>/|V2-V1|^2; for triangles both
    are constant (equal pair entries).
    """

    def __init__(self, mesh, edge_id, element_id, p):
        self.element = element_id
        el = mesh.elements[element_id]
        self.kind = el.kind
        v1g, v2g = mesh.edges[edge_id].vertices  # canonical: lower index first
        verts = el.vertices
        n = el.nv
        local = el.local_edges().index(
            (v1g, v2g)) if (v1g, v2g) in el.local_edges() else \
            el.local_edges().index((v2g, v1g))
        forward = el.local_edges()[local] == (v1g, v2g)
        pts = mesh.vertices
        if el.kind == "quad":
            if forward:
                cyc = [(local + s) % 4 for s in range(4)]
            else:
                cyc = [(local + 1) % 4, local, (local - 1) % 4, (local - 2) % 4]
            vids = [verts[c] for c in cyc]
            self.map = GeometryMap.quad_interface(*[pts[v] for v in vids])
            self.remap = QuadRemap(cyc, p)
        else:
            if forward:
                cyc = [local, (local + 1) % 3, (local + 2) % 3]
            else:
                cyc = [(local + 1) % 3, local, (local + 2) % 3]
            vids = [verts[c] for c in cyc]
            self.map = GeometryMap.triangle_interface(pts[vids[0]], pts[vids[1]],
                                                      pts[vids[2]])
            # std slots: stored w0 -> k, w1 -> i, w2 -> j; canonical:
            # V1 -> k, apex -> i, V2 -> j
            std_slot = {0: "k", 1: "i", 2: "j"}
            canon_vertex = {"k": cyc[0], "j": cyc[1], "i": cyc[2]}
            self.remap = TriangleRemap(
                {s: std_slot[canon_vertex[s]] for s in ("i", "j", "k")}, p)
        e = pts[v2g] - pts[v1g]
        self.edge_vector = e
        self.beta_len = float(np.linalg.norm(e))
        a0 = self.map.jacobian_at([[0.0, 0.0]])[0][:, 0]
        a1 = self.map.jacobian_at([[0.0, 1.0]])[0][:, 0]
        self.du_ends = (a0, a1)
        self.alpha = np.array([_det2(a0, e), _det2(a1, e)])
        self.beta = np.array([e @ a0, e @ a1]) / self.beta_len ** 2
        if np.abs(self.alpha).min() <= 1e-14:
            raise GeometryError("vanishing gluing determinant on edge %d "
                                "of element %d" % (edge_id, element_id))


def _det2(a, b):
    return float(a[0] * b[1] - a[1] * b[0])


class CanonicalInterface:
    """An interior edge with both incident elements in the interface frame."""

    def __init__(self, mesh, edge_id, p, check=True):
        edge = mesh.edges[edge_id]
        if edge.boundary:
            raise GeometryError("edge %d is a boundary edge" % edge_id)
        self.edge_id = edge_id
        e1, e2 = edge.elements
        k1, k2 = mesh.elements[e1].kind, mesh.elements[e2].kind
        if k1 != k2 and k2 == "quad":   # quad plays side 1 in mixed pairs
            e1, e2 = e2, e1
        self.side1 = SideFrame(mesh, edge_id, e1, p)
        self.side2 = SideFrame(mesh, edge_id, e2, p)
        if check:
            v = np.linspace(0.0, 1.0, 7)
            line = np.stack([np.zeros_like(v), v], axis=1)
            d = np.abs(self.side1.map(line) - self.side2.map(line)).max()
            scale = max(1.0, self.side1.beta_len)
            if d > 1e-13 * scale:
                raise GeometryError("interface parametrizations disagree on "
                                    "edge %d (defect %.2e)" % (edge_id, d))


class GluingData:
    """Gluing polynomials of an interface in Bernstein form.

    alpha1, alpha2, beta1, beta2 have degree <= 1; alpha3 degree <= 2;
    beta is the constant edge length.
    """

    def __init__(self, iface):
        s1, s2 = iface.side1, iface.side2
        self.alpha1 = UnivariateBernstein(s1.alpha)
        self.alpha2 = UnivariateBernstein(s2.alpha)
        self.beta1 = UnivariateBernstein(s1.beta)
        self.beta2 = UnivariateBernstein(s2.beta)
        self.beta = s1.beta_len
        a10, a11 = s1.du_ends
        a20, a21 = s2.du_ends
        self.alpha3 = UnivariateBernstein([
            _det2(a20, a10),
            0.5 * (_det2(a20, a11) + _det2(a21, a10)),
            _det2(a21, a11),
        ])


def canonical_interface(mesh, edge_id, p=1):
    return CanonicalInterface(mesh, edge_id, p)


def gluing_data(iface):
    return GluingData(iface)
