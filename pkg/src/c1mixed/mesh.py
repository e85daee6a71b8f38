"""Mixed triangle/quadrilateral meshes: validation, adjacency, refinement.

A mesh is a partition of a planar polygonal domain into open triangles and
convex quadrilaterals joined along whole edges (no hanging vertices).
Element vertices are stored counterclockwise; edges are derived from the
element lists with the canonical key (min index, max index), ordered
lexicographically.  Instances are immutable after construction.
"""

import hashlib
import json
import os

import numpy as np


class MeshError(ValueError):
    pass


class Edge:
    """Mesh edge between vertex indices v1 < v2."""

    def __init__(self, v1, v2):
        self.vertices = (v1, v2)
        self.elements = []          # incident element indices (1 or 2)
        self.orientations = []      # +1 if the element traverses v1->v2

    @property
    def boundary(self):
        return len(self.elements) == 1


class Element:
    def __init__(self, kind, vertices):
        self.kind = kind            # "triangle" | "quad"
        self.vertices = tuple(int(v) for v in vertices)
        self.edges = None           # filled by MixedMesh, aligned with local_edges

    @property
    def nv(self):
        return len(self.vertices)

    def local_edges(self):
        """Vertex pairs (w_a, w_{a+1}) in traversal order."""
        v = self.vertices
        return [(v[a], v[(a + 1) % len(v)]) for a in range(len(v))]


class MixedMesh:
    """Immutable mixed mesh with full element/edge adjacency."""

    def __init__(self, vertices, triangles=(), quads=()):
        self.vertices = np.array(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        if not np.isfinite(self.vertices).all():
            raise MeshError("non-finite vertex coordinates")
        self.elements = [Element("triangle", t) for t in triangles]
        self.elements += [Element("quad", q) for q in quads]
        if not self.elements:
            raise MeshError("mesh has no elements")
        self._build_edges()
        self._validate()
        self._build_adjacency()
        self._cache = {}

    # -- construction -------------------------------------------------

    def _build_edges(self):
        keys = set()
        for el in self.elements:
            for a, b in el.local_edges():
                if a == b:
                    raise MeshError("degenerate edge in element %s" % (el.vertices,))
                keys.add((min(a, b), max(a, b)))
        self.edges = [Edge(a, b) for a, b in sorted(keys)]
        lookup = {e.vertices: i for i, e in enumerate(self.edges)}
        for ei, el in enumerate(self.elements):
            ids = []
            for a, b in el.local_edges():
                k = lookup[(min(a, b), max(a, b))]
                ids.append(k)
                self.edges[k].elements.append(ei)
                self.edges[k].orientations.append(1 if a < b else -1)
            el.edges = tuple(ids)

    def _validate(self):
        pts = self.vertices
        nv = len(pts)
        scale = max(1.0, np.abs(pts).max())
        # duplicate vertices
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        close = np.all(np.abs(np.diff(pts[order], axis=0)) < 1e-12 * scale, axis=1)
        if close.any():
            k = int(np.where(close)[0][0])
            raise MeshError("duplicate vertices %d and %d"
                            % (order[k], order[k + 1]))
        for el in self.elements:
            if max(el.vertices) >= nv or min(el.vertices) < 0:
                raise MeshError("vertex index out of range in %s" % (el.vertices,))
            if len(set(el.vertices)) != el.nv:
                raise MeshError("repeated vertex in element %s" % (el.vertices,))
            self._check_orientation(el)
        for k, e in enumerate(self.edges):
            if len(e.elements) > 2:
                raise MeshError("edge %s shared by %d elements"
                                % (e.vertices, len(e.elements)))
            if len(e.elements) == 2 and e.orientations[0] == e.orientations[1]:
                raise MeshError("inconsistent orientation across edge %s"
                                % (e.vertices,))
        self._check_hanging()

    def _check_orientation(self, el):
        p = self.vertices[list(el.vertices)]
        n = el.nv
        crosses = []
        for a in range(n):
            e1 = p[(a + 1) % n] - p[a]
            e2 = p[(a + 2) % n] - p[(a + 1) % n]
            crosses.append(e1[0] * e2[1] - e1[1] * e2[0])
        crosses = np.array(crosses)
        area = 0.5 * abs(np.dot(p[:, 0], np.roll(p[:, 1], -1))
                         - np.dot(p[:, 1], np.roll(p[:, 0], -1)))
        if area < 1e-14:
            raise MeshError("degenerate element %s (zero area)" % (el.vertices,))
        if (crosses <= 0).any():
            if (crosses >= 0).all() or (crosses <= 0).all():
                raise MeshError("element %s is not counterclockwise"
                                % (el.vertices,))
            raise MeshError("non-convex quad %s" % (el.vertices,))
        if n == 4:
            # quads whose diagonal-split angle bound collapses are rejected:
            # the projector's stability constant depends on that bound
            rho = min(_min_angle(p[idx])
                      for idx in ([0, 1, 2], [0, 2, 3], [0, 1, 3], [1, 2, 3]))
            if rho <= 1e-6:
                raise MeshError("nearly degenerate quad %s (diagonal-split "
                                "angle bound %.2e rad)" % (el.vertices, rho))

    def _check_hanging(self):
        """A vertex strictly inside another edge violates the mesh partition."""
        pts = self.vertices
        scale = max(1.0, np.abs(pts).max())
        for e in self.edges:
            a, b = pts[e.vertices[0]], pts[e.vertices[1]]
            d = b - a
            L2 = d @ d
            t = ((pts - a) @ d) / L2
            proj = a + np.outer(t, d)
            dist = np.linalg.norm(pts - proj, axis=1)
            inside = (t > 1e-9) & (t < 1 - 1e-9) & (dist < 1e-9 * scale)
            if inside.any():
                raise MeshError("hanging vertex %d on edge %s"
                                % (int(np.where(inside)[0][0]), e.vertices))

    def _build_adjacency(self):
        self.vertex_elements = [[] for _ in range(len(self.vertices))]
        self.vertex_edges = [[] for _ in range(len(self.vertices))]
        for i, el in enumerate(self.elements):
            for v in el.vertices:
                self.vertex_elements[v].append(i)
        for k, e in enumerate(self.edges):
            for v in e.vertices:
                self.vertex_edges[v].append(k)
        self.boundary_vertices = sorted({v for e in self.edges if e.boundary
                                         for v in e.vertices})

    # -- index sets ----------------------------------------------------

    @property
    def triangle_indices(self):
        return [i for i, el in enumerate(self.elements) if el.kind == "triangle"]

    @property
    def quad_indices(self):
        return [i for i, el in enumerate(self.elements) if el.kind == "quad"]

    def counts(self):
        return dict(vertices=len(self.vertices), edges=len(self.edges),
                    triangles=len(self.triangle_indices),
                    quads=len(self.quad_indices))

    # -- geometry queries ----------------------------------------------

    def edge_length(self, k):
        a, b = self.edges[k].vertices
        return float(np.linalg.norm(self.vertices[b] - self.vertices[a]))

    def longest_edge(self):
        return max(self.edge_length(k) for k in range(len(self.edges)))

    def element_area(self, i):
        p = self.vertices[list(self.elements[i].vertices)]
        return 0.5 * abs(np.dot(p[:, 0], np.roll(p[:, 1], -1))
                         - np.dot(p[:, 1], np.roll(p[:, 0], -1)))

    def total_area(self):
        return sum(self.element_area(i) for i in range(len(self.elements)))

    def shape_regularity(self):
        """Smallest angle over triangles and both diagonal splits of quads."""
        rho = np.inf
        for el in self.elements:
            p = self.vertices[list(el.vertices)]
            if el.kind == "triangle":
                tris = [p]
            else:
                tris = [p[[0, 1, 2]], p[[0, 2, 3]], p[[0, 1, 3]], p[[1, 2, 3]]]
            for t in tris:
                rho = min(rho, _min_angle(t))
        if rho <= 1e-6:
            raise MeshError("degenerate or nearly degenerate element "
                            "(angle bound %.2e rad)" % rho)
        return float(rho)

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        return {
            "vertices": [[float(x), float(y)] for x, y in self.vertices],
            "triangles": [list(self.elements[i].vertices)
                          for i in self.triangle_indices],
            "quads": [list(self.elements[i].vertices)
                      for i in self.quad_indices],
        }

    def canonical_hash(self):
        blob = json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- refinement ------------------------------------------------------

    def refine(self, times=1):
        mesh = self
        for _ in range(times):
            mesh = _refine_once(mesh)
        return mesh


def _min_angle(p):
    angles = []
    for a in range(3):
        u = p[(a + 1) % 3] - p[a]
        v = p[(a + 2) % 3] - p[a]
        cross = u[0] * v[1] - u[1] * v[0]
        angles.append(np.arctan2(abs(cross), u @ v))
    if min(angles) <= 0 or not np.isfinite(angles).all():
        return 0.0
    return min(angles)


def _refine_once(mesh):
    verts = [tuple(v) for v in mesh.vertices]
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            m = 0.5 * (mesh.vertices[key[0]] + mesh.vertices[key[1]])
            midpoint[key] = len(verts)
            verts.append((float(m[0]), float(m[1])))
        return midpoint[key]

    triangles, quads = [], []
    for el in mesh.elements:
        v = el.vertices
        if el.kind == "triangle":
            m01, m12, m20 = mid(v[0], v[1]), mid(v[1], v[2]), mid(v[2], v[0])
            triangles += [(v[0], m01, m20), (m01, v[1], m12),
                          (m20, m12, v[2]), (m01, m12, m20)]
        else:
            # edge points are bilinear images of parameter midpoints, which
            # coincide with arithmetic midpoints; the center is F(1/2, 1/2)
            m01, m12 = mid(v[0], v[1]), mid(v[1], v[2])
            m23, m30 = mid(v[2], v[3]), mid(v[3], v[0])
            c = 0.25 * mesh.vertices[list(v)].sum(axis=0)
            ci = len(verts)
            verts.append((float(c[0]), float(c[1])))
            quads += [(v[0], m01, ci, m30), (m01, v[1], m12, ci),
                      (ci, m12, v[2], m23), (m30, ci, m23, v[3])]
    return MixedMesh(verts, triangles, quads)


# ----------------------------------------------------------------------
# mesh file I/O
# ----------------------------------------------------------------------

def load_mesh(source):
    """Build a validated MixedMesh from a dict, JSON text, or file path."""
    if isinstance(source, MixedMesh):
        return source
    if isinstance(source, dict):
        data = source
    elif isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source) as fh:
            data = json.load(fh)
    elif isinstance(source, str):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise MeshError("mesh source is neither a file nor JSON: %s" % exc)
    else:
        raise MeshError("unsupported mesh source %r" % (source,))
    if not isinstance(data, dict) or "vertices" not in data:
        raise MeshError("mesh JSON must contain a 'vertices' array")
    tris = data.get("triangles", [])
    quads = data.get("quads", [])
    for name, lst, n in (("triangles", tris, 3), ("quads", quads, 4)):
        for item in lst:
            if len(item) != n:
                raise MeshError("%s entries need %d indices: %s" % (name, n, item))
    return MixedMesh(data["vertices"], tris, quads)


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        json.dump(mesh.to_dict(), fh, indent=1)
        fh.write("\n")


def desk_mesh_path(name):
    """Path of a packaged desk mesh ('desk1' .. 'desk3')."""
    here = os.path.dirname(__file__)
    path = os.path.join(here, "data", name + ".json")
    if not os.path.exists(path):
        raise MeshError("unknown desk mesh %r" % name)
    return path


def load_desk_mesh(name):
    return load_mesh(desk_mesh_path(name))
