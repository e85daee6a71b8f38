import numpy as np
import pytest

from c1mixed.mesh import MixedMesh, load_desk_mesh


def single_quad():
    return MixedMesh([[0, 0], [1, 0], [1, 1], [0, 1]], quads=[[0, 1, 2, 3]])


def single_triangle():
    return MixedMesh([[0, 0], [1, 0], [0, 1]], triangles=[[0, 1, 2]])


def diagonal_square():
    return MixedMesh([[0, 0], [1, 0], [1, 1], [0, 1]],
                     triangles=[[0, 1, 2], [0, 2, 3]])


def paper_case1_mesh():
    """Quad (0,0),(0,1),(-1,1),(-1,0) joined to the triangle with apex (1,0);
    triangle stored so the interface frame is the identity relabeling."""
    return MixedMesh([[0, 0], [0, 1], [-1, 1], [-1, 0], [1, 0]],
                     triangles=[[0, 4, 1]], quads=[[0, 1, 2, 3]])


@pytest.fixture(scope="session")
def desk_meshes():
    return {name: load_desk_mesh(name) for name in ("desk1", "desk2", "desk3")}


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# ----------------------------------------------------------------------
# random interface pair generators (used by gluing/rank tests)
# ----------------------------------------------------------------------

def _random_edge(rng):
    v1 = rng.uniform(-1, 1, 2)
    ang = rng.uniform(0, 2 * np.pi)
    length = rng.uniform(0.5, 2.0)
    v2 = v1 + length * np.array([np.cos(ang), np.sin(ang)])
    return v1, v2


def _one_sided_points(rng, v1, v2, sign, quad):
    """Vertices completing a CCW element on one side of the edge v1->v2."""
    e = v2 - v1
    n = np.array([-e[1], e[0]]) * sign     # interior direction
    if not quad:
        t = rng.uniform(0.1, 0.9)
        h = rng.uniform(0.4, 1.5)
        s = rng.uniform(-0.6, 0.6)
        return [v1 + t * e + h * n + s * e]
    hc = rng.uniform(0.4, 1.5)
    hd = rng.uniform(0.4, 1.5)
    c = v2 + hc * n + rng.uniform(-0.3, 0.3) * e
    d = v1 + hd * n + rng.uniform(-0.3, 0.3) * e
    return [c, d]


def random_interface_mesh(rng, kind1, kind2, max_tries=100):
    """Two-element mesh of the requested kinds sharing edge (0, 1)."""
    for _ in range(max_tries):
        v1, v2 = _random_edge(rng)
        verts = [v1, v2]
        tris, quads = [], []
        extra1 = _one_sided_points(rng, v1, v2, +1.0, kind1 == "quad")
        if kind1 == "quad":
            # CCW cycle on the +n side: v1 -> v2 -> c -> d
            quads.append([0, 1, 2, 3])
            verts += extra1
        else:
            tris.append([0, 1, 2])
            verts += extra1
        base = len(verts)
        extra2 = _one_sided_points(rng, v1, v2, -1.0, kind2 == "quad")
        if kind2 == "quad":
            # CCW cycle on the -n side runs v2 -> v1 -> d -> c
            quads.append([1, 0, base, base + 1])
            verts += [extra2[1], extra2[0]]
        else:
            tris.append([1, 0, base])
            verts += extra2
        try:
            mesh = MixedMesh(np.array(verts), tris, quads)
        except Exception:
            continue
        if mesh.shape_regularity() > 0.05:
            return mesh
    raise RuntimeError("could not sample a valid interface pair")


def shared_edge_id(mesh):
    for eid, edge in enumerate(mesh.edges):
        if not edge.boundary:
            return eid
    raise AssertionError("no interior edge")


# ----------------------------------------------------------------------
# brute-force constraint-rank oracle (shared with the acceptance suite)
# ----------------------------------------------------------------------

from c1mixed.bernstein import bernstein_basis  # noqa: E402
from c1mixed.geometry import CanonicalInterface, gluing_data  # noqa: E402


def c1_nullspace_dim(mesh, p, edge_id=None):
    """Brute-force rank oracle for the coupled first-two-row ordinates.

    Samples the graph-continuity identity (and, for quad-quad, the shared
    polynomial-degree condition) on a fine parameter grid and counts the
    nullspace dimension by SVD.
    """
    eid = shared_edge_id(mesh) if edge_id is None else edge_id
    iface = CanonicalInterface(mesh, eid, p)
    g = gluing_data(iface)
    sides = (iface.side1, iface.side2)
    nrows = [2 * (p + 1) if s.kind == "quad" else (2 * p + 1) for s in sides]
    both_quads = all(s.kind == "quad" for s in sides)
    nq = p if both_quads else 0
    ntot = sum(nrows) + nq
    vs = np.linspace(0.0, 1.0, 2 * p + 5)
    Bp = bernstein_basis(p, vs)          # (p+1, nv)
    Bpm1 = bernstein_basis(p - 1, vs)

    def du_matrix(side, off):
        """Rows of d_u f(0, v_k) as linear maps of the unknown vector."""
        out = np.zeros((len(vs), ntot))
        if side.kind == "quad":
            # p * (b_{1,j} - b_{0,j}) at degree p
            out[:, off:off + p + 1] -= p * Bp.T
            out[:, off + p + 1:off + 2 * (p + 1)] += p * Bp.T
        else:
            out[:, off:off + p + 1] -= p * np.vstack([Bpm1, np.zeros(len(vs))]).T
            out[:, off + p + 1:off + 2 * p + 1] += p * Bpm1.T
        return out

    def dv_matrix(off):
        # p * (c_{j+1} - c_j) at degree p-1, from the row-0 block
        out = np.zeros((len(vs), ntot))
        D = np.zeros((p, p + 1))
        D[np.arange(p), np.arange(p)] = -p
        D[np.arange(p), np.arange(p) + 1] = p
        out[:, off:off + p + 1] = Bpm1.T @ D
        return out

    off2 = nrows[0]
    rows = []
    # C0: row0 of side 1 equals row0 of side 2
    for j in range(p + 1):
        r = np.zeros(ntot)
        r[j] = 1.0
        r[off2 + j] = -1.0
        rows.append(r)
    if not both_quads:
        a1 = g.alpha1.coeffs[0] + vs * np.diff(g.alpha1.coeffs)[0]
        a2 = g.alpha2.coeffs[0] + vs * np.diff(g.alpha2.coeffs)[0]
        a3 = (g.alpha3(vs))
        M = (a1[:, None] * du_matrix(sides[1], off2)
             - a2[:, None] * du_matrix(sides[0], 0)
             + a3[:, None] * dv_matrix(0))
        rows.extend(M)
    else:
        qoff = sum(nrows)
        for side, off, alpha, beta in ((sides[0], 0, g.alpha1, g.beta1),
                                       (sides[1], off2, g.alpha2, g.beta2)):
            al = alpha(vs)
            be = beta(vs)
            M = du_matrix(side, off) - be[:, None] * dv_matrix(off)
            M[:, qoff:qoff + p] -= al[:, None] * Bpm1.T
            rows.extend(M)
    A = np.array(rows)
    sv = np.linalg.svd(A, compute_uv=False)
    tol = sv[0] * 1e-9
    return ntot - int((sv > tol).sum())

