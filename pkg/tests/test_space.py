import numpy as np
import pytest

from c1mixed.bernstein import (TensorPatch, TriangularPatch, bernstein_basis,
                               tri_ncoef)
from c1mixed.geometry import CanonicalInterface, gluing_data, perp
from c1mixed.interpolation import project
from c1mixed.functions import Poly2D, get_function
from c1mixed.mesh import MixedMesh
from c1mixed.space import (DofTable, EdgeTrace, SpaceError,
                           SplineFunction, build_basis, check_membership,
                           dimension, frames, interface_ordinates,
                           interior_condition_number, load_spline,
                           save_spline)

from conftest import (c1_nullspace_dim, diagonal_square,
                      random_interface_mesh, shared_edge_id, single_quad,
                      single_triangle)


def test_dimension_values():
    assert dimension(single_triangle(), 5) == 21    # classical Argyris
    assert dimension(single_quad(), 5) == 32
    assert dimension(diagonal_square(), 6) == 41
    with pytest.raises(SpaceError):
        dimension(single_quad(), 4)


def test_dimension_additivity():
    # gluing two single elements along one edge removes the duplicated
    # boundary functionals: 6 per shared vertex, 2p-9 per shared edge
    p = 7
    quad = single_quad()
    tri = MixedMesh([[1, 0], [2, 0.2], [1, 1]], triangles=[[0, 1, 2]])
    both = MixedMesh([[0, 0], [1, 0], [1, 1], [0, 1], [2, 0.2]],
                     quads=[[0, 1, 2, 3]], triangles=[[1, 4, 2]])
    assert dimension(both, p) == (dimension(quad, p) + dimension(tri, p)
                                  - 2 * 6 - (2 * p - 9))


def _rows_to_spline(mesh, iface, rows, p, fill=0.0):
    patches = {}
    for side, (row0, row1) in zip((iface.side1, iface.side2), rows):
        kind = mesh.elements[side.element].kind
        if kind == "quad":
            ords = np.full((p + 1, p + 1), fill)
        else:
            ords = np.full(tri_ncoef(p), fill)
        side.remap.scatter_rows(ords, row0, row1)
        patches[side.element] = TensorPatch(p, ords) if kind == "quad" \
            else TriangularPatch(p, ords)
    return SplineFunction(mesh, p, patches)


def _edge_defects(mesh, eid, spline, n=33):
    """Value/gradient jumps across one edge plus the degree-(p-1) residual
    of its normal derivative."""
    fr = frames(mesh, spline.p)
    ts = np.linspace(0, 1, n)
    line = np.stack([np.zeros_like(ts), ts], axis=1)
    jets = []
    for elem in mesh.edges[eid].elements:
        side = fr.sides[(eid, elem)]
        jets.append(spline.jet_on(elem, side.remap.to_std_point(line), 1))
    dv = np.abs(jets[0]["value"] - jets[1]["value"]).max()
    dg = np.abs(jets[0]["gradient"] - jets[1]["gradient"]).max()
    e = mesh.vertices[mesh.edges[eid].vertices[1]] \
        - mesh.vertices[mesh.edges[eid].vertices[0]]
    nvec = perp(e) / np.linalg.norm(e)
    w = jets[0]["gradient"] @ nvec
    B = bernstein_basis(spline.p - 1, ts).T
    coef, *_ = np.linalg.lstsq(B, w, rcond=None)
    resid = np.abs(B @ coef - w).max()
    return dv, dg, resid, np.abs(w).max()


def test_interface_ordinates_tri_tri_unit_d(rng):
    p = 6
    mesh = random_interface_mesh(rng, "triangle", "triangle")
    eid = shared_edge_id(mesh)
    iface = CanonicalInterface(mesh, eid, p)
    g = gluing_data(iface)
    for j in range(p):
        d = np.zeros(p)
        d[j] = 1.0
        rows = interface_ordinates(iface, g, EdgeTrace(np.zeros(p + 1), d))
        for side, (row0, row1), alpha in zip((iface.side1, iface.side2), rows,
                                             (g.alpha1, g.alpha2)):
            assert np.abs(row0).max() == 0
            expect = np.zeros(p)
            expect[j] = alpha.coeffs[0] / p
            assert np.allclose(row1, expect, atol=1e-14)


@pytest.mark.parametrize("kinds", [("quad", "triangle"),
                                   ("triangle", "triangle"),
                                   ("quad", "quad")])
def test_interface_ordinates_constant_trace(kinds, rng):
    # c == 1, d == 0 must reproduce the constant: both rows identically one;
    # the sentinel weighting is then confirmed by the C1 sampling check
    p = 5
    mesh = random_interface_mesh(rng, *kinds)
    eid = shared_edge_id(mesh)
    iface = CanonicalInterface(mesh, eid, p)
    trace = EdgeTrace(np.ones(p + 1), np.zeros(p))
    rows = interface_ordinates(iface, gluing_data(iface), trace)
    for row0, row1 in rows:
        assert np.allclose(row0, 1.0) and np.allclose(row1, 1.0)
    s = _rows_to_spline(mesh, iface, rows, p)
    dv, dg, _, _ = _edge_defects(mesh, eid, s)
    assert dv < 1e-13 and dg < 1e-13


def test_interface_ordinates_fig6_pattern(rng):
    # single c_1 = 1 on a p=6 quad-quad pair: nonzero ordinates confined to
    # columns 0..2 of rows 0..1 on each side
    p = 6
    mesh = random_interface_mesh(rng, "quad", "quad")
    iface = CanonicalInterface(mesh, shared_edge_id(mesh), p)
    c = np.zeros(p + 1)
    c[1] = 1.0
    rows = interface_ordinates(iface, gluing_data(iface),
                               EdgeTrace(c, np.zeros(p)))
    for side, (row0, row1) in zip((iface.side1, iface.side2), rows):
        assert np.abs(row0[3:]).max() == 0 and row0[1] == 1.0
        assert np.abs(row1[3:]).max() == 0
        b = side.beta
        expect = [b[0], 1 + (1 / p) * (-(p - 1) * b[0] + b[1]),
                  -(2 / p) * b[1]]
        assert np.allclose(row1[:3], expect, atol=1e-14)


@pytest.mark.parametrize("kinds", [("quad", "triangle"),
                                   ("triangle", "triangle"),
                                   ("quad", "quad")])
def test_random_trace_gives_c1_pair(kinds, rng):
    p = 6
    for _ in range(5):
        mesh = random_interface_mesh(rng, *kinds)
        eid = shared_edge_id(mesh)
        iface = CanonicalInterface(mesh, eid, p)
        trace = EdgeTrace(rng.standard_normal(p + 1), rng.standard_normal(p))
        rows = interface_ordinates(iface, gluing_data(iface), trace)
        s = _rows_to_spline(mesh, iface, rows, p)
        dv, dg, resid, wmax = _edge_defects(mesh, eid, s)
        scale = max(1.0, s.max_ordinate())
        assert dv < 1e-12 * scale
        assert dg < 1e-10 * scale
        # the normal derivative is beta * d(v), a degree p-1 polynomial
        assert resid < 1e-10 * max(1.0, wmax)



@pytest.mark.parametrize("kinds", [("quad", "triangle"),
                                   ("triangle", "triangle"),
                                   ("quad", "quad")])
def test_constraint_rank_is_2p_plus_1(kinds, rng):
    for p in (5, 6):
        mesh = random_interface_mesh(rng, *kinds)
        assert c1_nullspace_dim(mesh, p) == 2 * p + 1


def test_build_basis_family_size(desk_meshes):
    mesh = desk_meshes["desk1"]
    basis = build_basis(mesh, 5)
    assert len(basis) == dimension(mesh, 5)


def test_interior_dof_basis_support(desk_meshes):
    mesh = desk_meshes["desk1"]
    p = 5
    basis = build_basis(mesh, p)
    elem = mesh.quad_indices[0]     # triangles have no interior dofs at p=5
    dof = basis.dofs.interior_dof(elem, 0)
    phi = basis.functions[dof]
    assert set(phi.patches) == {elem}
    # zero value and gradient on all element boundary edges
    fr = frames(mesh, p)
    for eid in mesh.elements[elem].edges:
        side = fr.sides[(eid, elem)]
        ts = np.linspace(0, 1, 9)
        ref = side.remap.to_std_point(np.stack([0 * ts, ts], 1))
        jet = phi.jet_on(elem, ref, order=1)
        assert np.abs(jet["value"]).max() < 1e-14
        assert np.abs(jet["gradient"]).max() < 1e-13


def test_basis_reproduces_constants(desk_meshes):
    from c1mixed.interpolation import collect_data
    from c1mixed.space import combine
    mesh = desk_meshes["desk2"]
    p = 5
    basis = build_basis(mesh, p)
    one = Poly2D({(0, 0): 1.0}).as_function()
    coeffs = collect_data(one, mesh, p).to_vector(basis.dofs)
    s = combine(basis, coeffs)
    for elem in range(len(mesh.elements)):
        assert np.abs(s.patch(elem).ordinates - 1.0).max() < 1e-12


def test_basis_cardinality(desk_meshes):
    # applying the interpolation functionals to a basis function gives a
    # unit vector: sampled through the spline-as-oracle data collector
    from c1mixed.interpolation import collect_data
    mesh = desk_meshes["desk1"]
    p = 6
    basis = build_basis(mesh, p)
    for dof in (0, 10, basis.dofs.edge_normal_dof(3, 0),
                basis.dofs.interior_dof(2, 1)):
        vec = collect_data(basis.functions[dof], mesh, p).to_vector(basis.dofs)
        expect = np.zeros(basis.dofs.size)
        expect[dof] = 1.0
        assert np.abs(vec - expect).max() < 1e-9


def test_check_membership_flags_bad_splines(desk_meshes):
    mesh = desk_meshes["desk1"]
    p = 5
    f = get_function("paper")
    s = project(f, mesh, p)
    rep = check_membership(s)
    assert rep.ok()
    # interior ordinate perturbation leaves all interface defects at zero
    elem = mesh.quad_indices[0]
    s2 = SplineFunction(mesh, p, {e: pt.copy() for e, pt in s.patches.items()})
    s2.patches[elem].ordinates[2, 2] += 1.0
    rep2 = check_membership(s2)
    assert rep2.value_defect < 1e-12 and rep2.gradient_defect < 1e-12
    # a second-row perturbation next to an interior edge breaks the
    # gradient across it (the quad's u=1 edge faces the neighbor quad)
    s3 = SplineFunction(mesh, p, {e: pt.copy() for e, pt in s.patches.items()})
    s3.patches[elem].ordinates[p - 1, 3] += 1.0
    assert check_membership(s3).gradient_defect > 1e-6


def test_vertex_dof_order_convention(desk_meshes):
    dofs = DofTable(desk_meshes["desk1"], 5)
    assert dofs.describe(0) == ("vertex", 0, (0, 0))
    assert dofs.describe(3) == ("vertex", 0, (2, 0))
    assert dofs.describe(4) == ("vertex", 0, (1, 1))
    assert dofs.describe(5) == ("vertex", 0, (0, 2))


def test_interior_grid_conditioning():
    for p in range(5, 11):
        assert interior_condition_number("quad", p) < 1e8
        assert interior_condition_number("triangle", p) < 1e8


def test_spline_serialization_roundtrip(tmp_path, desk_meshes):
    mesh = desk_meshes["desk3"]
    p = 5
    s = project(get_function("paper"), mesh, p)
    path = tmp_path / "s.json"
    save_spline(s, path)
    back = load_spline(path, mesh)
    assert back.coefficient_difference(s) == 0.0    # bit-exact round trip
    with pytest.raises(SpaceError, match="different mesh"):
        load_spline(path, mesh.refine())


def test_export_zero_spline(tmp_path, desk_meshes):
    mesh = desk_meshes["desk1"]
    s = SplineFunction(mesh, 5, {})
    path = tmp_path / "zero.json"
    save_spline(s, path)
    back = load_spline(path, mesh)
    assert back.max_ordinate() == 0.0


def test_build_basis_threaded_matches_serial(desk_meshes):
    mesh = desk_meshes["desk1"]
    serial = build_basis(mesh, 5, threads=1)
    threaded = build_basis(mesh, 5, threads=3)
    for a, b in zip(serial.functions, threaded.functions):
        assert a.coefficient_difference(b) == 0.0


def test_constraint_rank_on_desk_interfaces(desk_meshes):
    # one desk pair per interface case
    from conftest import c1_nullspace_dim
    mesh = desk_meshes["desk1"]
    p = 5
    by_case = {}
    for eid, edge in enumerate(mesh.edges):
        if edge.boundary:
            continue
        pair = tuple(sorted(mesh.elements[i].kind for i in edge.elements))
        by_case.setdefault(pair, eid)
    assert len(by_case) == 3
    for eid in by_case.values():
        assert c1_nullspace_dim(mesh, p, edge_id=eid) == 2 * p + 1


def test_quad_row_formula_against_polynomial_algebra(rng):
    # independent oracle: d_u f(0,v) = beta(v) d_v f(0,v) + alpha(v) d(v),
    # computed with exact Bernstein products; then b_{1,j} = c_j + du_j / p
    from c1mixed.bernstein import UnivariateBernstein
    p = 7
    mesh = random_interface_mesh(rng, "quad", "quad")
    iface = CanonicalInterface(mesh, shared_edge_id(mesh), p)
    trace = EdgeTrace(rng.standard_normal(p + 1), rng.standard_normal(p))
    rows = interface_ordinates(iface, gluing_data(iface), trace)
    for side, (row0, row1) in zip((iface.side1, iface.side2), rows):
        alpha = UnivariateBernstein(side.alpha)
        beta = UnivariateBernstein(side.beta)
        dv = UnivariateBernstein(p * np.diff(trace.c))      # degree p-1
        d = UnivariateBernstein(trace.d)
        du = (beta * dv).coeffs + (alpha * d).coeffs        # both degree p
        expect = trace.c + du / p
        assert np.abs(row1 - expect).max() < 1e-12 * max(1, np.abs(du).max())
