import math

import numpy as np
import pytest

from c1mixed.bernstein import (TensorPatch, TriangularPatch,
                               UnivariateBernstein, bernstein_basis,
                               bernstein_basis_deriv, hermite_fit_univariate,
                               partial_derivative_trace, tensor_basis_matrix,
                               triangle_basis_matrix, tri_index,
                               tri_index_list, tri_ncoef, value_trace)


def random_triangle_points(rng, n):
    pts = rng.random((n, 2))
    pts[:, 1] *= 1.0 - pts[:, 0]
    return pts


def test_partition_of_unity(rng):
    for p in (3, 5, 8):
        pts = rng.random((30, 2))
        assert np.abs(tensor_basis_matrix(p, pts).sum(axis=0) - 1).max() < 1e-13
        tpts = random_triangle_points(rng, 30)
        assert np.abs(triangle_basis_matrix(p, tpts).sum(axis=0) - 1).max() < 1e-13
        ones_q = TensorPatch(p, np.ones((p + 1, p + 1)))
        assert np.abs(ones_q.value(pts) - 1).max() < 1e-13
        ones_t = TriangularPatch(p, np.ones(tri_ncoef(p)))
        assert np.abs(ones_t.value(tpts) - 1).max() < 1e-13


def test_tensor_corner_interpolation():
    p = 5
    ords = np.zeros((p + 1, p + 1))
    ords[0, 0] = 1.0
    patch = TensorPatch(p, ords)
    assert patch.value([[0.0, 0.0]])[0] == pytest.approx(1.0, abs=1e-15)


def test_triangle_monomial_oracle():
    # ordinates of u^2 at p=2: only b_{2,0,0} = 1
    ords = np.zeros(tri_ncoef(2))
    ords[tri_index(2, 2, 0)] = 1.0
    patch = TriangularPatch(2, ords)
    u, v = 0.5, 0.25
    assert patch.value([[u, v]])[0] == pytest.approx(u**2, abs=1e-15)


def test_casteljau_matches_binomial_formula(rng):
    # de Casteljau evaluation against the direct basis-matrix route
    for p in (4, 7):
        ords = rng.standard_normal((p + 1, p + 1))
        pts = rng.random((50, 2))
        direct = ords.ravel() @ tensor_basis_matrix(p, pts)
        assert np.abs(TensorPatch(p, ords).value(pts) - direct).max() < 1e-12
        tords = rng.standard_normal(tri_ncoef(p))
        tpts = random_triangle_points(rng, 50)
        direct = tords @ triangle_basis_matrix(p, tpts)
        assert np.abs(TriangularPatch(p, tords).value(tpts) - direct).max() < 1e-12


def test_patch_matches_monomial_polynomial(rng):
    # ordinates fitted from a random bivariate polynomial agree with direct
    # monomial evaluation elsewhere
    p = 5
    coeffs = {(i, j): rng.standard_normal()
              for i in range(p + 1) for j in range(p + 1 - i)}

    def poly(pts):
        return sum(a * pts[:, 0]**i * pts[:, 1]**j
                   for (i, j), a in coeffs.items())

    # tensor: collocate on a unisolvent grid
    grid = np.array([(i / p, j / p) for i in range(p + 1)
                     for j in range(p + 1)])
    A = tensor_basis_matrix(p, grid).T
    ords = np.linalg.solve(A, poly(grid)).reshape(p + 1, p + 1)
    pts = rng.random((100, 2))
    err = np.abs(TensorPatch(p, ords).value(pts) - poly(pts)).max()
    assert err < 1e-12 * max(1, np.abs(ords).max())
    # triangular
    tgrid = np.array([(i / p, j / p) for (i, j) in tri_index_list(p)])
    A = triangle_basis_matrix(p, tgrid).T
    tords = np.linalg.solve(A, poly(tgrid))
    tpts = random_triangle_points(rng, 100)
    err = np.abs(TriangularPatch(p, tords).value(tpts) - poly(tpts)).max()
    assert err < 1e-12 * max(1, np.abs(tords).max())


def test_outside_domain_rejected():
    patch = TensorPatch(3, np.ones((4, 4)))
    with pytest.raises(ValueError):
        patch.value([[1.5, 0.5]])
    tpatch = TriangularPatch(3, np.ones(tri_ncoef(3)))
    with pytest.raises(ValueError):
        tpatch.value([[0.8, 0.8]])


def test_trace_constant_patch_is_zero():
    p = 5
    patch = TensorPatch(p, np.full((p + 1, p + 1), 3.25))
    for which in ("u", "v"):
        assert np.abs(partial_derivative_trace(patch, which).coeffs).max() == 0


def test_trace_tensor_paper_value():
    # b_{1,j} = 1, b_{0,j} = 0 -> d_u trace coefficients all p
    p = 5
    ords = np.zeros((p + 1, p + 1))
    ords[1, :] = 1.0
    tr = partial_derivative_trace(TensorPatch(p, ords), "u")
    assert tr.degree == p
    assert np.allclose(tr.coeffs, 5.0)


def test_trace_triangle_linear_edge():
    # b_{0,j,5-j} = j/5 -> d_v trace coefficients all 1
    p = 5
    ords = np.zeros(tri_ncoef(p))
    for j in range(p + 1):
        ords[tri_index(p, 0, j)] = j / p
    tr = partial_derivative_trace(TriangularPatch(p, ords), "v")
    assert np.allclose(tr.coeffs, 1.0)


def test_traces_match_finite_differences(rng):
    h = 1e-5
    for kind in ("quad", "triangle"):
        p = 5
        if kind == "quad":
            patch = TensorPatch(p, rng.standard_normal((p + 1, p + 1)))
        else:
            patch = TriangularPatch(p, rng.standard_normal(tri_ncoef(p)))
        vs = np.linspace(0.05, 0.9, 7)
        du = partial_derivative_trace(patch, "u")
        dv = partial_derivative_trace(patch, "v")
        line = lambda u, v: patch.value(np.stack([u, v], axis=1),
                                         check_domain=False)
        # centered differences straddling u = 0 (polynomials extend)
        fd_u = (line(np.full_like(vs, h), vs)
                - line(np.full_like(vs, -h), vs)) / (2 * h)
        fd_v = (line(np.zeros_like(vs), vs + h)
                - line(np.zeros_like(vs), vs - h)) / (2 * h)
        assert np.abs(du(vs) - fd_u).max() < 1e-6
        assert np.abs(dv(vs) - fd_v).max() < 1e-6


def test_value_trace():
    p = 4
    ords = np.arange((p + 1) ** 2, dtype=float).reshape(p + 1, p + 1)
    tr = value_trace(TensorPatch(p, ords))
    assert np.allclose(tr.coeffs, ords[0])


def test_hermite_fit_monomial_t5():
    p = 5
    conds = [(0.0, 0, 0.0), (0.0, 1, 0.0), (0.0, 2, 0.0),
             (1.0, 0, 1.0), (1.0, 1, 5.0), (1.0, 2, 20.0)]
    fit = hermite_fit_univariate(p, conds)
    assert np.allclose(fit.coeffs, [0, 0, 0, 0, 0, 1], atol=1e-12)


def test_hermite_fit_zero_data():
    p = 6
    r = np.linspace(0.3, 0.7, p - 5)
    conds = ([(0.0, k, 0.0) for k in range(3)]
             + [(1.0, k, 0.0) for k in range(3)]
             + [(t, 0, 0.0) for t in r])
    fit = hermite_fit_univariate(p, conds)
    assert np.abs(fit.coeffs).max() == 0.0


def test_hermite_fit_sin_against_monomial_oracle():
    # independent oracle: degree-7 Hermite interpolation in the monomial basis
    p = 7
    interior = np.linspace(0.35, 0.65, p - 5)
    conds = [(0.0, 0, np.sin(0.0)), (0.0, 1, np.cos(0.0)),
             (0.0, 2, -np.sin(0.0)), (1.0, 0, np.sin(1.0)),
             (1.0, 1, np.cos(1.0)), (1.0, 2, -np.sin(1.0))]
    conds += [(t, 0, np.sin(t)) for t in interior]
    A = np.zeros((p + 1, p + 1))
    rhs = np.zeros(p + 1)
    for r, (t, order, val) in enumerate(conds):
        for k in range(order, p + 1):
            A[r, k] = math.factorial(k) / math.factorial(k - order) \
                * t**(k - order)
        rhs[r] = val
    mono = np.linalg.solve(A, rhs)
    fit = hermite_fit_univariate(p, conds)
    ts = np.linspace(0, 1, 20)
    oracle_vals = sum(c * ts**k for k, c in enumerate(mono))
    assert np.abs(fit(ts) - oracle_vals).max() < 1e-9


def test_hermite_fit_singular_on_repeated_nodes():
    p = 6
    conds = ([(0.0, k, 0.0) for k in range(3)]
             + [(1.0, k, 0.0) for k in range(3)]
             + [(0.5, 0, 1.0)])
    hermite_fit_univariate(p, conds)   # fine
    bad = conds[:-1] + [(0.0, 0, 1.0)]   # duplicates the t=0 value row
    with pytest.raises(ValueError):
        hermite_fit_univariate(p, bad)


def test_univariate_derivative_and_product(rng):
    c = rng.standard_normal(6)
    f = UnivariateBernstein(c)
    ts = np.linspace(0, 1, 11)
    h = 1e-6
    fd = (f(ts + h) - f(ts - h)) / (2 * h)
    assert np.abs(f.derivative()(ts) - fd).max() < 1e-7
    g = UnivariateBernstein(rng.standard_normal(3))
    prod = f * g
    assert prod.degree == f.degree + g.degree
    assert np.abs(prod(ts) - f(ts) * g(ts)).max() < 1e-12


def test_basis_derivative_rows(rng):
    n = 6
    ts = rng.random(9)
    h = 1e-6
    B1 = bernstein_basis_deriv(n, ts, 1)
    fd = (bernstein_basis(n, ts + h) - bernstein_basis(n, ts - h)) / (2 * h)
    assert np.abs(B1 - fd).max() < 1e-6
