"""Bernstein-form polynomials: univariate, triangular and tensor-product.

Triangular ordinates b_{i,j,k} (i+j+k = p) are stored flat in lexicographic
(i, j) order with k = p - i - j; tensor ordinates b_{i,j} as a 2D array whose
first axis is the u-index.  Evaluation uses de Casteljau; the direct
binomial-formula basis matrices are kept as an independent route for
cross-checks and bulk assembly.
"""

import math
from functools import lru_cache

import numpy as np


# ----------------------------------------------------------------------
# index helpers for the triangular layout
# ----------------------------------------------------------------------

def tri_ncoef(p):
    return (p + 1) * (p + 2) // 2


@lru_cache(maxsize=None)
def tri_index_list(p):
    """Lexicographic (i, j) pairs with i + j <= p; k = p - i - j."""
    return tuple((i, j) for i in range(p + 1) for j in range(p + 1 - i))


@lru_cache(maxsize=None)
def _tri_index_map(p):
    return {ij: n for n, ij in enumerate(tri_index_list(p))}


def tri_index(p, i, j):
    """Flat position of ordinate b_{i,j,p-i-j}."""
    return i * (p + 1) - i * (i - 1) // 2 + j


# ----------------------------------------------------------------------
# univariate basis
# ----------------------------------------------------------------------

def bernstein_basis(n, t):
    """Values B^n_i(t); shape (n+1, len(t)).  Stable de Casteljau recurrence."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    B = np.zeros((n + 1, t.size))
    B[0] = 1.0
    for k in range(1, n + 1):
        B[k] = t * B[k - 1]
        for i in range(k - 1, 0, -1):
            B[i] = t * B[i - 1] + (1.0 - t) * B[i]
        B[0] = (1.0 - t) * B[0]
    return B


def bernstein_basis_deriv(n, t, order=1):
    """Derivative values d^r/dt^r B^n_i(t); shape (n+1, len(t))."""
    if order == 0:
        return bernstein_basis(n, t)
    if n < order:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.zeros((n + 1, t.size))
    lower = bernstein_basis_deriv(n - 1, t, order - 1)
    out = np.zeros((n + 1, lower.shape[1]))
    # d/dt B^n_i = n (B^{n-1}_{i-1} - B^{n-1}_i)
    out[1:] += n * lower
    out[:-1] -= n * lower
    return out


def casteljau_univariate(coeffs, t):
    """Evaluate a univariate Bernstein polynomial at t (scalar or array)."""
    t = np.asarray(t, dtype=float)
    b = np.broadcast_to(np.asarray(coeffs, dtype=float)[:, None],
                        (len(coeffs), t.size)).copy()
    for _ in range(len(coeffs) - 1):
        b = (1.0 - t) * b[:-1] + t * b[1:]
    return b[0].reshape(np.shape(t)) if np.ndim(t) else b[0, 0]


class UnivariateBernstein:
    """Polynomial of degree p with Bernstein coefficients c_0..c_p on [0,1]."""

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.degree = len(self.coeffs) - 1

    def __call__(self, t):
        return casteljau_univariate(self.coeffs, t)

    def derivative(self):
        p = self.degree
        if p == 0:
            return UnivariateBernstein([0.0])
        return UnivariateBernstein(p * np.diff(self.coeffs))

    def elevate(self, new_degree):
        """Exact degree raising to new_degree >= degree."""
        c = self.coeffs
        while len(c) - 1 < new_degree:
            n = len(c) - 1
            raised = np.empty(n + 2)
            raised[0] = c[0]
            raised[-1] = c[-1]
            i = np.arange(1, n + 1)
            raised[1:-1] = i / (n + 1) * c[:-1][i - 1] + (1 - i / (n + 1)) * c[i]
            c = raised
        return UnivariateBernstein(c)

    def __mul__(self, other):
        """Exact Bernstein product; degree adds."""
        m, n = self.degree, other.degree
        a, b = self.coeffs, other.coeffs
        out = np.zeros(m + n + 1)
        for k in range(m + n + 1):
            lo, hi = max(0, k - n), min(m, k)
            s = 0.0
            for i in range(lo, hi + 1):
                s += math.comb(m, i) * math.comb(n, k - i) * a[i] * b[k - i]
            out[k] = s / math.comb(m + n, k)
        return UnivariateBernstein(out)


# ----------------------------------------------------------------------
# bivariate basis matrices (direct formulas; cross-check route)
# ----------------------------------------------------------------------

def tensor_basis_matrix(p, pts, du=0, dv=0):
    """Basis (derivative) values for B^{p,p}_{i,j}; shape (ncoef, npts).

    Rows follow the flat C-order i*(p+1)+j matching TensorPatch.ordinates.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    Bu = bernstein_basis_deriv(p, pts[:, 0], du)
    Bv = bernstein_basis_deriv(p, pts[:, 1], dv)
    return (Bu[:, None, :] * Bv[None, :, :]).reshape((p + 1) ** 2, len(pts))


def triangle_basis_matrix(p, pts, du=0, dv=0):
    """Basis (derivative) values for B^p_{i,j,k}; shape (ncoef, npts)."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if du == 0 and dv == 0:
        u, v = pts[:, 0], pts[:, 1]
        w = 1.0 - u - v
        out = np.empty((tri_ncoef(p), len(pts)))
        for n, (i, j) in enumerate(tri_index_list(p)):
            k = p - i - j
            c = math.factorial(p) // (math.factorial(i) * math.factorial(j)
                                      * math.factorial(k))
            out[n] = c * u**i * v**j * w**k
        return out
    # lower by one derivative: d_u B^p_{ijk} = p (B^{p-1}_{i-1,j,k} - B^{p-1}_{i,j,k-1})
    if du > 0:
        lower = triangle_basis_matrix(p - 1, pts, du - 1, dv)
        shift = (1, 0)
    else:
        lower = triangle_basis_matrix(p - 1, pts, du, dv - 1)
        shift = (0, 1)
    out = np.zeros((tri_ncoef(p), len(pts)))
    for n, (i, j) in enumerate(tri_index_list(p - 1)):
        out[tri_index(p, i + shift[0], j + shift[1])] += p * lower[n]
        out[tri_index(p, i, j)] -= p * lower[n]
    return out


# ----------------------------------------------------------------------
# patches
# ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def _tri_casteljau_maps(p):
    """Per-level index triples (to i+1, to j+1, stay) for the de Casteljau sweep."""
    maps = []
    for r in range(p, 0, -1):
        src = _tri_index_map(r)
        iu = np.array([src[(i + 1, j)] for i, j in tri_index_list(r - 1)])
        iv = np.array([src[(i, j + 1)] for i, j in tri_index_list(r - 1)])
        iw = np.array([src[(i, j)] for i, j in tri_index_list(r - 1)])
        maps.append((iu, iv, iw))
    return maps


class TriangularPatch:
    """Polynomial of total degree p on the reference triangle."""

    kind = "triangle"

    def __init__(self, p, ordinates):
        self.degree = p
        self.ordinates = np.asarray(ordinates, dtype=float)
        if self.ordinates.shape != (tri_ncoef(p),):
            raise ValueError("triangular patch of degree %d needs %d ordinates,"
                             " got %s" % (p, tri_ncoef(p), self.ordinates.shape))

    @classmethod
    def zero(cls, p):
        return cls(p, np.zeros(tri_ncoef(p)))

    def get(self, i, j, k=None):
        return self.ordinates[tri_index(self.degree, i, j)]

    def value(self, pts, check_domain=True):
        """de Casteljau evaluation at reference points (n, 2)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        u, v = pts[:, 0], pts[:, 1]
        if check_domain and ((u < -1e-12).any() or (v < -1e-12).any()
                             or (u + v > 1 + 1e-12).any()):
            raise ValueError("point outside reference triangle")
        w = 1.0 - u - v
        b = np.broadcast_to(self.ordinates[:, None],
                            (len(self.ordinates), len(pts))).copy()
        for iu, iv, iw in _tri_casteljau_maps(self.degree):
            b = u * b[iu] + v * b[iv] + w * b[iw]
        return b[0]

    def derivative(self, which):
        """Exact parametric derivative patch, degree p-1."""
        p = self.degree
        out = np.empty(tri_ncoef(p - 1))
        for n, (i, j) in enumerate(tri_index_list(p - 1)):
            if which == "u":
                hi = self.ordinates[tri_index(p, i + 1, j)]
            else:
                hi = self.ordinates[tri_index(p, i, j + 1)]
            out[n] = p * (hi - self.ordinates[tri_index(p, i, j)])
        return TriangularPatch(p - 1, out)

    def copy(self):
        return TriangularPatch(self.degree, self.ordinates.copy())


class TensorPatch:
    """Polynomial of bi-degree (pu, pv) on the unit square; square for splines."""

    kind = "quad"

    def __init__(self, p, ordinates, pv=None):
        self.degree = p
        self.degree_v = p if pv is None else pv
        self.ordinates = np.asarray(ordinates, dtype=float)
        if self.ordinates.shape != (p + 1, self.degree_v + 1):
            raise ValueError("tensor patch needs shape %s, got %s"
                             % ((p + 1, self.degree_v + 1), self.ordinates.shape))

    @classmethod
    def zero(cls, p):
        return cls(p, np.zeros((p + 1, p + 1)))

    def value(self, pts, check_domain=True):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        u, v = pts[:, 0], pts[:, 1]
        if check_domain and ((pts < -1e-12).any() or (pts > 1 + 1e-12).any()):
            raise ValueError("point outside reference square")
        b = np.broadcast_to(self.ordinates[:, :, None],
                            self.ordinates.shape + (len(pts),)).copy()
        for _ in range(self.ordinates.shape[0] - 1):   # collapse u
            b = (1.0 - u) * b[:-1] + u * b[1:]
        b = b[0]
        for _ in range(self.ordinates.shape[1] - 1):   # collapse v
            b = (1.0 - v) * b[:-1] + v * b[1:]
        return b[0]

    def derivative(self, which):
        o = self.ordinates
        if which == "u":
            p = self.degree
            return TensorPatch(p - 1, p * (o[1:] - o[:-1]), self.degree_v)
        p = self.degree_v
        return TensorPatch(self.degree, p * (o[:, 1:] - o[:, :-1]), p - 1)

    def copy(self):
        return TensorPatch(self.degree, self.ordinates.copy(), self.degree_v)


def patch_jet(patch, pts, order=2):
    """Value and parametric derivatives up to `order` at reference points.

    Returns dict with keys 'v', and ('u','v' first, 'uu','uv','vv' second).
    """
    out = {"v": patch.value(pts)}
    if order >= 1:
        fu = patch.derivative("u")
        fv = patch.derivative("v")
        out["du"] = fu.value(pts)
        out["dv"] = fv.value(pts)
        if order >= 2:
            out["duu"] = fu.derivative("u").value(pts)
            out["duv"] = fu.derivative("v").value(pts)
            out["dvv"] = fv.derivative("v").value(pts)
    return out


# ----------------------------------------------------------------------
# boundary traces at the edge u = 0
# ----------------------------------------------------------------------

def value_trace(patch):
    """Bernstein coefficients of f(0, v), degree p."""
    p = patch.degree
    if patch.kind == "quad":
        return UnivariateBernstein(patch.ordinates[0].copy())
    idx = [tri_index(p, 0, j) for j in range(p + 1)]
    return UnivariateBernstein(patch.ordinates[idx])


def partial_derivative_trace(patch, which):
    """Coefficients of the u=0 trace of a first parametric derivative.

    Tensor: d_u f(0,v) has degree p, d_v f(0,v) degree p-1.  Triangular:
    both have degree p-1.
    """
    p = patch.degree
    o = patch.ordinates
    if patch.kind == "quad":
        if which == "u":
            return UnivariateBernstein(p * (o[1] - o[0]))
        return UnivariateBernstein(p * (o[0, 1:] - o[0, :-1]))
    row0 = np.array([o[tri_index(p, 0, j)] for j in range(p + 1)])
    if which == "u":
        row1 = np.array([o[tri_index(p, 1, j)] for j in range(p)])
        return UnivariateBernstein(p * (row1 - row0[:-1]))
    return UnivariateBernstein(p * (row0[1:] - row0[:-1]))


# ----------------------------------------------------------------------
# Hermite / collocation fits
# ----------------------------------------------------------------------

def hermite_fit_univariate(degree, conditions):
    """Solve for Bernstein coefficients matching (t, derivative order, value)
    conditions; the number of conditions must equal degree + 1.

    Dense LU with partial pivoting; raises on repeated nodes (singular system).
    """
    conditions = list(conditions)
    if len(conditions) != degree + 1:
        raise ValueError("degree %d needs %d conditions, got %d"
                         % (degree, degree + 1, len(conditions)))
    A = np.empty((degree + 1, degree + 1))
    rhs = np.empty(degree + 1)
    for r, (t, order, value) in enumerate(conditions):
        A[r] = bernstein_basis_deriv(degree, [t], order)[:, 0]
        rhs[r] = value
    try:
        coeffs = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular Hermite collocation system "
                         "(repeated or invalid nodes?)") from exc
    scale = max(1.0, np.abs(rhs).max(), np.abs(coeffs).max())
    resid = np.abs(A @ coeffs - rhs).max()
    if resid > 1e-8 * scale:
        raise ValueError("Hermite fit residual %.3e exceeds tolerance" % resid)
    return UnivariateBernstein(coeffs)


@lru_cache(maxsize=None)
def hermite_fit_operator(degree, conditions_key):
    """Pre-factored fit: conditions_key is a tuple of (t, order) pairs.

    Returns a solver mapping a value vector to Bernstein coefficients;
    reused across all edges since conditions live in the unit parameter.
    """
    import scipy.linalg

    A = np.empty((degree + 1, degree + 1))
    for r, (t, order) in enumerate(conditions_key):
        A[r] = bernstein_basis_deriv(degree, [t], order)[:, 0]
    lu, piv = scipy.linalg.lu_factor(A)

    def solve(values):
        return scipy.linalg.lu_solve((lu, piv), np.asarray(values, dtype=float))

    return solve
