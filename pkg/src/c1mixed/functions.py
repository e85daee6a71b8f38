"""Test functions with analytic derivatives, addressable by id from the CLI."""

import numpy as np


class AnalyticFunction:
    """Oracle bundle: vectorized value/gradient/hessian (+ optional
    laplacian and bilaplacian for PDE right-hand sides)."""

    def __init__(self, name, value, gradient, hessian,
                 laplacian=None, bilaplacian=None):
        self.name = name
        self.value = value
        self.gradient = gradient
        self.hessian = hessian
        self.laplacian = laplacian
        self.bilaplacian = bilaplacian


class Poly2D:
    """Bivariate polynomial with exact coefficient-level calculus."""

    def __init__(self, coeffs):
        # coeffs: {(i, j): a_ij} for a_ij x^i y^j
        self.coeffs = {k: float(v) for k, v in coeffs.items() if v != 0.0}

    def degree(self):
        return max((i + j for i, j in self.coeffs), default=0)

    def value(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        x, y = pts[:, 0], pts[:, 1]
        out = np.zeros(len(pts))
        for (i, j), a in self.coeffs.items():
            out += a * x**i * y**j
        return out

    def diff(self, wx, wy=0):
        c = dict(self.coeffs)
        for _ in range(wx):
            c = {(i - 1, j): a * i for (i, j), a in c.items() if i}
        for _ in range(wy):
            c = {(i, j - 1): a * j for (i, j), a in c.items() if j}
        return Poly2D(c)

    def gradient(self, pts):
        return np.stack([self.diff(1, 0).value(pts),
                         self.diff(0, 1).value(pts)], axis=1)

    def hessian(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.empty((len(pts), 2, 2))
        out[:, 0, 0] = self.diff(2, 0).value(pts)
        out[:, 0, 1] = out[:, 1, 0] = self.diff(1, 1).value(pts)
        out[:, 1, 1] = self.diff(0, 2).value(pts)
        return out

    def laplacian(self, pts):
        return self.diff(2, 0).value(pts) + self.diff(0, 2).value(pts)

    def bilaplacian(self, pts):
        return (self.diff(4, 0).value(pts) + 2 * self.diff(2, 2).value(pts)
                + self.diff(0, 4).value(pts))

    def as_function(self, name="poly"):
        return AnalyticFunction(name, self.value, self.gradient, self.hessian,
                                self.laplacian, self.bilaplacian)


def random_polynomial(degree, rng, scale=1.0):
    coeffs = {(i, j): scale * rng.standard_normal()
              for i in range(degree + 1) for j in range(degree + 1 - i)}
    return Poly2D(coeffs)


def paper_function():
    """f(x, y) = 4 cos(2x/3) sin(2y/3)."""
    a = 2.0 / 3.0

    def value(pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return 4.0 * np.cos(a * pts[:, 0]) * np.sin(a * pts[:, 1])

    def gradient(pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([-4 * a * np.sin(a * x) * np.sin(a * y),
                         4 * a * np.cos(a * x) * np.cos(a * y)], axis=1)

    def hessian(pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        x, y = pts[:, 0], pts[:, 1]
        out = np.empty((len(pts), 2, 2))
        out[:, 0, 0] = -4 * a**2 * np.cos(a * x) * np.sin(a * y)
        out[:, 0, 1] = out[:, 1, 0] = -4 * a**2 * np.sin(a * x) * np.cos(a * y)
        out[:, 1, 1] = -4 * a**2 * np.cos(a * x) * np.sin(a * y)
        return out

    def laplacian(pts):
        return -2 * a**2 * value(pts)

    def bilaplacian(pts):
        return 4 * a**4 * value(pts)

    return AnalyticFunction("paper", value, gradient, hessian,
                            laplacian, bilaplacian)


_FIXED_QUINTIC = Poly2D({
    (5, 0): 0.3, (4, 1): -0.7, (3, 2): 0.45, (2, 3): 0.6, (1, 4): -0.25,
    (0, 5): 0.35, (4, 0): -0.2, (2, 2): 0.5, (0, 4): -0.4, (3, 0): 0.1,
    (1, 2): -0.3, (2, 0): 0.25, (1, 1): 0.6, (0, 2): -0.15, (1, 0): 0.4,
    (0, 1): -0.5, (0, 0): 1.2,
})


def get_function(fid):
    """Resolve a test-function id used by the CLI and studies."""
    if fid == "paper":
        return paper_function()
    if fid == "poly5":
        return _FIXED_QUINTIC.as_function("poly5")
    if fid == "quadratic":
        return Poly2D({(2, 0): 1.0, (0, 2): 1.0}).as_function("quadratic")
    if fid == "linear":
        return Poly2D({(1, 0): 1.0}).as_function("linear")
    raise KeyError("unknown test function id %r (try: paper, poly5, "
                   "quadratic, linear)" % fid)
