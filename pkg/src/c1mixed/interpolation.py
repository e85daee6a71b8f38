"""Hermite interpolation into the spline space: point sets and projectors.

The projector samples C2 data at vertices, values at the p-5 edge points,
normal derivatives at the p-4 edge points and values on the interior grids,
then assembles the unique matching space member element by element.
"""

import logging

import numpy as np

from .geometry import perp
from .space import (HermiteData, SplineFunction, edge_parameters, frames,
                    interior_grid, interpolate_data)

logger = logging.getLogger(__name__)


def interpolation_points(mesh, p):
    """Physical interpolation points: per-edge R (values) and S (normal
    derivatives, with unit normals), per-element interior Q."""
    r_t, s_t = edge_parameters(p)
    R, S, normals = [], [], []
    for edge in mesh.edges:
        a = mesh.vertices[edge.vertices[0]]
        b = mesh.vertices[edge.vertices[1]]
        R.append(a + np.outer(r_t, b - a))
        S.append(a + np.outer(s_t, b - a))
        n = perp(b - a)
        normals.append(n / np.linalg.norm(n))
    fr = frames(mesh, p)
    Q = [fr.maps[i](interior_grid(mesh.elements[i].kind, p))
         for i in range(len(mesh.elements))]
    return {"R": R, "S": S, "Q": Q, "normals": normals}


class FiniteDifferenceOracle:
    """Reduced-accuracy oracle deriving gradients and Hessians from values.

    Central differences with step 1e-5 * diam; use analytic callbacks
    whenever they are available.
    """

    def __init__(self, value, diameter=1.0, step_scale=1e-5):
        self.value = value
        self.h = step_scale * diameter
        logger.warning("finite-difference oracle in use; projector accuracy "
                       "is limited to roughly the difference step")

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        h = self.h
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        gx = (self.value(pts + ex) - self.value(pts - ex)) / (2 * h)
        gy = (self.value(pts + ey) - self.value(pts - ey)) / (2 * h)
        return np.stack([gx, gy], axis=1)

    def hessian(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        h = self.h
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        f0 = self.value(pts)
        out = np.empty((len(pts), 2, 2))
        out[:, 0, 0] = (self.value(pts + ex) - 2 * f0 + self.value(pts - ex)) / h**2
        out[:, 1, 1] = (self.value(pts + ey) - 2 * f0 + self.value(pts - ey)) / h**2
        mixed = (self.value(pts + ex + ey) - self.value(pts + ex - ey)
                 - self.value(pts - ex + ey) + self.value(pts - ex - ey)) / (4 * h**2)
        out[:, 0, 1] = out[:, 1, 0] = mixed
        return out


class _SplineOracle:
    """Samples an existing spline exactly through reference preimages."""

    def __init__(self, spline):
        self.spline = spline
        self.fr = frames(spline.mesh, spline.p)

    def vertex_jet(self, v):
        mesh = self.spline.mesh
        elem = mesh.vertex_elements[v][0]
        el = mesh.elements[elem]
        local = el.vertices.index(v)
        ref = {("triangle", 0): (0, 0), ("triangle", 1): (1, 0),
               ("triangle", 2): (0, 1), ("quad", 0): (0, 0),
               ("quad", 1): (1, 0), ("quad", 2): (1, 1),
               ("quad", 3): (0, 1)}[(el.kind, local)]
        jet = self.spline.jet_on(elem, [ref], order=2)
        return jet["value"][0], jet["gradient"][0], jet["hessian"][0]

    def edge_jet(self, eid, ts):
        mesh = self.spline.mesh
        elem = mesh.edges[eid].elements[0]
        side = self.fr.sides[(eid, elem)]
        ref = side.remap.to_std_point(np.stack([np.zeros_like(ts), ts], axis=1))
        jet = self.spline.jet_on(elem, ref, order=1)
        return jet["value"], jet["gradient"]

    def interior_values(self, elem):
        grid = interior_grid(self.spline.mesh.elements[elem].kind, self.spline.p)
        return self.spline.value_on(elem, grid)


def collect_data(f, mesh, p, elements=None):
    """Sample the interpolation data (conditions A-D) from f.

    f is either an analytic oracle with vectorized value/gradient/hessian
    callables at physical points, or an existing SplineFunction (sampled
    exactly via reference preimages).
    """
    data = HermiteData(mesh, p)
    if elements is None:
        elements = range(len(mesh.elements))
    vertices = sorted({v for el in elements
                       for v in mesh.elements[el].vertices})
    edges = sorted({e for el in elements for e in mesh.elements[el].edges})
    r_t, s_t = edge_parameters(p)
    if isinstance(f, SplineFunction):
        oracle = _SplineOracle(f)
        for v in vertices:
            val, grad, hess = oracle.vertex_jet(v)
            data.vertex[v] = [val, grad[0], grad[1],
                              hess[0, 0], hess[0, 1], hess[1, 1]]
        for eid in edges:
            a = mesh.vertices[mesh.edges[eid].vertices[0]]
            b = mesh.vertices[mesh.edges[eid].vertices[1]]
            n = perp(b - a) / np.linalg.norm(b - a)
            if len(r_t):
                vals, _ = oracle.edge_jet(eid, r_t)
                data.edge_r[eid] = vals
            _, grads = oracle.edge_jet(eid, s_t)
            data.edge_s[eid] = grads @ n
        for elem in elements:
            data.interior[elem] = oracle.interior_values(elem)
        return data
    pts = mesh.vertices[vertices]
    vals = f.value(pts)
    grads = f.gradient(pts)
    hess = f.hessian(pts)
    for k, v in enumerate(vertices):
        data.vertex[v] = [vals[k], grads[k, 0], grads[k, 1],
                          hess[k, 0, 0], hess[k, 0, 1], hess[k, 1, 1]]
    for eid in edges:
        a = mesh.vertices[mesh.edges[eid].vertices[0]]
        b = mesh.vertices[mesh.edges[eid].vertices[1]]
        n = perp(b - a) / np.linalg.norm(b - a)
        if len(r_t):
            data.edge_r[eid] = f.value(a + np.outer(r_t, b - a))
        data.edge_s[eid] = f.gradient(a + np.outer(s_t, b - a)) @ n
    fr = frames(mesh, p)
    for elem in elements:
        grid = interior_grid(mesh.elements[elem].kind, p)
        if len(grid):
            data.interior[elem] = f.value(fr.maps[elem](grid))
    return data


def project(f, mesh, p):
    """Global projector: the unique space member interpolating f's data."""
    data = collect_data(f, mesh, p)
    return interpolate_data(mesh, p, data)


def local_project(f, mesh, elem, p):
    """Local projector: the element patch from that element's own data."""
    data = collect_data(f, mesh, p, elements=[elem])
    spline = interpolate_data(mesh, p, data, elements=[elem])
    return spline.patches[elem]
