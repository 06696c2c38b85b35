"""Quadrature on edges, triangles and simple (possibly non-convex) polygons."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import MeshError


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """n-point Gauss-Legendre nodes and weights on [-1, 1]."""
    t, w = np.polynomial.legendre.leggauss(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


@lru_cache(maxsize=None)
def _collapsed_square(d: int):
    # reference triangle (0,0),(1,0),(0,1) via x = u (1 - v), y = v
    n = max(1, math.ceil((d + 1) / 2))
    tu, wu = gauss_legendre(n)
    sv, wv = roots_jacobi(n, 1.0, 0.0)  # weight (1 - s)
    u = 0.5 * (tu + 1.0)
    v = 0.5 * (sv + 1.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ref = np.stack([(uu * (1.0 - vv)).ravel(), vv.ravel()], axis=1)
    w = np.outer(0.5 * wu, 0.25 * wv).ravel()
    ref.setflags(write=False)
    w.setflags(write=False)
    return ref, w


def edge_parameters(d: int):
    """Nodes t in [-1, 1] and reference weights of the degree-``d`` edge rule."""
    return gauss_legendre(max(1, math.ceil((d + 1) / 2)))


def edge_rule(endpoints, d: int) -> QuadRule:
    """Gauss-Legendre rule on the segment ``endpoints[0] -> endpoints[1]``."""
    p = np.asarray(endpoints, dtype=float)
    t, w = edge_parameters(d)
    length = float(np.linalg.norm(p[1] - p[0]))
    pts = p[0] + 0.5 * (t[:, None] + 1.0) * (p[1] - p[0])
    return QuadRule(pts, 0.5 * length * w, d)


def triangle_rule(tri, d: int) -> QuadRule:
    """Duffy-collapsed tensor Gauss rule on a triangle, exact to degree ``d``."""
    a, b, c = np.asarray(tri, dtype=float)
    ref, w = _collapsed_square(d)
    jac = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    pts = a + ref[:, :1] * (b - a) + ref[:, 1:] * (c - a)
    return QuadRule(pts, abs(jac) * w, d)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _inside_or_on(p, a, b, c) -> bool:
    return _cross(a, b, p) >= 0 and _cross(b, c, p) >= 0 and _cross(c, a, p) >= 0


def ear_clip(points) -> list:
    """Triangulate a simple CCW polygon; returns index triples.

    Ears are chosen deterministically: at each step the remaining vertex with
    the smallest local index that forms a valid ear is clipped.
    """
    pts = np.asarray(points, dtype=float)
    remaining = list(range(len(pts)))
    tris = []
    while len(remaining) > 3:
        m = len(remaining)
        for pos in range(m):
            i0, i1, i2 = remaining[pos - 1], remaining[pos], remaining[(pos + 1) % m]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if _cross(a, b, c) <= 0:
                continue
            if any(
                _inside_or_on(pts[j], a, b, c)
                for j in remaining
                if j not in (i0, i1, i2) and not np.array_equal(pts[j], a) and not np.array_equal(pts[j], c)
            ):
                continue
            tris.append((i0, i1, i2))
            remaining.pop(pos)
            break
        else:
            raise MeshError("ear clipping failed: polygon is not simple or not counterclockwise")
    i0, i1, i2 = remaining
    if _cross(pts[i0], pts[i1], pts[i2]) <= 0:
        raise MeshError("degenerate polygon: zero or negative area")
    tris.append((i0, i1, i2))
    return tris


def polygon_rule(element, d: int) -> QuadRule:
    """Rule on a simple polygon by ear clipping plus Duffy rules per triangle.

    ``element`` is an :class:`~sfwg.mesh.Element` or an (N, 2) vertex array in
    counterclockwise order.
    """
    pts = np.asarray(getattr(element, "points", element), dtype=float)
    rules = [triangle_rule(pts[list(t)], d) for t in ear_clip(pts)]
    return QuadRule(
        np.concatenate([r.points for r in rules]),
        np.concatenate([r.weights for r in rules]),
        d,
    )
