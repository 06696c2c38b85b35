"""Polytopal meshes of the unit square.

Two structured families are provided: squares split into two triangles along
the (0,0)-(1,1) diagonal, and squares split into two non-convex pentagons by
the zigzag (0,0) -> (5/6,1/3) -> (1/6,2/3) -> (1,1).  Grid ``G_i`` has
``n = 2**(i-1)`` cells per side.

Every edge carries one global unit normal.  Interior edges use the tangent
from the lower to the higher vertex index rotated by -90 degrees; boundary
edges use the outward normal of the square.  Elements record the sign
``sigma(T, e)`` that turns the global normal into their own outward normal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, MeshError

MIN_LEVEL, MAX_LEVEL = 1, 12
FAMILIES = ("tri", "pent")
FORMAT_TAG = "sfwg-mesh"
FORMAT_VERSION = 1

# zigzag interior points of the unit cell, pentagon family
ZIGZAG = ((5.0, 2.0), (1.0, 4.0))  # in units of 1/6


@dataclass(frozen=True)
class Edge:
    vertices: tuple
    normal: np.ndarray = field(repr=False)
    length: float
    boundary: bool
    elements: tuple


@dataclass(frozen=True)
class Element:
    loop: tuple
    edges: tuple
    signs: tuple
    points: np.ndarray = field(repr=False)
    barycenter: np.ndarray = field(repr=False)
    diameter: float
    area: float
    convex: bool

    @property
    def n_edges(self) -> int:
        return len(self.loop)

    def edge_forward(self, i: int) -> bool:
        """True if local edge ``i`` runs from its lower to its higher vertex index."""
        return self.loop[i] < self.loop[(i + 1) % len(self.loop)]

    def outward_normals(self) -> np.ndarray:
        d = np.roll(self.points, -1, axis=0) - self.points
        n = np.stack([d[:, 1], -d[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1)[:, None]


@dataclass(frozen=True)
class PolytopalMesh:
    vertices: np.ndarray = field(repr=False)
    edges: tuple = field(repr=False)
    elements: tuple = field(repr=False)
    level: int = 0
    family: str = "custom"

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def convex(self) -> bool:
        return all(el.convex for el in self.elements)

    @property
    def h(self) -> float:
        return max(el.diameter for el in self.elements)

    def edge_points(self, e: int) -> np.ndarray:
        i, j = self.edges[e].vertices
        return self.vertices[[i, j]]

    def summary(self) -> str:
        return f"V={self.n_vertices} E={self.n_edges} F={self.n_elements}"

    @classmethod
    def from_polygons(cls, vertices, loops, *, level: int = 0, family: str = "custom") -> "PolytopalMesh":
        """Build topology, normals and orientation signs from CCW vertex loops."""
        verts = np.asarray(vertices, dtype=float)
        incidence: dict = {}
        for t, loop in enumerate(loops):
            for i in range(len(loop)):
                a, b = loop[i], loop[(i + 1) % len(loop)]
                if a == b:
                    raise MeshError(f"element {t} has a repeated vertex {a}")
                incidence.setdefault((min(a, b), max(a, b)), []).append((t, i))

        keys = sorted(incidence)
        edge_index = {key: e for e, key in enumerate(keys)}
        elem_points = [verts[list(loop)] for loop in loops]

        edges = []
        for key in keys:
            refs = incidence[key]
            p0, p1 = verts[key[0]], verts[key[1]]
            tangent = p1 - p0
            length = float(np.hypot(*tangent))
            if length == 0.0:
                raise MeshError(f"edge {key} has zero length")
            tangent = tangent / length
            normal = np.array([tangent[1], -tangent[0]])
            boundary = len(refs) == 1
            if boundary:
                t, i = refs[0]
                if normal @ _outward(elem_points[t], i) < 0:
                    normal = -normal
            edges.append(
                Edge(
                    vertices=key,
                    normal=normal,
                    length=length,
                    boundary=boundary,
                    elements=tuple(sorted(t for t, _ in refs)),
                )
            )

        elements = []
        for t, loop in enumerate(loops):
            pts = elem_points[t]
            n = len(loop)
            eids, signs = [], []
            for i in range(n):
                a, b = loop[i], loop[(i + 1) % n]
                e = edge_index[(min(a, b), max(a, b))]
                eids.append(e)
                signs.append(1 if edges[e].normal @ _outward(pts, i) > 0 else -1)
            area, centroid = _area_centroid(pts)
            elements.append(
                Element(
                    loop=tuple(int(v) for v in loop),
                    edges=tuple(eids),
                    signs=tuple(signs),
                    points=pts,
                    barycenter=centroid,
                    diameter=_diameter(pts),
                    area=area,
                    convex=_is_convex(pts),
                )
            )
        return cls(vertices=verts, edges=tuple(edges), elements=tuple(elements), level=level, family=family)

    def dump(self, path) -> None:
        Path(path).write_text(dumps(self))

    @classmethod
    def load(cls, path) -> "PolytopalMesh":
        return loads(Path(path).read_text())


def _outward(pts: np.ndarray, i: int) -> np.ndarray:
    d = pts[(i + 1) % len(pts)] - pts[i]
    return np.array([d[1], -d[0]])


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _area_centroid(pts: np.ndarray):
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, pts.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def _diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(axis=-1)).max())


def _is_convex(pts: np.ndarray) -> bool:
    d0 = np.roll(pts, -1, axis=0) - pts
    d1 = np.roll(d0, -1, axis=0)
    cross = d0[:, 0] * d1[:, 1] - d0[:, 1] * d1[:, 0]
    scale = (np.linalg.norm(d0, axis=1) * np.linalg.norm(d1, axis=1)).max()
    return bool(np.all(cross >= -1e-12 * scale))


def _check_level(level) -> int:
    if not isinstance(level, (int, np.integer)) or not MIN_LEVEL <= level <= MAX_LEVEL:
        raise ConfigurationError(f"level must be an integer in [{MIN_LEVEL}, {MAX_LEVEL}], got {level!r}")
    return int(level)


def gen_triangular(level: int) -> PolytopalMesh:
    """Uniform grid of squares, each cut along its (0,0)-(1,1) diagonal."""
    level = _check_level(level)
    n = 2 ** (level - 1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[i, j]: vertex (i/n, j/n)
    coords = np.array([(i / n, j / n) for i in range(n + 1) for j in range(n + 1)])
    loops = []
    for j in range(n):
        for i in range(n):
            v00, v10, v11, v01 = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            loops.append((v00, v10, v11))
            loops.append((v00, v11, v01))
    return PolytopalMesh.from_polygons(coords, loops, level=level, family="tri")


def gen_pentagonal(level: int) -> PolytopalMesh:
    """Uniform grid of squares, each cut into two non-convex pentagons by a zigzag."""
    level = _check_level(level)
    n = 2 ** (level - 1)
    m = 6 * n
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    coords = [(6 * i / m, 6 * j / m) for i in range(n + 1) for j in range(n + 1)]
    loops = []
    (pa, pb), (qa, qb) = ZIGZAG
    for j in range(n):
        for i in range(n):
            p = len(coords)
            coords.append(((6 * i + pa) / m, (6 * j + pb) / m))
            coords.append(((6 * i + qa) / m, (6 * j + qb) / m))
            q = p + 1
            v00, v10, v11, v01 = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            loops.append((v00, v10, v11, q, p))
            loops.append((v00, p, q, v11, v01))
    return PolytopalMesh.from_polygons(np.array(coords), loops, level=level, family="pent")


def generate(family: str, level: int) -> PolytopalMesh:
    if family == "tri":
        return gen_triangular(level)
    if family == "pent":
        return gen_pentagonal(level)
    raise ConfigurationError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str
    detail: str = ""

    def __str__(self):
        return f"{self.entity}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


def validate(mesh: PolytopalMesh, tol: float = 1e-12) -> list:
    """Check the mesh invariants; returns a list of :class:`Violation`."""
    out = []
    V, E, F = mesh.n_vertices, mesh.n_edges, mesh.n_elements
    if V - E + F + 1 != 2:
        out.append(Violation("mesh", "euler formula", f"V-E+F = {V - E + F + 1}"))

    refs: dict = {}
    for t, el in enumerate(mesh.elements):
        name = f"element {t}"
        if _signed_area(el.points) <= 0:
            out.append(Violation(name, "element orientation", "vertex loop is not counterclockwise"))
        if not np.allclose(el.points, mesh.vertices[list(el.loop)], rtol=0, atol=tol):
            out.append(Violation(name, "vertex coordinates"))
        if abs(el.diameter - _diameter(el.points)) > tol * max(1.0, el.diameter):
            out.append(Violation(name, "diameter"))
        if len(el.edges) != len(el.loop) or len(el.signs) != len(el.loop):
            out.append(Violation(name, "edge count"))
            continue
        outward = el.outward_normals()
        for i, (e, s) in enumerate(zip(el.edges, el.signs)):
            a, b = el.loop[i], el.loop[(i + 1) % len(el.loop)]
            if not 0 <= e < E or mesh.edges[e].vertices != (min(a, b), max(a, b)):
                out.append(Violation(name, "edge reference", f"local edge {i}"))
                continue
            refs.setdefault(e, []).append((t, s))
            if s * mesh.edges[e].normal @ outward[i] <= 0:
                out.append(Violation(name, "normal orientation sign", f"edge {e}"))
            if t not in mesh.edges[e].elements:
                out.append(Violation(name, "incidence involution", f"edge {e} does not list element"))

    for e, edge in enumerate(mesh.edges):
        name = f"edge {e}"
        i, j = edge.vertices
        if i >= j:
            out.append(Violation(name, "endpoint order"))
        tangent = mesh.vertices[j] - mesh.vertices[i]
        if abs(np.linalg.norm(edge.normal) - 1.0) > tol:
            out.append(Violation(name, "unit normal"))
        if abs(edge.normal @ tangent) > tol * max(1.0, edge.length):
            out.append(Violation(name, "normal orthogonality"))
        if abs(np.linalg.norm(tangent) - edge.length) > tol:
            out.append(Violation(name, "edge length"))
        r = refs.get(e, [])
        want = 1 if edge.boundary else 2
        if len(r) != want:
            out.append(Violation(name, "edge incidence", f"{len(r)} references, expected {want}"))
        if sorted(t for t, _ in r) != sorted(edge.elements):
            out.append(Violation(name, "incidence involution", "adjacency list mismatch"))
        if not edge.boundary and len(r) == 2 and r[0][1] + r[1][1] != 0:
            out.append(Violation(name, "normal orientation consistency", "sigma signs do not cancel"))
        if edge.boundary and r and r[0][1] != 1:
            out.append(Violation(name, "boundary normal outward"))
    return out


def dumps(mesh: PolytopalMesh) -> str:
    """Serialize to the versioned plain-text mesh document."""
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}", f"family {mesh.family}", f"level {mesh.level}"]
    lines.append(f"vertices {mesh.n_vertices}")
    for i, (x, y) in enumerate(mesh.vertices):
        lines.append(f"{i} {x:.17g} {y:.17g}")
    lines.append(f"edges {mesh.n_edges}")
    for i, e in enumerate(mesh.edges):
        lines.append(f"{i} {e.vertices[0]} {e.vertices[1]} {int(e.boundary)}")
    lines.append(f"elements {mesh.n_elements}")
    for i, el in enumerate(mesh.elements):
        lines.append(f"{i} " + " ".join(str(v) for v in el.loop))
    return "\n".join(lines) + "\n"


def loads(text: str) -> PolytopalMesh:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        it = iter(lines)
        tag = next(it)
        if tag[0] != FORMAT_TAG or int(tag[1]) != FORMAT_VERSION:
            raise MeshError(f"unsupported mesh document header {' '.join(tag)!r}")
        family = next(it)[1]
        level = int(next(it)[1])
        nv = int(next(it)[1])
        verts = np.array([[float(t[1]), float(t[2])] for t in itertools.islice(it, nv)])
        ne = int(next(it)[1])
        listed = [(int(t[1]), int(t[2]), bool(int(t[3]))) for t in itertools.islice(it, ne)]
        nt = int(next(it)[1])
        loops = [tuple(int(v) for v in t[1:]) for t in itertools.islice(it, nt)]
    except (StopIteration, IndexError, ValueError) as exc:
        raise MeshError(f"malformed mesh document: {exc}") from exc
    mesh = PolytopalMesh.from_polygons(verts, loops, level=level, family=family)
    rebuilt = [(e.vertices[0], e.vertices[1], e.boundary) for e in mesh.edges]
    if rebuilt != listed:
        raise MeshError("edge section does not match the element loops")
    return mesh
