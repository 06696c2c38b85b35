"""Element-level weak operators.

For each element we build an L2(T)-orthonormal basis of P_R(T) (R the
largest degree needed) by an Arnoldi recurrence with two-pass Gram-Schmidt
under the element quadrature rule.  Because the functions are generated in
total-degree order, the first ``dim P_r`` basis functions span P_r(T) for
every r <= R, so one basis serves v0, E_w and grad_w at once.

The weak elliptic operator is lifted from the moment identity

    (E_w v, phi)_T = (E v0, phi)_T + <v0 - vb, kappa grad(phi).n>_dT
                     - <kappa grad(v0).n - vg, phi>_dT,

and the weak gradient from

    (grad_w v, psi)_T = (grad v0, psi)_T - <v0 - vb, psi.n>_dT.

With orthonormal test bases the mass matrices are identities, so the right
hand sides *are* the coefficient matrices.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import legendre

from .dofs import LocalDofLayout, WeakField, build_dofmap, dim_poly
from .errors import ConfigurationError
from .poly import KappaMatrix, Poly2
from .quadrature import QuadRule, edge_parameters, polygon_rule


def monomial_exponents(r: int) -> list:
    """Exponents (a, b) of P_r in total-degree order."""
    return [(s - b, b) for s in range(r + 1) for b in range(s + 1)]


_ORDERS = {0: ((0, 0),), 1: ((0, 0), (1, 0), (0, 1)), 2: ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))}


class OrthoBasis:
    """Orthonormal basis of P_degree(T) generated by an Arnoldi recurrence.

    Basis function ``j`` (exponent ``(a, b)`` in total-degree order) is
    ``xh * q_parent`` (or ``yh * q_parent``) with ``parent`` the function of
    exponent ``(a-1, b)`` (or ``(a, b-1)``), orthogonalized against all earlier
    functions under the element rule and normalized; ``xh, yh`` are the
    coordinates about the barycenter scaled by the diameter.  Values and
    derivatives anywhere are obtained by replaying the recurrence, which stays
    accurate at degrees where monomial coefficients would lose most digits.
    """

    def __init__(self, center, h: float, degree: int, parents, axes, H: np.ndarray, norms: np.ndarray):
        self.center = np.asarray(center, dtype=float)
        self.h = float(h)
        self.degree = degree
        self.parents = tuple(parents)
        self.axes = tuple(axes)
        self.H = H
        self.norms = norms

    @classmethod
    def build(cls, element, degree: int, rule: QuadRule) -> "OrthoBasis":
        center, h = element.barycenter, element.diameter
        exps = monomial_exponents(degree)
        index = {e: i for i, e in enumerate(exps)}
        parents, axes = [-1], [-1]
        for a, b in exps[1:]:
            if a > 0:
                parents.append(index[(a - 1, b)])
                axes.append(0)
            else:
                parents.append(index[(a, b - 1)])
                axes.append(1)
        n = len(exps)
        xh = (rule.points - center) / h
        sw = np.sqrt(rule.weights)
        Q = np.zeros((len(sw), n))
        H = np.zeros((n, n))
        norms = np.zeros(n)
        norms[0] = np.linalg.norm(sw)
        Q[:, 0] = sw / norms[0]
        for j in range(1, n):
            v = xh[:, axes[j]] * Q[:, parents[j]]
            # classical Gram-Schmidt with one reorthogonalization pass
            for _ in range(2):
                r = Q[:, :j].T @ v
                v -= Q[:, :j] @ r
                H[:j, j] += r
            norms[j] = np.linalg.norm(v)
            Q[:, j] = v / norms[j]
        return cls(center, h, degree, parents, axes, H, norms)

    def dim(self, r: Optional[int] = None) -> int:
        return dim_poly(self.degree if r is None else r)

    def _evaluate(self, points, n: int, max_order: int) -> dict:
        p = np.asarray(points, dtype=float)
        xh = (p - self.center) / self.h
        keys = _ORDERS[max_order]
        V = {key: np.zeros((len(p), n)) for key in keys}
        V[0, 0][:, 0] = 1.0 / self.norms[0]
        for j in range(1, n):
            par, ax = self.parents[j], self.axes[j]
            t = xh[:, ax]
            hj = self.H[:j, j]
            for key in keys:
                val = t * V[key][:, par]
                d = key[ax]
                if d:
                    # product rule with d(xh)/dx = 1/h
                    lower = (key[0] - 1, key[1]) if ax == 0 else (key[0], key[1] - 1)
                    val += (d / self.h) * V[lower][:, par]
                V[key][:, j] = (val - V[key][:, :j] @ hj) / self.norms[j]
        return V

    def tabulate(self, points, orders=((0, 0),)) -> dict:
        """Full-degree basis values for each derivative order (dx, dy)."""
        V = self._evaluate(points, self.dim(), max(sum(o) for o in orders))
        return {o: V[o] for o in orders}

    def values(self, points, r: Optional[int] = None, dx: int = 0, dy: int = 0) -> np.ndarray:
        return self._evaluate(points, self.dim(r), dx + dy)[dx, dy]

    def gradient(self, points, r: Optional[int] = None) -> np.ndarray:
        """Gradient values with shape (npoints, nbasis, 2)."""
        V = self._evaluate(points, self.dim(r), 1)
        return np.stack([V[1, 0], V[0, 1]], axis=-1)

    def elliptic(self, points, kappa: KappaMatrix, r: Optional[int] = None) -> np.ndarray:
        V = self._evaluate(points, self.dim(r), 2)
        return kappa.a * V[2, 0] + 2.0 * kappa.b * V[1, 1] + kappa.c * V[0, 2]

    def as_poly(self, coeffs) -> Poly2:
        """Polynomial in global coordinates with the given basis coefficients."""
        c = np.asarray(coeffs, dtype=float)
        xh = [(Poly2.x() - self.center[0]) * (1.0 / self.h), (Poly2.y() - self.center[1]) * (1.0 / self.h)]
        q = [Poly2.constant(1.0 / self.norms[0])]
        for j in range(1, c.size):
            p = xh[self.axes[j]] * q[self.parents[j]]
            for i in range(j):
                p = p - self.H[i, j] * q[i]
            q.append(p * (1.0 / self.norms[j]))
        out = Poly2()
        for v, qj in zip(c, q):
            out = out + float(v) * qj
        return out


def edge_basis(t, n: int, length: float) -> np.ndarray:
    """L2(e)-orthonormal Legendre basis of P_{n-1}(e) at parameters t in [-1, 1]."""
    if n == 0:
        return np.zeros((len(t), 0))
    V = legendre.legvander(np.asarray(t, dtype=float), n - 1)
    return V * np.sqrt((2.0 * np.arange(n) + 1.0) / length)


@dataclass(frozen=True)
class EdgeContext:
    index: int
    sign: int
    length: float
    normal: np.ndarray  # outward for the element
    rule: QuadRule
    t: np.ndarray  # parameters along the global edge direction
    trace_basis: np.ndarray
    flux_basis: np.ndarray


def default_degrees(element, k: int):
    """Default lifting degrees ``(r1, r2) = (k + 4, k + 5)``, independent of the element.

    On triangles this is ``2N + k - 2``.  It gives optimal orders in all three
    error norms on both mesh families; see :data:`DEGREE_RULES` for the
    N-dependent alternatives.
    """
    return k + 4, k + 5


def bubble_degrees(element, k: int):
    """``r1 = N + k - 2`` on convex and ``2N + k - 2`` on non-convex N-gons, ``r2 = r1 + 1``."""
    n = element.n_edges
    r1 = n + k - 2 if element.convex else 2 * n + k - 2
    return r1, r1 + 1


def safe_degrees(element, k: int):
    """``r1 = 2N + k - 2`` and ``r2 = r1 + 1`` on every N-gon."""
    r1 = 2 * element.n_edges + k - 2
    return r1, r1 + 1


DEGREE_RULES = {"uniform": default_degrees, "bubble": bubble_degrees, "safe": safe_degrees}


class ElementContext:
    """Geometry, quadrature and orthonormal basis of one element."""

    def __init__(self, element, k: int, r1: int, r2: int):
        if k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k}")
        if r1 < max(k - 2, 0) or r2 < k - 1:
            raise ConfigurationError(f"lifting degrees r1={r1}, r2={r2} too small for k={k}")
        self.element = element
        self.k, self.r1, self.r2 = k, r1, r2
        self.layout = LocalDofLayout(k, element.n_edges)
        self.rmax = max(k, r1, r2)
        self.qdeg = 2 * self.rmax + 2
        self.rule = polygon_rule(element, self.qdeg)
        self.basis = OrthoBasis.build(element, self.rmax, self.rule)
        self._rules = {self.qdeg: self.rule}

        t, w = edge_parameters(self.qdeg)
        outward = element.outward_normals()
        pts = element.points
        n = element.n_edges
        self.edges = []
        for i in range(n):
            p0, p1 = pts[i], pts[(i + 1) % n]
            if not element.edge_forward(i):
                p0, p1 = p1, p0
            length = float(np.linalg.norm(p1 - p0))
            qp = p0 + 0.5 * (t[:, None] + 1.0) * (p1 - p0)
            self.edges.append(
                EdgeContext(
                    index=element.edges[i],
                    sign=element.signs[i],
                    length=length,
                    normal=outward[i],
                    rule=QuadRule(qp, 0.5 * length * w, self.qdeg),
                    t=t,
                    trace_basis=edge_basis(t, k + 1, length),
                    flux_basis=edge_basis(t, k, length),
                )
            )

    def tabulate(self):
        """Basis values and derivatives at the element and edge quadrature points."""
        el = self.basis.tabulate(self.rule.points, ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)))
        edges = [self.basis.tabulate(ec.rule.points, ((0, 0), (1, 0), (0, 1))) for ec in self.edges]
        return el, edges

    def rule_for(self, degree: int) -> QuadRule:
        """Element rule exact to at least ``degree`` (reuses the default when possible)."""
        if degree <= self.qdeg:
            return self.rule
        if degree not in self._rules:
            self._rules[degree] = polygon_rule(self.element, degree)
        return self._rules[degree]


@dataclass(frozen=True)
class LiftingTables:
    C_E: np.ndarray
    C_G: np.ndarray
    r1: int
    r2: int


def _require(ctx: ElementContext, degree: int):
    if ctx.qdeg < degree:
        raise ConfigurationError(f"quadrature degree {ctx.qdeg} cannot integrate degree {degree} exactly")


def weak_elliptic_lift(ctx: ElementContext, kappa: KappaMatrix, r1: Optional[int] = None, tabs=None) -> np.ndarray:
    """Matrix mapping local weak DOFs to coefficients of E_w v in the orthonormal P_r1 basis."""
    r1 = ctx.r1 if r1 is None else r1
    k, lay, basis = ctx.k, ctx.layout, ctx.basis
    if r1 > basis.degree:
        raise ConfigurationError(f"r1={r1} exceeds the basis degree {basis.degree}")
    _require(ctx, r1 + k)
    tab_el, tab_edges = tabs or ctx.tabulate()
    K = kappa.as_array()
    n1, nk = dim_poly(r1), lay.n_interior
    C = np.zeros((n1, lay.size))

    w = ctx.rule.weights
    phi = tab_el[0, 0][:, :n1]
    e_v = kappa.a * tab_el[2, 0][:, :nk] + 2.0 * kappa.b * tab_el[1, 1][:, :nk] + kappa.c * tab_el[0, 2][:, :nk]
    C[:, lay.interior()] = phi.T @ (w[:, None] * e_v)

    for i, (ec, tab) in enumerate(zip(ctx.edges, tab_edges)):
        we = ec.rule.weights[:, None]
        kn = K @ ec.normal
        val, flux = tab[0, 0], kn[0] * tab[1, 0] + kn[1] * tab[0, 1]
        phi_e, flux_phi = val[:, :n1], flux[:, :n1]
        C[:, lay.interior()] += flux_phi.T @ (we * val[:, :nk]) - phi_e.T @ (we * flux[:, :nk])
        C[:, lay.trace(i)] = -flux_phi.T @ (we * ec.trace_basis)
        C[:, lay.flux(i)] = ec.sign * (phi_e.T @ (we * ec.flux_basis))
    return C


def weak_gradient_lift(ctx: ElementContext, r2: Optional[int] = None, tabs=None) -> np.ndarray:
    """Matrix mapping local weak DOFs to coefficients of grad_w v in [P_r2]^2.

    Rows are ordered x-component block first, then y-component block.
    """
    r2 = ctx.r2 if r2 is None else r2
    k, lay, basis = ctx.k, ctx.layout, ctx.basis
    if r2 > basis.degree:
        raise ConfigurationError(f"r2={r2} exceeds the basis degree {basis.degree}")
    _require(ctx, r2 + k)
    tab_el, tab_edges = tabs or ctx.tabulate()
    n2, nk = dim_poly(r2), lay.n_interior
    C = np.zeros((2 * n2, lay.size))

    w = ctx.rule.weights[:, None]
    psi = tab_el[0, 0][:, :n2]
    for c, order in enumerate(((1, 0), (0, 1))):
        C[c * n2 : (c + 1) * n2, lay.interior()] = psi.T @ (w * tab_el[order][:, :nk])

    for i, (ec, tab) in enumerate(zip(ctx.edges, tab_edges)):
        psi_e, v_e = tab[0, 0][:, :n2], tab[0, 0][:, :nk]
        for c in range(2):
            rows = slice(c * n2, (c + 1) * n2)
            wn = (ec.rule.weights * ec.normal[c])[:, None]
            C[rows, lay.interior()] -= psi_e.T @ (wn * v_e)
            C[rows, lay.trace(i)] = psi_e.T @ (wn * ec.trace_basis)
    return C


def build_tables(ctx: ElementContext, kappa: KappaMatrix) -> LiftingTables:
    tabs = ctx.tabulate()
    return LiftingTables(weak_elliptic_lift(ctx, kappa, tabs=tabs), weak_gradient_lift(ctx, tabs=tabs), ctx.r1, ctx.r2)


def kappa_gram(tables: LiftingTables, kappa: KappaMatrix) -> np.ndarray:
    """C_G^T (kappa x I) C_G: the kappa-weighted weak-gradient Gram matrix."""
    n2 = tables.C_G.shape[0] // 2
    gx, gy = tables.C_G[:n2], tables.C_G[n2:]
    cross = gx.T @ gy
    return kappa.a * (gx.T @ gx) + kappa.b * (cross + cross.T) + kappa.c * (gy.T @ gy)


def local_stiffness(tables: LiftingTables, layout: LocalDofLayout, kappa: KappaMatrix, mu: float) -> np.ndarray:
    """Element matrix of (E_w u, E_w v) + 2 mu (kappa grad_w u, grad_w v) + mu^2 (u0, v0)."""
    K = tables.C_E.T @ tables.C_E
    if mu != 0.0:
        K = K + 2.0 * mu * kappa_gram(tables, kappa)
        idx = np.arange(layout.n_interior)
        K[idx, idx] += mu * mu
    return 0.5 * (K + K.T)


class WGSpace:
    """Weak Galerkin space on a mesh with per-element contexts and lifting tables.

    ``degrees`` names the per-element rule in :data:`DEGREE_RULES`; ``r1``/``r2``
    override it on every element.  An overridden ``r1`` without ``r2`` uses
    ``r2 = r1 + 1``.
    Element work runs on ``threads`` worker threads; results are collected in
    element order, so the outcome does not depend on the thread count.
    """

    def __init__(self, mesh, k: int, kappa, r1: Optional[int] = None, r2: Optional[int] = None, threads: Optional[int] = None, degrees: str = "uniform"):
        if k < 2:
            raise ConfigurationError(f"k must be >= 2, got {k}")
        if r1 is not None and r1 < k:
            raise ConfigurationError(f"r1 must be >= k={k}, got {r1}")
        if r2 is not None and r2 < k - 1:
            raise ConfigurationError(f"r2 must be >= k-1={k - 1}, got {r2}")
        if degrees not in DEGREE_RULES:
            raise ConfigurationError(f"unknown degree rule {degrees!r}; expected one of {sorted(DEGREE_RULES)}")
        rule = DEGREE_RULES[degrees]
        self.mesh = mesh
        self.k = k
        self.degrees = degrees
        self.kappas = [kappa if isinstance(kappa, KappaMatrix) else kappa[t] for t in range(mesh.n_elements)]
        self.dofmap = build_dofmap(mesh, k)
        self.threads = threads

        def work(t):
            el = mesh.elements[t]
            d1, d2 = rule(el, k)
            a = d1 if r1 is None else r1
            b = (d2 if r1 is None else a + 1) if r2 is None else r2
            ctx = ElementContext(el, k, a, b)
            return ctx, build_tables(ctx, self.kappas[t])

        out = parallel_map(work, range(mesh.n_elements), threads)
        self.contexts = [c for c, _ in out]
        self.tables = [tb for _, tb in out]

    def degrees_used(self) -> list:
        """Sorted distinct (n_edges, convex, r1, r2) tuples over the elements."""
        return sorted({(c.element.n_edges, c.element.convex, c.r1, c.r2) for c in self.contexts})

    def local(self, field: WeakField, t: int) -> np.ndarray:
        return field.local(t, self.mesh.elements[t])


def parallel_map(fn, items, threads: Optional[int] = None) -> list:
    items = list(items)
    if threads is not None and threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def project_Qh(u, space: WGSpace, grad=None) -> WeakField:
    """L2 projection Q_h u = {Q0 u, Qb u, Qg(kappa grad u . n_e)} onto the space.

    ``u`` is a :class:`Poly2`, or a callable ``u(x, y)`` together with ``grad``
    returning an (npoints, 2) array.  Edge fluxes use the kappa of the first
    element adjacent to the edge.
    """
    mesh, dm, k = space.mesh, space.dofmap, space.k
    if isinstance(u, Poly2):
        data_degree = max(u.degree, 0)
        ux, uy = u.diff("x"), u.diff("y")

        def grad(x, y):
            return np.stack([ux(x, y), uy(x, y)], axis=-1)
    else:
        if grad is None:
            raise ValueError("a gradient callable is required for non-polynomial u")
        data_degree = None

    vals = np.zeros(dm.total)
    for t, ctx in enumerate(space.contexts):
        rule = ctx.rule if data_degree is None else ctx.rule_for(data_degree + k)
        phi = ctx.basis.values(rule.points, k)
        vals[dm.interior_dofs(t)] = phi.T @ (rule.weights * u(rule.points[:, 0], rule.points[:, 1]))

    deg = 2 * k + 8 if data_degree is None else data_degree + k
    t_nodes, w_ref = edge_parameters(deg)
    for e, edge in enumerate(mesh.edges):
        p0, p1 = mesh.edge_points(e)
        q = p0 + 0.5 * (t_nodes[:, None] + 1.0) * (p1 - p0)
        w = 0.5 * edge.length * w_ref
        Kn = space.kappas[edge.elements[0]].as_array() @ edge.normal
        vals[dm.trace_dofs(e)] = edge_basis(t_nodes, k + 1, edge.length).T @ (w * u(q[:, 0], q[:, 1]))
        vals[dm.flux_dofs(e)] = edge_basis(t_nodes, k, edge.length).T @ (w * (grad(q[:, 0], q[:, 1]) @ Kn))
    return WeakField(vals, dm)


def exact_trace_local(ctx: ElementContext, p: Poly2, kappa: KappaMatrix) -> np.ndarray:
    """Local DOF vector of p in P_k with exact traces: vb = p|e, vg = sigma kappa grad p . n_e."""
    lay, k = ctx.layout, ctx.k
    v = np.zeros(lay.size)
    rule = ctx.rule_for(max(p.degree, 0) + k)
    v[lay.interior()] = ctx.basis.values(rule.points, k).T @ (rule.weights * p(rule.points[:, 0], rule.points[:, 1]))
    K = kappa.as_array()
    for i, ec in enumerate(ctx.edges):
        q, w = ec.rule.points, ec.rule.weights
        global_normal = ec.sign * ec.normal
        v[lay.trace(i)] = ec.trace_basis.T @ (w * p(q[:, 0], q[:, 1]))
        v[lay.flux(i)] = ec.flux_basis.T @ (w * (p.gradient(q[:, 0], q[:, 1]) @ (K @ global_normal)))
    return v
