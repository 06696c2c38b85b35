"""Error norms and convergence studies for manufactured solutions."""

from __future__ import annotations

import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dofs import WeakField
from .errors import ConfigurationError, SolverError, WGError
from .mesh import generate
from .problem import CASES, ModelCase, ModelProblem
from .system import assemble, solve
from .weakops import WGSpace, kappa_gram, project_Qh

log = logging.getLogger(__name__)

MIN_STUDY_LEVEL, MAX_STUDY_LEVEL = 1, 7

CSV_HEADER = "level,n_elements,h,e_l2,order_l2,e_grad,order_grad,e_ell,order_ell"


def error_norms(uh: WeakField, exact, space: WGSpace):
    """(e_L2, e_grad, e_ell) of d = Q_h u - u_h.

    ``e_L2 = ||Q0 u - u0||``, ``e_grad = ||grad_w d||`` and ``e_ell = ||E_w d||``,
    all unweighted L2 norms summed over the elements.
    """
    u = exact.u if isinstance(exact, ModelCase) else exact
    d = project_Qh(u, space) - uh
    l2 = grad = ell = 0.0
    for t, (ctx, tb) in enumerate(zip(space.contexts, space.tables)):
        v = space.local(d, t)
        l2 += float(v[: ctx.layout.n_interior] @ v[: ctx.layout.n_interior])
        grad += float(np.sum((tb.C_G @ v) ** 2))
        ell += float(np.sum((tb.C_E @ v) ** 2))
    return math.sqrt(l2), math.sqrt(grad), math.sqrt(ell)


def energy_norm(v: WeakField, space: WGSpace, model: ModelProblem) -> float:
    """|||v|||^2 = sum_T ||E_w v||^2 + 2 mu (kappa grad_w v, grad_w v) + mu^2 ||v0||^2."""
    total = 0.0
    for t, (ctx, tb) in enumerate(zip(space.contexts, space.tables)):
        vt = space.local(v, t)
        mu = model.mu_of(t)
        v0 = vt[: ctx.layout.n_interior]
        total += float(np.sum((tb.C_E @ vt) ** 2))
        total += 2.0 * mu * float(vt @ kappa_gram(tb, space.kappas[t]) @ vt)
        total += mu * mu * float(v0 @ v0)
    return math.sqrt(max(total, 0.0))


def discrete_h2_norm(v: WeakField, space: WGSpace, model: ModelProblem, parts: bool = False):
    """Discrete H^2 norm built from v0 and its boundary mismatches.

    Element terms ``||E v0||^2 + 2 mu ||kappa^(1/2) grad v0||^2 + mu^2 ||v0||^2``
    plus ``h_T^-1 ||kappa grad v0 . n - vg||^2`` and ``h_T^-3 ||v0 - vb||^2`` on
    each element boundary, with vg oriented by the element.  With
    ``parts=True`` returns ``(norm, jump_part)`` where ``jump_part`` is the
    square root of the two boundary terms.
    """
    total = jumps = 0.0
    for t, ctx in enumerate(space.contexts):
        vt = space.local(v, t)
        lay, basis, kappa = ctx.layout, ctx.basis, space.kappas[t]
        K = kappa.as_array()
        mu = model.mu_of(t)
        v0 = vt[lay.interior()]
        w = ctx.rule.weights
        pts = ctx.rule.points
        ev = basis.elliptic(pts, kappa, ctx.k) @ v0
        gv = np.einsum("qbc,b->qc", basis.gradient(pts, ctx.k), v0)
        val = basis.values(pts, ctx.k) @ v0
        total += float(w @ ev**2)
        total += 2.0 * mu * float(w @ np.einsum("qi,ij,qj->q", gv, K, gv))
        total += mu * mu * float(w @ val**2)
        h = ctx.element.diameter
        for i, ec in enumerate(ctx.edges):
            q, we = ec.rule.points, ec.rule.weights
            trace = basis.values(q, ctx.k) @ v0
            flux = np.einsum("qbc,b->qc", basis.gradient(q, ctx.k), v0) @ (K @ ec.normal)
            vb = ec.trace_basis @ vt[lay.trace(i)]
            vg = ec.sign * (ec.flux_basis @ vt[lay.flux(i)])
            jumps += float(we @ (flux - vg) ** 2) / h + float(we @ (trace - vb) ** 2) / h**3
    norm = math.sqrt(max(total + jumps, 0.0))
    return (norm, math.sqrt(jumps)) if parts else norm


def convergence_order(coarse: float, fine: float) -> float:
    """log2 of successive error ratios (the generators halve h exactly)."""
    if coarse <= 0.0 or fine <= 0.0:
        return float("nan")
    return math.log2(coarse / fine)


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    n_elements: int
    h: float
    e_l2: float
    e_grad: float
    e_ell: float
    order_l2: Optional[float] = None
    order_grad: Optional[float] = None
    order_ell: Optional[float] = None


@dataclass
class ConvergenceTable:
    rows: list
    k: int
    family: str
    case: str
    r1: tuple
    r2: tuple
    seconds: list = field(default_factory=list)

    def add(self, level, n_elements, h, e_l2, e_grad, e_ell):
        prev = self.rows[-1] if self.rows else None
        orders = (
            (None, None, None)
            if prev is None
            else tuple(convergence_order(a, b) for a, b in zip((prev.e_l2, prev.e_grad, prev.e_ell), (e_l2, e_grad, e_ell)))
        )
        self.rows.append(ConvergenceRow(level, n_elements, h, e_l2, e_grad, e_ell, *orders))

    @property
    def final_orders(self):
        r = self.rows[-1]
        return r.order_l2, r.order_grad, r.order_ell

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for r in self.rows:
            cells = [str(r.level), str(r.n_elements), f"{r.h:.6g}"]
            for e, o in ((r.e_l2, r.order_l2), (r.e_grad, r.order_grad), (r.e_ell, r.order_ell)):
                cells += [f"{e:.6g}", "" if o is None else f"{o:.6g}"]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def format(self) -> str:
        head = (
            f"case {self.case}, {self.family} mesh, P{self.k}/P{self.k}/P{self.k - 1}, "
            f"r1={','.join(map(str, self.r1))}, r2={','.join(map(str, self.r2))}"
        )
        cols = f"{'G_i':>4} {'|Q0u-u0|':>10} {'h^r':>4} {'|grad_w e|':>10} {'h^r':>4} {'|E_w e|':>10} {'h^r':>4}"
        lines = [head, cols, "-" * len(cols)]
        for r in self.rows:
            cells = [f"{r.level:>4}"]
            for e, o in ((r.e_l2, r.order_l2), (r.e_grad, r.order_grad), (r.e_ell, r.order_ell)):
                cells += [f"{table_float(e):>10}", f"{'' if o is None else f'{o:.1f}':>4}"]
            lines.append(" ".join(cells))
        return "\n".join(lines)


def table_float(x: float) -> str:
    """Format as 0.ddd E+-e, e.g. 1.28e-5 -> '0.128E-4'."""
    if x == 0.0 or not math.isfinite(x):
        return "0.000E+0" if x == 0.0 else str(x)
    e = math.floor(math.log10(abs(x))) + 1
    m = round(x / 10.0**e, 3)
    if abs(m) >= 1.0:
        e += 1
        m = round(x / 10.0**e, 3)
    return f"{m:.3f}E{e:+d}"


def solve_level(
    case: ModelCase, family: str, k: int, level: int, *, r1=None, r2=None, degrees="uniform", solver="direct", condense=False, threads=None
):
    """Mesh, discretize, assemble and solve one level; returns (space, system, uh)."""
    mesh = generate(family, level)
    space = WGSpace(mesh, k, case.kappa, r1=r1, r2=r2, threads=threads, degrees=degrees)
    system = assemble(space, case.problem, threads=threads)
    uh = solve(system, solver, condense=condense)
    return space, system, uh


def run_convergence(
    case,
    family: str,
    k: int,
    levels: Sequence[int],
    *,
    r1: Optional[int] = None,
    r2: Optional[int] = None,
    degrees: str = "uniform",
    solver: str = "direct",
    condense: bool = False,
    threads: Optional[int] = None,
    on_level: Optional[Callable] = None,
) -> ConvergenceTable:
    """Solve ``case`` on successive grids and tabulate errors and observed orders.

    ``on_level(level, space, system, uh)`` is called after each solve, e.g. to
    audit the assembled matrix without assembling it twice.
    """
    if isinstance(case, str):
        if case not in CASES:
            raise ConfigurationError(f"unknown case {case!r}; expected one of {sorted(CASES)}")
        case = CASES[case]
    levels = list(levels)
    if not levels or levels != sorted(set(levels)) or not MIN_STUDY_LEVEL <= levels[0] <= levels[-1] <= MAX_STUDY_LEVEL:
        raise ConfigurationError(f"levels must be ascending within [{MIN_STUDY_LEVEL}, {MAX_STUDY_LEVEL}], got {levels}")
    table = ConvergenceTable(rows=[], k=k, family=family, case=case.name, r1=(), r2=())
    r1s, r2s = set(), set()
    for level in levels:
        start = time.perf_counter()
        try:
            space, system, uh = solve_level(case, family, k, level, r1=r1, r2=r2, degrees=degrees, solver=solver, condense=condense, threads=threads)
        except SolverError as exc:
            raise SolverError(f"level {level}: {exc}", residual=exc.residual, pivot=exc.pivot) from exc
        except WGError as exc:
            raise type(exc)(f"level {level}: {exc}") from exc
        if on_level is not None:
            on_level(level, space, system, uh)
        errs = error_norms(uh, case, space)
        table.add(level, space.mesh.n_elements, space.mesh.h, *errs)
        table.seconds.append(time.perf_counter() - start)
        for _, _, a, b in space.degrees_used():
            r1s.add(a)
            r2s.add(b)
        log.info("case %s %s k=%d level %d: %s (%.1fs)", case.name, family, k, level, errs, table.seconds[-1])
    table.r1, table.r2 = tuple(sorted(r1s)), tuple(sorted(r2s))
    return table
