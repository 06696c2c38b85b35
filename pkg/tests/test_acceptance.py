"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line that is printed in the terminal
summary.  Tolerances are pinned here and never loosened.
"""

import time
import warnings
from math import factorial

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_element_meshes
from sfwg.dofs import WeakField, dim_poly
from sfwg.mesh import gen_pentagonal, generate
from sfwg.poly import KappaMatrix, Poly2, elliptic_apply
from sfwg.problem import CASES, ModelProblem
from sfwg.quadrature import polygon_rule, triangle_rule
from sfwg.study import discrete_h2_norm, energy_norm, run_convergence
from sfwg.system import assemble, solve
from sfwg.weakops import WGSpace, exact_trace_local, monomial_exponents, project_Qh
from test_quadrature import exact_polygon_moment, pentagon_vertices_exact

X, Y = Poly2.x(), Poly2.y()

# levels of each table block, by k
LEVELS = {2: (4, 5, 6), 3: (3, 4, 5), 4: (2, 3, 4)}
BLOCKS = [(case, family, k) for case in ("s1", "s2") for family in ("tri", "pent") for k in (2, 3, 4)]

# finest-level (e_L2, e_grad, e_ell) from the published tables
PUBLISHED = {
    ("s1", "tri", 2): (0.128e-4, 0.137e-3, 0.629e-1),
    ("s1", "tri", 3): (0.184e-6, 0.982e-5, 0.561e-2),
    ("s1", "tri", 4): (0.351e-7, 0.528e-5, 0.174e-2),
    ("s2", "tri", 2): (0.236e-4, 0.226e-3, 0.830e-1),
    ("s2", "tri", 3): (0.313e-6, 0.106e-4, 0.716e-2),
    ("s2", "tri", 4): (0.482e-7, 0.578e-5, 0.223e-2),
    ("s1", "pent", 2): (0.102e-4, 0.109e-3, 0.513e-1),
    ("s1", "pent", 3): (0.107e-6, 0.138e-4, 0.400e-2),
    ("s1", "pent", 4): (0.145e-7, 0.792e-5, 0.118e-2),
    ("s2", "pent", 2): (0.178e-4, 0.172e-3, 0.743e-1),
    ("s2", "pent", 3): (0.148e-6, 0.197e-4, 0.537e-2),
    ("s2", "pent", 4): (0.201e-7, 0.919e-5, 0.152e-2),
}

ELL_BAND, GRAD_BAND, L2_SLACK = 0.25, 0.35, 0.25
MAGNITUDE_FACTOR = 10.0
PATCH_TOL, PATCH_SECONDS = 1e-8, 10.0
COMMUTE_TOL = 1e-9
SYMMETRY_TOL = 1e-12
DRIFT_LIMIT = 10.0
QUAD_TOL = 1e-13
QUAD_MAX_DEGREE = 28
MANY_THREADS = 4


def record(n, name, ok, detail):
    ACCEPTANCE_LINES[n] = f"criterion {n} ({name}): {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.fixture(scope="session")
def criterion1_runs():
    """All table blocks on MANY_THREADS threads, with a symmetry audit of every assembled A."""
    tables, audits = {}, {}
    for block in BLOCKS:
        case, family, k = block
        audit = []

        def check(level, space, system, uh, audit=audit):
            audit.append((level, system.symmetry_error(), system.A.shape[0]))

        # the direct solver is a sparse Cholesky, so a finished run certifies factorizability
        tables[block] = run_convergence(case, family, k, LEVELS[k], solver="direct", threads=MANY_THREADS, on_level=check)
        audits[block] = audit
    return tables, audits


def test_criterion1_convergence_orders(criterion1_runs):
    tables, _ = criterion1_runs
    bad = []
    for block, table in tables.items():
        k = block[2]
        o_l2, o_grad, o_ell = table.final_orders
        ok = abs(o_ell - (k - 1)) <= ELL_BAND and abs(o_grad - k) <= GRAD_BAND and o_l2 >= k - L2_SLACK
        if not ok:
            bad.append(f"{'/'.join(map(str, block))}: ({o_l2:.2f}, {o_grad:.2f}, {o_ell:.2f})")
    record(1, "convergence orders", not bad, f"{len(tables) - len(bad)}/{len(tables)} blocks in band" + (f"; off: {bad}" if bad else ""))
    assert not bad


def test_criterion2_error_magnitudes(criterion1_runs):
    tables, _ = criterion1_runs
    off = []
    worst = 1.0
    for block, table in tables.items():
        last = table.rows[-1]
        for ours, theirs in zip((last.e_l2, last.e_grad, last.e_ell), PUBLISHED[block]):
            ratio = max(ours / theirs, theirs / ours)
            worst = max(worst, ratio)
            if ratio > MAGNITUDE_FACTOR:
                off.append(f"{'/'.join(map(str, block))}: {ours:.3g} vs {theirs:.3g}")
    # soft criterion: report and warn, never fail
    record(2, "error magnitudes, soft", not off, f"worst ratio to published values {worst:.2f} (limit {MAGNITUDE_FACTOR:g})" + (f"; WARN {off}" if off else ""))
    if off:
        warnings.warn(f"errors more than {MAGNITUDE_FACTOR:g}x from published values: {off}")


def test_criterion3_patch_test():
    kappa = KappaMatrix(2.0, -1.0, 2.0)
    worst, slowest = 0.0, 0.0
    for family in ("tri", "pent"):
        for k in (2, 3, 4):
            start = time.perf_counter()
            u = X**2 + X * Y if k == 2 else X**2 * Y + 0.5 * Y**k - X
            model = ModelProblem.manufactured(u, kappa, 1.0)
            space = WGSpace(generate(family, 2), k, kappa)
            uh = solve(assemble(space, model))
            qh = project_Qh(u, space)
            worst = max(worst, energy_norm(qh - uh, space, model) / energy_norm(qh, space, model))
            slowest = max(slowest, time.perf_counter() - start)
    ok = worst <= PATCH_TOL and slowest < PATCH_SECONDS
    record(3, "patch test", ok, f"max relative energy error {worst:.2e} (tol {PATCH_TOL:g}), slowest {slowest:.1f}s")
    assert ok


def test_criterion4_commuting_identities():
    worst = 0.0
    for family in ("tri", "pent"):
        meshes = random_element_meshes(family, 10, seed=4242)
        for k in (2, 3, 4):
            for kappa in (KappaMatrix.identity(), KappaMatrix(2.0, -1.0, 2.0)):
                for mesh in meshes:
                    space = WGSpace(mesh, k, kappa, threads=1)
                    ctx, tb = space.contexts[0], space.tables[0]
                    pts, w = ctx.rule.points, ctx.rule.weights
                    n2 = dim_poly(ctx.r2)
                    for a, b in monomial_exponents(k):
                        p = X**a * Y**b
                        v = exact_trace_local(ctx, p, kappa)
                        norm_p = np.sqrt(w @ p(pts[:, 0], pts[:, 1]) ** 2)
                        ew = ctx.basis.values(pts, ctx.r1) @ (tb.C_E @ v)
                        err = np.sqrt(w @ (ew - elliptic_apply(p, kappa)(pts[:, 0], pts[:, 1])) ** 2)
                        g = tb.C_G @ v
                        for comp, d in enumerate((p.diff("x"), p.diff("y"))):
                            gw = ctx.basis.values(pts, ctx.r2) @ g[comp * n2 : (comp + 1) * n2]
                            err = max(err, np.sqrt(w @ (gw - d(pts[:, 0], pts[:, 1])) ** 2))
                        worst = max(worst, err / norm_p)
    ok = worst <= COMMUTE_TOL
    record(4, "commuting identities", ok, f"max relative defect {worst:.2e} (tol {COMMUTE_TOL:g}) on 10 elements per family")
    assert ok


def test_criterion5_well_posedness(criterion1_runs):
    _, audits = criterion1_runs
    worst_sym = max(err for audit in audits.values() for _, err, _ in audit)
    n_systems = sum(len(a) for a in audits.values())
    zero = Poly2()
    worst_zero = 0.0
    for family in ("tri", "pent"):
        for k in (2, 3, 4):
            model = ModelProblem(kappa=CASES["s2"].kappa, mu=1.0, f=zero, xi=zero, nu=lambda x, y, n: 0.0 * x)
            space = WGSpace(generate(family, 2), k, CASES["s2"].kappa)
            worst_zero = max(worst_zero, float(np.max(np.abs(solve(assemble(space, model)).values))))
    ok = worst_sym <= SYMMETRY_TOL and worst_zero == 0.0
    record(
        5,
        "well-posedness",
        ok,
        f"{n_systems} systems Cholesky-factorized, max symmetry error {worst_sym:.1e} (tol {SYMMETRY_TOL:g}), zero-data max |u_h| {worst_zero:g}",
    )
    assert ok


def test_criterion6_norm_equivalence():
    case = CASES["s2"]
    drifts = {}
    for family in ("tri", "pent"):
        lows, highs = [], []
        for level in (1, 2, 3, 4):
            space = WGSpace(generate(family, level), 2, case.kappa)
            rng = np.random.default_rng(600 + level)
            ratios = []
            for _ in range(50):
                v = rng.standard_normal(space.dofmap.total)
                v[space.dofmap.boundary_mask] = 0.0
                field = WeakField(v, space.dofmap)
                ratios.append(energy_norm(field, space, case.problem) / discrete_h2_norm(field, space, case.problem))
            lows.append(min(ratios))
            highs.append(max(ratios))
        drifts[family] = max(max(lows) / min(lows), max(highs) / min(highs))
    ok = all(d < DRIFT_LIMIT for d in drifts.values())
    detail = ", ".join(f"{f} drift {d:.2f}" for f, d in drifts.items())
    record(6, "norm equivalence", ok, f"{detail} (limit {DRIFT_LIMIT:g}) over levels 1-4")
    assert ok


def test_criterion7_quadrature():
    worst = 0.0
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for d in range(QUAD_MAX_DEGREE + 1):
        rule = triangle_rule(ref, d)
        x, y = rule.points.T
        for a, b in monomial_exponents(d):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            worst = max(worst, abs(rule.integrate(x**a * y**b) - exact) / exact)
    mesh = gen_pentagonal(1)
    for d in range(0, QUAD_MAX_DEGREE + 1, 2):
        for el, verts in zip(mesh.elements, pentagon_vertices_exact()):
            rule = polygon_rule(el, d)
            x, y = rule.points.T
            for a, b in monomial_exponents(d):
                exact = float(exact_polygon_moment(verts, a, b))
                worst = max(worst, abs(rule.integrate(x**a * y**b) - exact) / abs(exact))
    ok = worst <= QUAD_TOL
    record(7, "quadrature exactness", ok, f"max relative error {worst:.1e} (tol {QUAD_TOL:g}) up to degree {QUAD_MAX_DEGREE}")
    assert ok


def test_criterion8_determinism(criterion1_runs):
    tables, _ = criterion1_runs
    differ = []
    for block in BLOCKS:
        case, family, k = block
        single = run_convergence(case, family, k, LEVELS[k], solver="direct", threads=1)
        if single.to_csv() != tables[block].to_csv():
            differ.append("/".join(map(str, block)))
    record(8, "determinism", not differ, f"{len(BLOCKS) - len(differ)}/{len(BLOCKS)} CSVs bitwise equal for 1 vs {MANY_THREADS} threads")
    assert not differ
