"""Global assembly and solution of the stabilizer-free WG scheme.

Boundary traces and fluxes are fixed by L2 projection of the data and moved
to the right-hand side, so the matrix acting on the free DOFs stays
symmetric positive definite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .dofs import DofMap, WeakField
from .errors import SolverError
from .poly import Poly2
from .problem import ModelProblem
from .quadrature import edge_parameters
from .weakops import WGSpace, edge_basis, local_stiffness, parallel_map

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AssembledSystem:
    """A x = b on the free DOFs, plus the boundary lift that completes the solution.

    ``A`` is stored as a full (both triangles) CSR matrix so symmetry can be
    audited; the direct solver only reads its lower triangle.
    """

    A: sp.csr_matrix
    b: np.ndarray
    free: np.ndarray
    lift: WeakField

    @property
    def dofmap(self) -> DofMap:
        return self.lift.dofmap

    def symmetry_error(self) -> float:
        """max |A - A^T| / max |A|."""
        amax = abs(self.A).max()
        return float(abs(self.A - self.A.T).max() / amax) if amax else 0.0

    def dump(self, path) -> None:
        """Write ``<path>`` (matrix, 1-based coordinate format) and ``<path>.rhs``."""
        path = Path(path)
        with open(path, "wb") as fh:
            scipy.io.mmwrite(fh, sp.coo_matrix(self.A), precision=17)
        np.savetxt(path.with_name(path.name + ".rhs"), self.b, fmt="%.17g")


def local_matrices(space: WGSpace, model: ModelProblem, threads: Optional[int] = None) -> list:
    def work(t):
        ctx = space.contexts[t]
        return local_stiffness(space.tables[t], ctx.layout, space.kappas[t], model.mu_of(t))

    return parallel_map(work, range(space.mesh.n_elements), threads if threads is not None else space.threads)


def _scatter(space: WGSpace, mats: list) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for t, K in enumerate(mats):
        idx = space.dofmap.element_dofs(t, space.mesh.elements[t])
        rows.append(np.repeat(idx, idx.size))
        cols.append(np.tile(idx, idx.size))
        vals.append(K.ravel())
    n = space.dofmap.total
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_full(space: WGSpace, model: ModelProblem, threads: Optional[int] = None) -> sp.csr_matrix:
    """Unmasked global stiffness matrix over all DOFs."""
    return _scatter(space, local_matrices(space, model, threads))


def load_vector(space: WGSpace, model: ModelProblem) -> np.ndarray:
    """Global vector of (f, chi0)_T; zero on edge DOFs."""
    dm, k = space.dofmap, space.k
    b = np.zeros(dm.total)
    f = model.f
    for t, ctx in enumerate(space.contexts):
        rule = ctx.rule_for(f.degree + k) if isinstance(f, Poly2) else ctx.rule
        phi = ctx.basis.values(rule.points, k)
        b[dm.interior_dofs(t)] = phi.T @ (rule.weights * f(rule.points[:, 0], rule.points[:, 1]))
    return b


def apply_boundary(field: WeakField, model: ModelProblem, space: WGSpace) -> WeakField:
    """Copy of ``field`` with boundary traces set to Qb xi and fluxes to Qg nu."""
    out = field.copy()
    dm, k, mesh = space.dofmap, space.k, space.mesh
    xi_deg = model.xi.degree if isinstance(model.xi, Poly2) else None
    deg = 2 * k + 8 if xi_deg is None else max(xi_deg, 0) + k
    t, w_ref = edge_parameters(deg)
    for e in dm.boundary_edges:
        edge = mesh.edges[e]
        p0, p1 = mesh.edge_points(e)
        q = p0 + 0.5 * (t[:, None] + 1.0) * (p1 - p0)
        w = 0.5 * edge.length * w_ref
        out.values[dm.trace_dofs(e)] = edge_basis(t, k + 1, edge.length).T @ (w * model.xi(q[:, 0], q[:, 1]))
        out.values[dm.flux_dofs(e)] = edge_basis(t, k, edge.length).T @ (w * model.nu(q[:, 0], q[:, 1], edge.normal))
    return out


def assemble(space: WGSpace, model: ModelProblem, threads: Optional[int] = None) -> AssembledSystem:
    """Assemble the free-DOF system of the WG scheme for ``model`` on ``space``."""
    dm = space.dofmap
    A_full = assemble_full(space, model, threads)
    lift = apply_boundary(WeakField.zeros(dm), model, space)
    free = np.flatnonzero(~dm.boundary_mask)
    rhs = load_vector(space, model) - A_full @ lift.values
    A = A_full[free][:, free].tocsr()
    A.sort_indices()
    return AssembledSystem(A=A, b=rhs[free], free=free, lift=lift)


def _cholmod_solve(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    from cvxopt import matrix, spmatrix
    from cvxopt import cholmod

    if A.shape[0] == 0:
        return np.zeros(0)
    L = sp.tril(A, format="coo")
    M = spmatrix(L.data.tolist(), L.row.tolist(), L.col.tolist(), A.shape)
    x = matrix(np.asarray(b, dtype=float).copy())
    try:
        F = cholmod.symbolic(M)
        cholmod.numeric(M, F)
    except ArithmeticError as exc:
        pivot = exc.args[0] if exc.args else None
        raise SolverError(f"Cholesky breakdown: matrix not positive definite at pivot {pivot}", pivot=pivot) from exc
    cholmod.solve(F, x)
    return np.array(x).ravel()


def _cg_solve(A: sp.spmatrix, b: np.ndarray, rtol: float = 1e-12):
    n = A.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    d = A.diagonal()
    M = sp.diags(1.0 / d)
    count = [0]

    def tick(_):
        count[0] += 1

    x, info = cg(A, b, rtol=rtol, atol=0.0, maxiter=10 * n, M=M, callback=tick)
    res = np.linalg.norm(b - A @ x) / bnorm
    if info != 0:
        raise SolverError(f"CG did not converge in {count[0]} iterations (relative residual {res:.3e})", residual=res)
    return x, count[0]


def linear_solve(A: sp.spmatrix, b: np.ndarray, strategy: str = "direct") -> np.ndarray:
    """Solve an SPD system by sparse Cholesky (``direct``) or Jacobi-preconditioned CG (``cg``)."""
    if strategy == "direct":
        return _cholmod_solve(A, b)
    if strategy == "cg":
        return _cg_solve(A, b)[0]
    raise ValueError(f"unknown solver strategy {strategy!r}")


def _condensed_solve(system: AssembledSystem, strategy: str) -> np.ndarray:
    # interior DOFs come first in the global numbering and are never on the boundary
    dm = system.dofmap
    ni, nk = dm.interior_total, dm.n_interior
    A, b = system.A, system.b
    A_II = A[:ni, :ni]
    blocks = []
    for s in range(0, ni, nk):
        blk = A_II[s : s + nk, s : s + nk].toarray()
        try:
            c = np.linalg.cholesky(blk)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"interior block of element {s // nk} is not positive definite") from exc
        ci = np.linalg.inv(c)
        blocks.append(ci.T @ ci)
    Ainv = sp.block_diag(blocks, format="csr")
    A_IS, A_SI, A_SS = A[:ni, ni:], A[ni:, :ni], A[ni:, ni:]
    S = (A_SS - A_SI @ Ainv @ A_IS).tocsr()
    S = 0.5 * (S + S.T)
    x_s = linear_solve(S, b[ni:] - A_SI @ (Ainv @ b[:ni]), strategy)
    x_i = Ainv @ (b[:ni] - A_IS @ x_s)
    return np.concatenate([x_i, x_s])


def solve(system: AssembledSystem, strategy: str = "direct", condense: bool = False) -> WeakField:
    """Solve and return the full weak field with boundary values re-inserted."""
    x = _condensed_solve(system, strategy) if condense else linear_solve(system.A, system.b, strategy)
    out = system.lift.copy()
    out.values[system.free] = x
    return out
