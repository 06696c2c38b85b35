"""Local and global numbering of weak degrees of freedom.

A weak function ``{v0, vb, vg}`` has ``v0`` in P_k(T), ``vb`` in P_k(e) and
``vg`` in P_{k-1}(e).  Globally the interior blocks come first (element
order), then all ``vb`` blocks (edge order), then all ``vg`` blocks.  The
``vg`` coefficients describe the flux against the global edge normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def dim_poly(r: int) -> int:
    """Dimension of P_r in two variables."""
    return (r + 1) * (r + 2) // 2 if r >= 0 else 0


@dataclass(frozen=True)
class LocalDofLayout:
    """Ordering of the local weak DOFs of one element with ``n_edges`` edges."""

    k: int
    n_edges: int

    @property
    def n_interior(self) -> int:
        return dim_poly(self.k)

    @property
    def n_trace(self) -> int:
        return self.k + 1

    @property
    def n_flux(self) -> int:
        return self.k

    @property
    def size(self) -> int:
        return self.n_interior + self.n_edges * (2 * self.k + 1)

    def interior(self) -> slice:
        return slice(0, self.n_interior)

    def trace(self, i: int) -> slice:
        s = self.n_interior + i * self.n_trace
        return slice(s, s + self.n_trace)

    def flux(self, i: int) -> slice:
        s = self.n_interior + self.n_edges * self.n_trace + i * self.n_flux
        return slice(s, s + self.n_flux)


@dataclass(frozen=True)
class DofMap:
    k: int
    n_elements: int
    n_edges: int
    boundary_edges: np.ndarray

    @property
    def n_interior(self) -> int:
        return dim_poly(self.k)

    @property
    def interior_total(self) -> int:
        return self.n_elements * self.n_interior

    @property
    def total(self) -> int:
        return self.interior_total + self.n_edges * (2 * self.k + 1)

    def interior_dofs(self, t: int) -> np.ndarray:
        s = t * self.n_interior
        return np.arange(s, s + self.n_interior)

    def trace_dofs(self, e: int) -> np.ndarray:
        s = self.interior_total + e * (self.k + 1)
        return np.arange(s, s + self.k + 1)

    def flux_dofs(self, e: int) -> np.ndarray:
        s = self.interior_total + self.n_edges * (self.k + 1) + e * self.k
        return np.arange(s, s + self.k)

    def element_dofs(self, t: int, element) -> np.ndarray:
        """Global indices of element ``t`` in local-layout order."""
        parts = [self.interior_dofs(t)]
        parts += [self.trace_dofs(e) for e in element.edges]
        parts += [self.flux_dofs(e) for e in element.edges]
        return np.concatenate(parts)

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.total, dtype=bool)
        for e in self.boundary_edges:
            mask[self.trace_dofs(e)] = True
            mask[self.flux_dofs(e)] = True
        return mask

    def ranges(self) -> dict:
        """Half-open index ranges of the three DOF groups."""
        nb = self.interior_total + self.n_edges * (self.k + 1)
        return {"interior": (0, self.interior_total), "trace": (self.interior_total, nb), "flux": (nb, self.total)}


def build_dofmap(mesh, k: int) -> DofMap:
    boundary = np.array([e for e, edge in enumerate(mesh.edges) if edge.boundary], dtype=int)
    return DofMap(k=k, n_elements=mesh.n_elements, n_edges=mesh.n_edges, boundary_edges=boundary)


@dataclass
class WeakField:
    """Global coefficient vector of a weak function."""

    values: np.ndarray
    dofmap: DofMap

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.dofmap.total,):
            raise ValueError(f"field has {self.values.size} values, dofmap expects {self.dofmap.total}")

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "WeakField":
        return cls(np.zeros(dofmap.total), dofmap)

    def copy(self) -> "WeakField":
        return WeakField(self.values.copy(), self.dofmap)

    def __sub__(self, other: "WeakField") -> "WeakField":
        return WeakField(self.values - other.values, self.dofmap)

    def local(self, t: int, element) -> np.ndarray:
        return self.values[self.dofmap.element_dofs(t, element)]
