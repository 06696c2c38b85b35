"""Model problem data and the manufactured test cases."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .poly import KappaMatrix, Poly2, bubble_solution, manufactured_rhs


class NormalFlux:
    """Callable ``(x, y, n) -> kappa grad(u) . n`` for a polynomial ``u``."""

    def __init__(self, u: Poly2, kappa: KappaMatrix):
        self.ux = u.diff("x")
        self.uy = u.diff("y")
        self.kappa = kappa

    def __call__(self, x, y, n):
        gx, gy = self.ux(x, y), self.uy(x, y)
        k = self.kappa
        return (k.a * gx + k.b * gy) * n[0] + (k.b * gx + k.c * gy) * n[1]


@dataclass(frozen=True)
class ModelProblem:
    """(-div(kappa grad) + mu)^2 u = f with u = xi and kappa grad u . n = nu on the boundary.

    ``kappa`` and ``mu`` are either one value for the whole domain or one value
    per element.  ``f`` and ``xi`` are polynomials or callables of ``(x, y)``;
    ``nu`` is a callable of ``(x, y, n)`` with ``n`` the outward unit normal.
    """

    kappa: Union[KappaMatrix, Sequence[KappaMatrix]]
    mu: Union[float, Sequence[float]]
    f: Union[Poly2, Callable]
    xi: Union[Poly2, Callable]
    nu: Callable
    exact: Optional[Poly2] = None

    def kappa_of(self, t: int) -> KappaMatrix:
        return self.kappa if isinstance(self.kappa, KappaMatrix) else self.kappa[t]

    def mu_of(self, t: int) -> float:
        return float(self.mu) if np.isscalar(self.mu) else float(self.mu[t])

    @classmethod
    def manufactured(cls, u: Poly2, kappa: KappaMatrix, mu: float) -> "ModelProblem":
        return cls(kappa=kappa, mu=mu, f=manufactured_rhs(u, kappa, mu), xi=u, nu=NormalFlux(u, kappa), exact=u)


@dataclass(frozen=True)
class ModelCase:
    name: str
    kappa: KappaMatrix
    mu: float
    u: Poly2
    problem: ModelProblem = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "problem", ModelProblem.manufactured(self.u, self.kappa, self.mu))

    @property
    def f(self) -> Poly2:
        return self.problem.f


CASES = {
    "s1": ModelCase("s1", KappaMatrix(2.0, 0.0, 2.0), 1.0, bubble_solution()),
    "s2": ModelCase("s2", KappaMatrix(2.0, -1.0, 2.0), 1.0, bubble_solution()),
}
