"""Exact bivariate polynomial arithmetic.

Polynomials are stored densely as a square coefficient array ``c`` with
``c[a, b]`` the coefficient of ``x**a * y**b``.  Degrees stay small (the
manufactured solutions used here are of degree 8, their fourth derivatives
of degree 4), so dense storage is both simple and exact for the dyadic
coefficients that occur in practice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.signal import convolve2d

from .errors import ConfigurationError


def _trim(c: np.ndarray) -> np.ndarray:
    nz = np.argwhere(c != 0.0)
    if nz.size == 0:
        return np.zeros((1, 1))
    deg = int(nz.sum(axis=1).max())
    out = np.zeros((deg + 1, deg + 1))
    na, nb = min(c.shape[0], deg + 1), min(c.shape[1], deg + 1)
    out[:na, :nb] = c[:na, :nb]
    return out


class Poly2:
    """Polynomial in two variables with real coefficients."""

    __slots__ = ("_c",)

    def __init__(self, coeffs=None):
        if coeffs is None:
            coeffs = np.zeros((1, 1))
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self._c = _trim(c)
        self._c.setflags(write=False)

    @classmethod
    def from_terms(cls, terms: dict) -> "Poly2":
        """Build from a mapping ``{(a, b): coeff}``."""
        if not terms:
            return cls()
        n = max(a + b for a, b in terms) + 1
        c = np.zeros((n, n))
        for (a, b), v in terms.items():
            if a < 0 or b < 0:
                raise ConfigurationError(f"negative exponent in term {(a, b)}")
            c[a, b] += v
        return cls(c)

    @classmethod
    def constant(cls, value: float) -> "Poly2":
        return cls([[value]])

    @classmethod
    def x(cls) -> "Poly2":
        return cls.from_terms({(1, 0): 1.0})

    @classmethod
    def y(cls) -> "Poly2":
        return cls.from_terms({(0, 1): 1.0})

    @classmethod
    def parse(cls, text: str) -> "Poly2":
        """Parse ``"a,b,coeff;a,b,coeff;..."`` into a polynomial."""
        terms: dict = {}
        for chunk in text.replace(" ", "").split(";"):
            if not chunk:
                continue
            parts = chunk.split(",")
            if len(parts) != 3:
                raise ConfigurationError(f"bad polynomial term {chunk!r}; expected 'a,b,coeff'")
            try:
                a, b, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ConfigurationError(f"bad polynomial term {chunk!r}") from exc
            terms[(a, b)] = terms.get((a, b), 0.0) + v
        return cls.from_terms(terms)

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        nz = np.argwhere(self._c != 0.0)
        if nz.size == 0:
            return -1
        return int(nz.sum(axis=1).max())

    def is_zero(self) -> bool:
        return self.degree < 0

    def terms(self) -> dict:
        return {(int(a), int(b)): float(self._c[a, b]) for a, b in np.argwhere(self._c != 0.0)}

    def __call__(self, x, y):
        return npoly.polyval2d(np.asarray(x, dtype=float), np.asarray(y, dtype=float), self._c)

    def diff(self, axis) -> "Poly2":
        return poly_diff(self, axis)

    def gradient(self, x, y) -> np.ndarray:
        """Gradient values stacked along a trailing axis of length 2."""
        return np.stack([self.diff("x")(x, y), self.diff("y")(x, y)], axis=-1)

    def _coerce(self, other) -> "Poly2":
        if isinstance(other, Poly2):
            return other
        if np.isscalar(other):
            return Poly2.constant(float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = max(self._c.shape[0], other._c.shape[0])
        c = np.zeros((n, n))
        c[: self._c.shape[0], : self._c.shape[1]] += self._c
        c[: other._c.shape[0], : other._c.shape[1]] += other._c
        return Poly2(c)

    __radd__ = __add__

    def __neg__(self):
        return Poly2(-self._c)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return Poly2(self._c * float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Poly2(convolve2d(self._c, other._c))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = Poly2.constant(1.0)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash((self._c.shape, self._c.tobytes()))

    def __repr__(self):
        if self.is_zero():
            return "Poly2(0)"
        parts = [f"{v:+g}*x^{a}*y^{b}" for (a, b), v in sorted(self.terms().items())]
        return "Poly2(" + " ".join(parts) + ")"


@dataclass(frozen=True)
class KappaMatrix:
    """Constant symmetric positive definite diffusion tensor [[a, b], [b, c]]."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a > 0 and self.a * self.c - self.b * self.b > 0):
            raise ConfigurationError(
                f"kappa = [[{self.a}, {self.b}], [{self.b}, {self.c}]] is not symmetric positive definite"
            )

    @classmethod
    def identity(cls, scale: float = 1.0) -> "KappaMatrix":
        return cls(scale, 0.0, scale)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]])


def poly_diff(p: Poly2, axis) -> Poly2:
    """Exact partial derivative along ``"x"``/``0`` or ``"y"``/``1``."""
    axes = {"x": 0, "y": 1, 0: 0, 1: 1}
    if axis not in axes:
        raise ValueError(f"axis must be 'x', 'y', 0 or 1, got {axis!r}")
    ax = axes[axis]
    c = p.coeffs
    if c.shape[ax] < 2:
        return Poly2()
    return Poly2(npoly.polyder(c, axis=ax))


def elliptic_apply(p: Poly2, kappa: KappaMatrix) -> Poly2:
    """Apply div(kappa grad .) to ``p`` for constant ``kappa``."""
    px = poly_diff(p, "x")
    py = poly_diff(p, "y")
    return kappa.a * poly_diff(px, "x") + 2.0 * kappa.b * poly_diff(px, "y") + kappa.c * poly_diff(py, "y")


def manufactured_rhs(u: Poly2, kappa: KappaMatrix, mu: float) -> Poly2:
    """Right-hand side f with (-E + mu)^2 u = f, where E = div(kappa grad)."""
    eu = elliptic_apply(u, kappa)
    return elliptic_apply(eu, kappa) - 2.0 * mu * eu + (mu * mu) * u


def bubble_solution() -> Poly2:
    """The test solution (x - x^2)^2 (y - y^2)^2."""
    x, y = Poly2.x(), Poly2.y()
    return ((x - x * x) ** 2) * ((y - y * y) ** 2)
