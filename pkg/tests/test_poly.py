import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfwg.errors import ConfigurationError
from sfwg.poly import KappaMatrix, Poly2, bubble_solution, elliptic_apply, manufactured_rhs, poly_diff

X, Y = Poly2.x(), Poly2.y()
KAPPA_S1 = KappaMatrix(2.0, 0.0, 2.0)
KAPPA_S2 = KappaMatrix(2.0, -1.0, 2.0)


def random_poly(rng, degree):
    terms = {(a, s - a): rng.standard_normal() for s in range(degree + 1) for a in range(s + 1)}
    return Poly2.from_terms(terms)


@st.composite
def polys(draw, max_degree=6):
    deg = draw(st.integers(0, max_degree))
    coeffs = draw(st.lists(st.integers(-5, 5), min_size=(deg + 1) * (deg + 2) // 2, max_size=(deg + 1) * (deg + 2) // 2))
    terms = {}
    it = iter(coeffs)
    for s in range(deg + 1):
        for a in range(s + 1):
            terms[(a, s - a)] = float(next(it))
    return Poly2.from_terms(terms)


kappas = st.tuples(st.floats(0.5, 4.0), st.floats(-0.4, 0.4), st.floats(0.5, 4.0)).map(lambda t: KappaMatrix(*t))


# --- poly_diff ---------------------------------------------------------------


def test_diff_x2y():
    assert poly_diff(X**2 * Y, "x") == 2.0 * X * Y


def test_diff_constant_is_zero():
    d = poly_diff(Poly2.constant(3.5), "x")
    assert d.is_zero() and d.degree == -1


def test_diff_bubble_vanishes_at_center():
    assert poly_diff(bubble_solution(), "x")(0.5, 0.5) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("axis", ["x", "y", 0, 1])
def test_diff_axis_aliases(axis):
    p = X**3 * Y**2
    expected = 3.0 * X**2 * Y**2 if axis in ("x", 0) else 2.0 * X**3 * Y
    assert poly_diff(p, axis) == expected


def test_diff_bad_axis():
    with pytest.raises(ValueError):
        poly_diff(X, "z")


@given(polys())
def test_diff_drops_degree_by_one(p):
    top = [(a, b) for (a, b), c in p.terms().items() if a + b == p.degree and c != 0.0]
    for i, axis in enumerate("xy"):
        d = poly_diff(p, axis)
        if any(ab[i] > 0 for ab in top):
            assert d.degree == p.degree - 1
        else:
            assert d.degree < p.degree - 1 or d.is_zero()


def test_mixed_partials_commute_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = random_poly(rng, int(rng.integers(0, 9)))
        lhs = poly_diff(poly_diff(p, "x"), "y").coeffs
        rhs = poly_diff(poly_diff(p, "y"), "x").coeffs
        # a*b*c and b*a*c may round differently in the last bit
        np.testing.assert_allclose(lhs, rhs, rtol=4e-16, atol=0)


# --- Poly2 arithmetic --------------------------------------------------------


def test_zero_polynomial_degree():
    z = Poly2()
    assert z.degree == -1 and z.is_zero() and z.terms() == {}


@given(polys(4), polys(4))
def test_product_degree_adds(p, q):
    if p.is_zero() or q.is_zero():
        assert (p * q).is_zero()
    else:
        assert (p * q).degree == p.degree + q.degree


@given(polys(5), st.floats(-2, 2), st.floats(-2, 2))
def test_evaluation_matches_terms(p, x, y):
    direct = sum(c * x**a * y**b for (a, b), c in p.terms().items())
    assert p(x, y) == pytest.approx(direct, rel=1e-12, abs=1e-9)


def test_parse_round_trip():
    p = Poly2.parse("2,0,1.5; 1,1,-2; 0,0,3")
    assert p == 1.5 * X**2 - 2.0 * X * Y + 3.0


@pytest.mark.parametrize("text", ["1,2", "a,b,c", "1,1,1,1"])
def test_parse_rejects_garbage(text):
    with pytest.raises(ConfigurationError):
        Poly2.parse(text)


def test_bubble_value_at_center():
    assert bubble_solution()(0.5, 0.5) == pytest.approx(0.00390625, rel=0, abs=1e-17)


# --- KappaMatrix -------------------------------------------------------------


@pytest.mark.parametrize("abc", [(1.0, 2.0, 1.0), (-1.0, 0.0, 1.0), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0)])
def test_kappa_rejects_non_spd(abc):
    with pytest.raises(ConfigurationError):
        KappaMatrix(*abc)


def test_kappa_array_symmetric():
    K = KAPPA_S2.as_array()
    assert np.array_equal(K, K.T) and K[0, 1] == -1.0


# --- elliptic_apply ----------------------------------------------------------


def test_elliptic_laplacian_of_r2():
    assert elliptic_apply(X**2 + Y**2, KappaMatrix.identity()) == Poly2.constant(4.0)


@pytest.mark.parametrize("kappa", [KAPPA_S1, KAPPA_S2])
def test_elliptic_bubble_at_center(kappa):
    assert elliptic_apply(bubble_solution(), kappa)(0.5, 0.5) == pytest.approx(-0.25, abs=1e-14)


@given(polys(5), polys(5), st.floats(-3, 3), kappas)
def test_elliptic_is_linear(p, q, alpha, kappa):
    lhs = elliptic_apply(alpha * p + q, kappa)
    rhs = alpha * elliptic_apply(p, kappa) + elliptic_apply(q, kappa)
    np.testing.assert_allclose(*_aligned(lhs, rhs), rtol=1e-12, atol=1e-12)


def _aligned(p, q):
    n = max(p.coeffs.shape[0], q.coeffs.shape[0])
    out = []
    for r in (p, q):
        c = np.zeros((n, n))
        c[: r.coeffs.shape[0], : r.coeffs.shape[1]] = r.coeffs
        out.append(c)
    return out


# --- manufactured_rhs --------------------------------------------------------


def test_rhs_of_zero_is_zero():
    assert manufactured_rhs(Poly2(), KAPPA_S1, 1.0).is_zero()


def test_rhs_bubble_center_value():
    f = manufactured_rhs(bubble_solution(), KAPPA_S1, 1.0)
    assert f(0.5, 0.5) == pytest.approx(20.50390625, rel=1e-14)


def fd_operator(fun, kappa, mu, h):
    """(-E + mu) by centered differences (5-point plus a 4-point cross stencil)."""

    def apply(x, y):
        uxx = (fun(x + h, y) - 2 * fun(x, y) + fun(x - h, y)) / h**2
        uyy = (fun(x, y + h) - 2 * fun(x, y) + fun(x, y - h)) / h**2
        uxy = (fun(x + h, y + h) - fun(x + h, y - h) - fun(x - h, y + h) + fun(x - h, y - h)) / (4 * h**2)
        return -(kappa.a * uxx + 2 * kappa.b * uxy + kappa.c * uyy) + mu * fun(x, y)

    return apply


def test_rhs_center_value_against_finite_differences():
    # independent oracle: apply (-E + mu) twice by finite differences
    u = bubble_solution()
    once = fd_operator(u, KAPPA_S1, 1.0, 1e-3)
    twice = fd_operator(once, KAPPA_S1, 1.0, 1e-3)
    assert twice(0.5, 0.5) == pytest.approx(20.50390625, rel=1e-5)


@pytest.mark.parametrize("kappa", [KAPPA_S1, KAPPA_S2])
def test_rhs_matches_finite_differences_random_points(kappa):
    u, mu = bubble_solution(), 1.0
    f = manufactured_rhs(u, kappa, mu)
    # the inner application is exact, so only the outer stencil's truncation error remains
    inner = elliptic_apply(u, kappa)
    once = lambda x, y: -inner(x, y) + mu * u(x, y)
    twice = fd_operator(once, kappa, mu, 1e-3)
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.05, 0.95, size=(20, 2))
    for x, y in pts:
        assert twice(x, y) == pytest.approx(f(x, y), rel=1e-5, abs=1e-6)


@given(polys(6), kappas)
@settings(max_examples=50)
def test_rhs_with_mu_zero_is_e_squared(u, kappa):
    lhs = manufactured_rhs(u, kappa, 0.0)
    rhs = elliptic_apply(elliptic_apply(u, kappa), kappa)
    np.testing.assert_allclose(*_aligned(lhs, rhs), rtol=1e-12, atol=1e-12)


def test_bubble_boundary_data_vanish():
    u = bubble_solution()
    s = np.linspace(0.0, 1.0, 11)
    for x, y in [(s, 0 * s), (s, 0 * s + 1), (0 * s, s), (0 * s + 1, s)]:
        assert np.max(np.abs(u(x, y))) < 1e-16
        g = u.gradient(x, y)
        assert np.max(np.abs(g)) < 1e-15
