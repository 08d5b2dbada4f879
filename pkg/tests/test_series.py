"""Truncated series arithmetic against sympy's own expansions."""
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ijets.series import (InexactRoot, SingularityError, TruncatedSeries, equal_by_sampling,
                          evaluate, exact_sqrt, format_fraction, is_zero, parse_fraction,
                          revert)

x, y = sp.symbols("x y")


def from_sympy(expr, gens, order):
    poly = sp.Poly(sp.expand(expr), *gens)
    coeffs = {m: Fraction(int(c.p), int(c.q)) for m, c in poly.terms() if sum(m) <= order}
    return TruncatedSeries(len(gens), order, coeffs)


def sympy_truncate(expr, order):
    """Total-degree truncation of a bivariate expansion via t-scaling."""
    t = sp.Symbol("t")
    ser = sp.series(expr.subs({x: t * x, y: t * y}), t, 0, order + 1).removeO()
    return from_sympy(ser.subs(t, 1), (x, y), order)


def test_invert_matches_sympy():
    f = 2 + x - y / 3 + x * y + y ** 3 / 5
    s = from_sympy(f, (x, y), 6)
    assert s.invert() == sympy_truncate(1 / f, 6)


def test_sqrt_matches_sympy():
    f = sp.Rational(9, 4) + x - y / 3 + x * y
    s = from_sympy(f, (x, y), 5)
    assert s.sqrt() == sympy_truncate(sp.sqrt(f), 5)


def test_compose_matches_substitution():
    f = 1 + x + x * y + y ** 2
    a, b = x + x * y, y - x ** 2
    s = from_sympy(f, (x, y), 5)
    got = s.compose([from_sympy(a, (x, y), 5), from_sympy(b, (x, y), 5)])
    assert got == from_sympy(f.subs({x: a, y: b}, simultaneous=True), (x, y), 5)


def test_reversion_is_catalan_in_one_variable():
    # y = x + x^2  =>  x = y - y^2 + 2 y^3 - 5 y^4 + 14 y^5 - ...
    s = TruncatedSeries(1, 6, {(1,): 1, (2,): 1})
    (inv,) = revert([s])
    assert [inv.coeffs.get((k,), 0) for k in range(1, 7)] == [1, -1, 2, -5, 14, -42]


def test_reversion_two_variables():
    f = [from_sympy(2 * x + y + x * y, (x, y), 5), from_sympy(y - x ** 2 + y ** 3, (x, y), 5)]
    g = revert(f)
    ident = [TruncatedSeries.variable(2, 5, 0), TruncatedSeries.variable(2, 5, 1)]
    assert [fi.compose(g) for fi in f] == ident
    assert [gi.compose(f) for gi in g] == ident


def test_reversion_rejects_singular_linear_part():
    with pytest.raises(SingularityError):
        revert([from_sympy(x + y, (x, y), 3), from_sympy(2 * x + 2 * y + x * y, (x, y), 3)])


def test_jets_are_taylor_coefficients_times_factorials():
    s = TruncatedSeries.from_jets(2, 4, {(): Fraction(1), (1, 2): Fraction(3), (2, 2, 2): 6})
    assert s.coeffs[(1, 1)] == 3
    assert s.coeffs[(0, 3)] == 1
    assert s.jet((2, 2, 2)) == 6
    assert s.jets()[(1, 2)] == 3


def test_partial_and_evaluate():
    s = from_sympy(1 + x + x ** 2 * y, (x, y), 4)
    assert s.partial(0) == from_sympy(1 + 2 * x * y, (x, y), 4)
    assert s.evaluate([Fraction(1, 2), Fraction(2)]) == Fraction(2)


def test_json_round_trip():
    s = from_sympy(sp.Rational(1, 3) - x / 7 + x * y ** 2, (x, y), 4)
    assert TruncatedSeries.from_json(s.to_json()) == s


def test_singularities():
    with pytest.raises(SingularityError):
        TruncatedSeries(1, 3, {(1,): 1}).invert()
    with pytest.raises(SingularityError):
        TruncatedSeries.constant(1, 3, -1).sqrt()
    with pytest.raises(InexactRoot):
        exact_sqrt(Fraction(2))
    assert exact_sqrt(Fraction(9, 16)) == Fraction(3, 4)


def test_fraction_text():
    assert format_fraction(Fraction(4, 2)) == "2"
    assert format_fraction(Fraction(-2, 3)) == "-2/3"
    assert parse_fraction("-2/3") == Fraction(-2, 3)
    assert parse_fraction(sp.Rational(5, 7)) == Fraction(5, 7)


def test_exact_evaluation_and_float_fallback():
    assert evaluate(sp.sqrt(x) / 3 + x ** 2, {x: Fraction(9, 4)}) == Fraction(89, 16)
    assert abs(float(evaluate(sp.sqrt(x), {x: Fraction(2)})) - 2 ** 0.5) < 1e-15
    with pytest.raises(InexactRoot):
        evaluate(sp.sqrt(x), {x: Fraction(2)}, allow_float=False)


def test_identity_testing_by_sampling():
    assert is_zero((x + y) ** 2 - x ** 2 - 2 * x * y - y ** 2)
    assert not is_zero(x * y - y * x + x)
    assert equal_by_sampling((x ** 2 - 1) / (x - 1), x + 1)
    assert not equal_by_sampling(sp.sqrt(x ** 2), x + 1)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.fractions(-3, 3, max_denominator=4), min_size=7, max_size=7),
       st.fractions(Fraction(1, 2), 3, max_denominator=3))
def test_power_and_division_agree(coeffs, c0):
    s = TruncatedSeries(1, 7, {(k,): c for k, c in enumerate(coeffs, start=1)}) + c0
    assert s ** -2 == (s * s).invert()
    assert (s / s) == TruncatedSeries.constant(1, 7, 1)
