import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from fracblow.expr import ExpPoly, ExpressionError, Ratio, parse_expression

X = np.linspace(0.0, 1.5, 31)


@pytest.mark.parametrize(
    "text, f",
    [
        ("x", lambda x: x),
        ("x^4", lambda x: x**4),
        ("x-1", lambda x: x - 1),
        ("-exp(-x)", lambda x: -np.exp(-x)),
        ("1 - exp(-x)", lambda x: 1 - np.exp(-x)),
        ("x^2*(x^2-12)", lambda x: x**2 * (x**2 - 12)),
        ("2.5e-1*x^3 + 3*x*exp(2*x+1)", lambda x: 0.25 * x**3 + 3 * x * np.exp(2 * x + 1)),
        ("-(x-1)^2", lambda x: -((x - 1) ** 2)),
        ("--x", lambda x: x),
    ],
)
def test_parse_and_evaluate(text, f):
    assert np.allclose(parse_expression(text)(X), f(X), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize(
    "text, col",
    [("x +", 4), ("2*y", 3), ("exp(x^2)", 1), ("x^1.5", 3), ("(x", 3), ("x $ 1", 3), ("x x", 3)],
)
def test_parse_errors_report_column(text, col):
    with pytest.raises(ExpressionError) as err:
        parse_expression(text)
    assert err.value.pos == col - 1
    assert f"column {col}" in str(err.value)


def test_empty_expression():
    with pytest.raises(ExpressionError):
        parse_expression("   ")


polys = st.lists(st.integers(min_value=-5, max_value=5), min_size=1, max_size=6)
lams = st.sampled_from([0.0, -1.0, 0.5, 2.0])


def _to_sympy(c, lam):
    x = sp.Symbol("x")
    return sum(sp.Integer(v) * x**k for k, v in enumerate(c)) * sp.exp(sp.Rational(lam).limit_denominator() * x)


@given(polys, lams, polys, lams, st.integers(min_value=0, max_value=4))
def test_derivative_and_product_match_sympy(c1, l1, c2, l2, k):
    x = sp.Symbol("x")
    f = ExpPoly.from_dict({l1: tuple(c1)}) * ExpPoly.from_dict({l2: tuple(c2)}) + ExpPoly.from_dict({l2: tuple(c1)})
    g = sp.diff(_to_sympy(c1, l1) * _to_sympy(c2, l2) + _to_sympy(c1, l2), x, k)
    ref = sp.lambdify(x, g, "numpy")
    xs = np.linspace(0.0, 1.0, 9)
    want = np.broadcast_to(np.asarray(ref(xs), dtype=float), xs.shape)
    got = f.deriv(k)(xs)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-9 * max(1.0, np.max(np.abs(want))))


def test_roots_of_polynomial_and_mixed():
    assert np.allclose(parse_expression("(x-0.25)*(x-0.75)").roots(0.0, 1.0), [0.25, 0.75])
    assert np.allclose(parse_expression("x - exp(-x)").roots(0.0, 1.0), [0.5671432904097838])
    assert parse_expression("x^2 + 1").roots(0.0, 1.0).size == 0


def test_zero_order():
    f = parse_expression("x^3*(x-1)")
    assert f.zero_order(0.0) == 3
    assert f.zero_order(1.0) == 1
    assert f.zero_order(0.5) == 0


def test_ratio_fills_removable_endpoint():
    r = Ratio(parse_expression("x"), parse_expression("x"), 2)
    assert r(0.0) == 0.0
    r = Ratio(parse_expression("x"), parse_expression("x^2"), 2)
    assert r(0.0) == pytest.approx(1.0)
    assert math.isinf(Ratio(parse_expression("1"), parse_expression("x"), 2).limit_at(0.0))


def test_degree_cap():
    with pytest.raises(ExpressionError):
        parse_expression("x^40")
