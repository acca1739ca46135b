import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flattrace.fields import (
    ExprField, FuncField, ParseError, as_field, bump_field, parse_expr,
)


def test_parse_and_eval_basics():
    f = ExprField("x^2 + 3*y - sin(x*y) / 2")
    x, y = 0.7, -0.3
    assert np.isclose(f.ev(x, y), x**2 + 3*y - np.sin(x*y)/2)


def test_parse_constants_and_functions():
    f = ExprField("exp(x) + log(y) + sqrt(y) + cosh(x) - sinh(x) + cos(pi) + e")
    val = f.ev(0.5, 2.0)
    expect = np.exp(0.5) + np.log(2.0) + np.sqrt(2.0) + np.cosh(0.5) - np.sinh(0.5) - 1.0 + np.e
    assert np.isclose(val, expect)


@pytest.mark.parametrize("bad", ["x +", "foo(x)", "x $ y", "zeta", "(x"])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_expr(bad)


def test_symbolic_derivative_matches_fd():
    f = ExprField("exp(x*y) * sin(x) + y^3 / (1 + x^2)")
    fx = f.d("x")
    fy = f.d("y")
    x, y = 0.4, 0.9
    h = 1e-6
    assert np.isclose(fx.ev(x, y), (f.ev(x+h, y) - f.ev(x-h, y))/(2*h), atol=1e-8)
    assert np.isclose(fy.ev(x, y), (f.ev(x, y+h) - f.ev(x, y-h))/(2*h), atol=1e-8)


def test_second_derivative_exact():
    f = ExprField("x^2 * y + cos(y)")
    assert np.isclose(f.d("x").d("x").ev(1.3, 0.2), 2*0.2)
    assert np.isclose(f.d("y").d("y").ev(1.3, 0.2), -np.cos(0.2))


def test_funcfield_fd_derivative():
    g = FuncField(lambda x, y: np.exp(x) * np.cos(y))
    assert np.isclose(g.d("x").ev(0.3, 0.5), np.exp(0.3)*np.cos(0.5), atol=1e-9)
    # nested FD second derivative stays accurate to ~1e-6
    assert np.isclose(g.d("x").d("y").ev(0.3, 0.5), -np.exp(0.3)*np.sin(0.5), atol=1e-6)


def test_field_algebra():
    a = ExprField("x + y")
    b = ExprField("x * y")
    combo = 2.0 * a + b * a - 1.5
    x, y = 0.8, -0.4
    expect = 2*(x+y) + (x*y)*(x+y) - 1.5
    assert np.isclose(combo.ev(x, y), expect)
    h = 1e-6
    assert np.isclose(combo.d("x").ev(x, y),
                      (combo.ev(x+h, y) - combo.ev(x-h, y))/(2*h), atol=1e-8)


def test_complex_scales():
    a = ExprField("x")
    b = ExprField("y")
    z = a + 1j * b
    assert np.isclose(z.ev(0.3, 0.7), 0.3 + 0.7j)
    assert np.isclose(z.d("y").ev(0.3, 0.7), 1j)


def test_bump_support_and_smoothness():
    b = bump_field(0.0, 1.0, 0.5, amplitude=2.0)
    assert b.ev(0.0, 1.0) == pytest.approx(2.0)        # peak value = amplitude
    assert b.ev(0.6, 1.0) == 0.0                       # outside support
    assert b.ev(0.5, 1.0) == 0.0                       # boundary
    # derivatives vanish outside and at the boundary, finite inside
    bx = b.d("x")
    assert bx.ev(0.7, 1.2) == 0.0
    assert np.isfinite(bx.ev(0.2, 1.1))
    # symbolic derivative matches FD inside the support
    h = 1e-6
    x, y = 0.21, 0.87
    assert np.isclose(bx.ev(x, y), (b.ev(x+h, y) - b.ev(x-h, y))/(2*h), atol=1e-6)
    # second derivatives also match FD
    bxx = bx.d("x")
    assert np.isclose(bxx.ev(x, y), (bx.ev(x+h, y) - bx.ev(x-h, y))/(2*h), atol=1e-5)


def test_bump_vectorized():
    b = bump_field(0.0, 0.0, 1.0)
    x = np.linspace(-2, 2, 41)
    y = np.zeros_like(x)
    vals = b.ev(x, y)
    assert vals.shape == x.shape
    assert np.all(vals[np.abs(x) >= 1.0] == 0.0)
    assert np.all(np.isfinite(vals))


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_expr_derivative_property(x, y):
    f = ExprField("sin(x)*cosh(y) + x^3*y")
    h = 1e-5
    fd = (f.ev(x+h, y) - f.ev(x-h, y)) / (2*h)
    assert np.isclose(f.d("x").ev(x, y), fd, atol=1e-7, rtol=1e-7)


def test_as_field_coercions():
    assert np.isclose(as_field(3.5).ev(0, 0), 3.5)
    assert np.isclose(as_field("x+1").ev(2.0, 0.0), 3.0)
    assert np.isclose(as_field(lambda x, y: x - y).ev(5.0, 2.0), 3.0)
    with pytest.raises(TypeError):
        as_field(object())
