import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermoloop.expr import Expression, ExpressionError

LOCAL = ("x", "y", "z", "t")


@pytest.mark.parametrize(
    "src, values, expected",
    [
        ("30*sin(x*z)", dict(x=0.5, z=2.0), 30 * math.sin(1.0)),
        ("x*y*cos(5*t)", dict(x=2.0, y=3.0, t=0.1), 6 * math.cos(0.5)),
        ("15*sin(2*t)+12*cos(3*t)", dict(t=1.0), 15 * math.sin(2) + 12 * math.cos(3)),
        ("-x**2 / 4 - (y - 1)", dict(x=2.0, y=3.0), -3.0),
        ("exp(-t) * tanh(z) + pi", dict(t=0.0, z=0.0), math.pi),
        ("2.5e-1", {}, 0.25),
    ],
)
def test_evaluates(src, values, expected):
    e = Expression.parse(src, LOCAL)
    full = dict(x=0.0, y=0.0, z=0.0, t=0.0) | values
    assert e(**full) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize(
    "src",
    [
        "x1 + 1",  # cross-loop names are not local variables
        "__import__('os')",
        "sin(x, y)",
        "log(x)",
        "x if y else z",
        "x[0]",
        "lambda: 1",
        "x.real",
        "x ==",
        "",
        "'text'",
        "x // 2",
    ],
)
def test_rejects(src):
    with pytest.raises(ExpressionError):
        Expression.parse(src, LOCAL)


def test_error_names_offender():
    with pytest.raises(ExpressionError, match="x1"):
        Expression.parse("sin(x1)", LOCAL)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_matches_python_arithmetic(a, b):
    e = Expression.parse("x*y - 3*x + y/7", ("x", "y"))
    assert e(x=a, y=b) == a * b - 3 * a + b / 7
