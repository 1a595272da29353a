"""Initial-data expression grammar: accepted forms and rejected syntax."""

import numpy as np
import pytest

from heleshaw.expressions import ExpressionError, compile_expression


def test_basic_arithmetic():
    f = compile_expression("x^2 + y^2")
    assert f(2.0, 3.0) == 13.0


def test_double_star_power_alias():
    f = compile_expression("x**3")
    assert f(2.0, 0.0) == 8.0


def test_vectorized_over_arrays():
    f = compile_expression("0.5*exp(-10*(x^2+y^2))")
    x = np.linspace(-1, 1, 7)
    y = np.zeros(7)
    assert np.allclose(f(x, y), 0.5 * np.exp(-10.0 * x ** 2))


def test_constants_and_functions():
    f = compile_expression("cos(pi) + sin(0)")
    assert abs(f(0.0, 0.0) - (-1.0)) < 1e-15


def test_unary_minus_and_division():
    f = compile_expression("-x / 4")
    assert f(2.0, 0.0) == -0.5


@pytest.mark.parametrize("bad", [
    "",
    "x +",
    "__import__('os')",
    "x.real",
    "open('f')",
    "exp(x, 2)",
    "exp()",
    "z + 1",
    "x < y",
    "lambda x: x",
    "[1, 2]",
    "x // y",
    "f'{x}'",
])
def test_rejects_outside_grammar(bad):
    with pytest.raises(ExpressionError):
        compile_expression(bad)


def test_no_builtins_leak():
    # names resolve only through the whitelist, never through builtins
    with pytest.raises(ExpressionError):
        compile_expression("abs(x)")
