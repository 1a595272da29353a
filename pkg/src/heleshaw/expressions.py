"""Closed-form initial-data expressions over (x, y).

A deliberately small arithmetic grammar: +, -, *, /, ^ (or **), exp, sin,
cos, numeric literals, and the names x, y, pi, e.  Input is parsed to an
AST and walked against a whitelist before compilation, so nothing outside
the grammar can execute.
"""

from __future__ import annotations

import ast
import math
from typing import Callable

import numpy as np


class ExpressionError(ValueError):
    """Initial-data expression outside the supported grammar."""


_FUNCTIONS: dict[str, Callable] = {"exp": np.exp, "sin": np.sin, "cos": np.cos}
_CONSTANTS: dict[str, float] = {"pi": math.pi, "e": math.e}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARYOPS = (ast.UAdd, ast.USub)


def _validate(node: ast.AST, source: str):
    if isinstance(node, ast.Expression):
        _validate(node.body, source)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _validate(node.left, source)
        _validate(node.right, source)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARYOPS):
        _validate(node.operand, source)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"literal {node.value!r} is not numeric")
    elif isinstance(node, ast.Name):
        if node.id not in ("x", "y") and node.id not in _CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r} in {source!r}")
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError(f"unsupported function call in {source!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _validate(node.args[0], source)
    else:
        raise ExpressionError(
            f"unsupported syntax {type(node).__name__} in {source!r}"
        )


def compile_expression(source: str) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Compile an expression string to a vectorized f(x, y).

    The caret is accepted as an alias for ** so config files can write
    exp(-10*(x^2+y^2)) verbatim.
    """
    text = source.replace("^", "**").strip()
    if not text:
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from exc
    _validate(tree, source)
    code = compile(tree, "<initial-data>", "eval")
    env = {"__builtins__": {}} | _FUNCTIONS | _CONSTANTS

    def f(x, y):
        return eval(code, env, {"x": x, "y": y})

    f.__doc__ = f"initial datum {source!r}"
    return f
