"""Tiny arithmetic expression language for disturbances and reference signals.

Grammar (a strict subset of Python expression syntax)::

    expr    := expr ('+' | '-') term | term
    term    := term ('*' | '/') factor | factor
    factor  := ('+' | '-') factor | power
    power   := atom ['**' factor]
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``NAME`` is one of the variables allowed by the caller (``x``, ``y``, ``z``,
``t`` for disturbances; ``t`` only for references) or the constant ``pi``.
``FUNC`` is one of ``sin``, ``cos``, ``exp``, ``tanh``.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

FUNCTIONS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "tanh": math.tanh}
CONSTANTS = {"pi": math.pi}

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARYOPS = (ast.UAdd, ast.USub)


class ExpressionError(ValueError):
    """Raised for expressions outside the grammar."""


def _check(node: ast.AST, variables: frozenset[str], source: str) -> set[str]:
    if isinstance(node, ast.Expression):
        return _check(node.body, variables, source)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric constant {node.value!r} in {source!r}")
        return set()
    if isinstance(node, ast.Name):
        if node.id in variables:
            return {node.id}
        if node.id in CONSTANTS:
            return set()
        allowed = ", ".join(sorted(variables))
        raise ExpressionError(f"unknown name {node.id!r} in {source!r} (allowed: {allowed}, pi)")
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        return _check(node.left, variables, source) | _check(node.right, variables, source)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARYOPS):
        return _check(node.operand, variables, source)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError(f"unsupported function call in {source!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id}() takes exactly one argument in {source!r}")
        return _check(node.args[0], variables, source)
    raise ExpressionError(f"unsupported syntax {type(node).__name__} in {source!r}")


@dataclass(frozen=True)
class Expression:
    """A parsed expression, callable with keyword variables.

    >>> Expression.parse("30*sin(x*z)", {"x", "y", "z", "t"})(x=0.0, y=1.0, z=2.0, t=0.0)
    0.0
    """

    source: str
    variables: frozenset[str]
    used: frozenset[str]
    _code: object = field(repr=False, compare=False)

    @classmethod
    def parse(cls, source: str, variables) -> "Expression":
        variables = frozenset(variables)
        text = source.strip()
        if not text:
            raise ExpressionError("empty expression")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        used = _check(tree, variables, text)
        code = compile(tree, "<expression>", "eval")
        return cls(text, variables, frozenset(used), code)

    def __call__(self, **values: float) -> float:
        env = dict(FUNCTIONS)
        env.update(CONSTANTS)
        env.update(values)
        return float(eval(self._code, {"__builtins__": {}}, env))

    def __str__(self) -> str:
        return self.source
