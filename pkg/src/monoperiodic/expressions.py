"""Arithmetic expressions from config files, compiled to numpy callables.

Only numbers, the named variables, ``+ - * / ** %``, unary signs and calls
to a fixed set of numpy functions are accepted; anything else is rejected
before evaluation.
"""
from __future__ import annotations

import ast
import math

import numpy as np

FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "arctan": np.arctan,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
    "heaviside": lambda z: np.heaviside(z, 0.5),
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod)
_CMPOPS = (ast.Lt, ast.LtE, ast.Gt, ast.GtE)


class ExpressionError(ValueError):
    pass


def _check(node, names):
    if isinstance(node, ast.Expression):
        return _check(node.body, names)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
        return
    if isinstance(node, ast.Name):
        if node.id not in names and node.id not in CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}; allowed: {sorted(names | set(CONSTANTS))}")
        return
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _check(node.left, names)
        _check(node.right, names)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        _check(node.operand, names)
        return
    if isinstance(node, ast.Compare) and all(isinstance(op, _CMPOPS) for op in node.ops):
        _check(node.left, names)
        for c in node.comparators:
            _check(c, names)
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError(f"only calls to {sorted(FUNCTIONS)} are allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed")
        for a in node.args:
            _check(a, names)
        return
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def compile_expression(source: str, variables=()):
    """Return ``f(**values)`` evaluating ``source`` with the given variable names."""
    names = set(variables)
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {source!r}: {exc.msg}") from None
    _check(tree, names)
    code = compile(tree, "<expression>", "eval")
    env = {"__builtins__": {}, **FUNCTIONS, **CONSTANTS}

    def f(**values):
        unknown = set(values) - names
        if unknown:
            raise ExpressionError(f"unexpected variables {sorted(unknown)}")
        return eval(code, env, values)

    f.source = source
    return f


def evaluate_number(value) -> float:
    """Numbers pass through; strings such as ``"2*pi"`` are evaluated."""
    if isinstance(value, bool):
        raise ExpressionError("expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return float(compile_expression(value)())
    raise ExpressionError(f"expected a number or expression, got {value!r}")


def pointwise_rhs(source: str):
    """``f(x, t, u, v)`` from an expression, broadcast to the shape of ``u``."""
    expr = compile_expression(source, ("x", "t", "u", "v"))

    def f(x, t, u, v):
        val = np.asarray(expr(x=x, t=t, u=u, v=v), dtype=float)
        return np.broadcast_to(val, np.broadcast(u, val).shape).copy()

    f.source = source
    return f


def profile(source: str):
    """``g(t, x)`` from an expression in ``t`` and ``x``."""
    expr = compile_expression(source, ("t", "x"))

    def g(t, x=0.0):
        return np.asarray(expr(t=t, x=x), dtype=float) + 0.0 * np.asarray(t) + 0.0 * np.asarray(x)

    g.source = source
    return g
