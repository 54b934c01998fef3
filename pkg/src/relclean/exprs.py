"""Evaluation of model expressions against a name-resolution scope.

A scope supplies `lookup_name`, `lookup_chain`, and `observed_table`;
the trace, the proposal compiler, and ingestion each provide one.
"""

from __future__ import annotations

import numpy as np

from .dists.core import get_transformation
from .dsl.ast import (
    BinOp,
    Call,
    ChainExpr,
    Expr,
    IndexExpr,
    Interp,
    Literal,
    MethodCall,
    Name,
    Neg,
    ObservedValues,
    SliceExpr,
    Ternary,
)
from .values import render_value


class Scope:
    """Name resolution for expression evaluation."""

    def lookup_name(self, ident: str):
        raise KeyError(ident)

    def lookup_chain(self, parts: tuple[str, ...]):
        raise KeyError(".".join(parts))

    def observed_table(self, column: str, by: str | None):
        raise KeyError(column)


def _text(v) -> str:
    if isinstance(v, str):
        return v
    return render_value(v)


def _builtin(fn: str, args: list):
    if fn == "lowercase":
        return _text(args[0]).lower()
    if fn == "uppercase":
        return _text(args[0]).upper()
    if fn == "size":
        return len(args[0])
    if fn == "ones":
        return np.ones(int(args[0]))
    if fn == "round":
        return round(float(args[0]))
    if fn == "abs":
        return abs(args[0])
    if fn == "min":
        return min(args)
    if fn == "max":
        return max(args)
    if fn == "concat":
        return "".join(_text(a) for a in args)
    if fn == "transformations":
        return tuple(str(a) for a in args)
    if fn == "first_last":
        s = _text(args[0])
        return (s[0] + s[-1]).lower() if s else ""
    raise KeyError(f"unknown builtin {fn!r}")


DERIVE_FUNCTIONS = {
    "first_last": lambda s: (s[0] + s[-1]).lower() if s else "",
    "lowercase": lambda s: s.lower(),
    "uppercase": lambda s: s.upper(),
    "identity": lambda s: s,
    "prefix2": lambda s: s[:2].lower(),
    "prefix3": lambda s: s[:3].lower(),
}


def evaluate(expr: Expr, scope: Scope):
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Name):
        return scope.lookup_name(expr.ident)
    if isinstance(expr, ChainExpr):
        return scope.lookup_chain(expr.parts)
    if isinstance(expr, ObservedValues):
        return scope.observed_table(expr.column, expr.by)
    if isinstance(expr, IndexExpr):
        base = evaluate(expr.base, scope)
        key = evaluate(expr.key, scope)
        if isinstance(base, dict):
            return base.get(key, ())
        if callable(getattr(base, "entry", None)):
            # indexed parameter collection
            return base.entry(key)
        return base[key]
    if isinstance(expr, SliceExpr):
        s = _text(evaluate(expr.base, scope))
        return s[expr.lo - 1 : expr.hi]
    if isinstance(expr, Call):
        return _builtin(expr.fn, [evaluate(a, scope) for a in expr.args])
    if isinstance(expr, MethodCall):
        base = evaluate(expr.base, scope)
        args = [evaluate(a, scope) for a in expr.args]
        t = get_transformation(base)
        if expr.name == "backward":
            return t.backward(float(args[0]))
        if expr.name == "forward":
            return t.forward(float(args[0]))
        raise KeyError(f"unknown method {expr.name!r}")
    if isinstance(expr, Ternary):
        return (
            evaluate(expr.then, scope)
            if evaluate(expr.cond, scope)
            else evaluate(expr.other, scope)
        )
    if isinstance(expr, BinOp):
        left = evaluate(expr.left, scope)
        right = evaluate(expr.right, scope)
        op = expr.op
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        if op == "+":
            if isinstance(left, str) or isinstance(right, str):
                return _text(left) + _text(right)
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            return left / right
        if op == "<":
            return left < right
        if op == ">":
            return left > right
        if op == "<=":
            return left <= right
        if op == ">=":
            return left >= right
        raise KeyError(op)
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, scope)
    if isinstance(expr, Interp):
        return "".join(
            p if isinstance(p, str) else _text(evaluate(p, scope)) for p in expr.parts
        )
    raise TypeError(f"cannot evaluate {expr!r}")
