"""Small infix expression language over named features.

Arithmetic: ``+ - * /``, integer powers (``^`` or ``**``), ``min``, ``max``,
``sqrt`` and numeric constants. Boolean predicates additionally allow the
comparisons ``== != < <= > >=`` combined with ``and``, ``or``, ``not``.

Parsing is delegated to :mod:`ast`; the resulting tree is translated into the
node types below, which evaluate column-wise on numpy arrays and carry exact
forward-mode derivatives.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DomainError, EvaluationError, ParseError

Array = np.ndarray


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str  # min, max, sqrt
    args: tuple


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and, or
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Pow, Call, Compare, BoolOp, Not]

_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}
_CMPOPS = {
    ast.Eq: "==",
    ast.NotEq: "!=",
    ast.Lt: "<",
    ast.LtE: "<=",
    ast.Gt: ">",
    ast.GtE: ">=",
}
_FUNCS = {"min": (2, None), "max": (2, None), "sqrt": (1, 1)}


def parse(text: str) -> Node:
    """Parse ``text`` into an expression tree.

    >>> parse("min(x1, x2)")
    Call(func='min', args=(Var(name='x1'), Var(name='x2')))
    """
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _translate(tree.body, text)


def _translate(node: ast.AST, text: str) -> Node:
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ParseError(f"unsupported constant {node.value!r} in {text!r}")
        return Const(float(node.value))
    if isinstance(node, ast.Name):
        return Var(node.id)
    if isinstance(node, ast.UnaryOp):
        arg = _translate(node.operand, text)
        if isinstance(node.op, ast.USub):
            return Neg(arg)
        if isinstance(node.op, ast.UAdd):
            return arg
        if isinstance(node.op, ast.Not):
            return Not(arg)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            exponent = _constant_value(node.right)
            if exponent is None or exponent != int(exponent):
                raise ParseError(f"only integer constant exponents are supported in {text!r}")
            return Pow(_translate(node.left, text), int(exponent))
        op = _BINOPS.get(type(node.op))
        if op is not None:
            return BinOp(op, _translate(node.left, text), _translate(node.right, text))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        if name in _FUNCS and not node.keywords:
            lo, hi = _FUNCS[name]
            n = len(node.args)
            if n < lo or (hi is not None and n > hi):
                raise ParseError(f"{name} takes {lo}{'' if hi == lo else '+'} arguments in {text!r}")
            return Call(name, tuple(_translate(a, text) for a in node.args))
        raise ParseError(f"unknown function {name!r} in {text!r}")
    if isinstance(node, ast.Compare):
        if len(node.ops) != 1:
            raise ParseError(f"chained comparisons are not supported in {text!r}")
        op = _CMPOPS[type(node.ops[0])]
        return Compare(op, _translate(node.left, text), _translate(node.comparators[0], text))
    if isinstance(node, ast.BoolOp):
        op = "and" if isinstance(node.op, ast.And) else "or"
        return BoolOp(op, tuple(_translate(v, text) for v in node.values))
    raise ParseError(f"unsupported syntax {ast.dump(node)} in {text!r}")


def _constant_value(node: ast.AST):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        inner = _constant_value(node.operand)
        return None if inner is None else -inner
    return None


def variables(node: Node) -> tuple[str, ...]:
    """Feature names referenced by ``node`` in order of first appearance."""
    seen: dict[str, None] = {}

    def walk(n):
        if isinstance(n, Var):
            seen.setdefault(n.name, None)
        elif isinstance(n, (Neg, Not)):
            walk(n.arg)
        elif isinstance(n, (BinOp, Compare)):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, Pow):
            walk(n.base)
        elif isinstance(n, (Call, BoolOp)):
            for a in n.args:
                walk(a)

    walk(node)
    return tuple(seen)


def to_string(node: Node) -> str:
    """Render ``node`` back to fully parenthesised infix text."""
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_string(node.arg)})"
    if isinstance(node, Not):
        return f"(not {to_string(node.arg)})"
    if isinstance(node, (BinOp, Compare)):
        return f"({to_string(node.left)} {node.op} {to_string(node.right)})"
    if isinstance(node, Pow):
        return f"({to_string(node.base)} ^ {node.exponent})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_string(a) for a in node.args)})"
    if isinstance(node, BoolOp):
        return "(" + f" {node.op} ".join(to_string(a) for a in node.args) + ")"
    raise TypeError(node)


def _lookup(env: Mapping[str, Array], name: str) -> Array:
    try:
        return env[name]
    except KeyError:
        raise EvaluationError(f"missing feature {name!r}") from None


def evaluate(node: Node, env: Mapping[str, Array]) -> Array:
    """Evaluate ``node`` column-wise; ``env`` maps feature names to arrays."""
    return _eval(node, env, None)[0]


def derivative(node: Node, env: Mapping[str, Array], wrt: str) -> Array:
    """Exact partial derivative of ``node`` with respect to feature ``wrt``."""
    return _eval(node, env, wrt)[1]


def _eval(node: Node, env, wrt):
    # Returns (value, d value / d wrt); the derivative is None when wrt is None.
    grad = wrt is not None
    if isinstance(node, Const):
        return node.value, (0.0 if grad else None)
    if isinstance(node, Var):
        value = _lookup(env, node.name)
        return value, ((1.0 if node.name == wrt else 0.0) if grad else None)
    if isinstance(node, Neg):
        v, d = _eval(node.arg, env, wrt)
        return -v, (-d if grad else None)
    if isinstance(node, BinOp):
        a, da = _eval(node.left, env, wrt)
        b, db = _eval(node.right, env, wrt)
        if node.op == "+":
            return a + b, (da + db if grad else None)
        if node.op == "-":
            return a - b, (da - db if grad else None)
        if node.op == "*":
            return a * b, (da * b + a * db if grad else None)
        if np.any(np.asarray(b) == 0):
            raise DomainError(f"division by zero in {to_string(node)}")
        return a / b, ((da * b - a * db) / (b * b) if grad else None)
    if isinstance(node, Pow):
        a, da = _eval(node.base, env, wrt)
        k = node.exponent
        if k < 0 and np.any(np.asarray(a) == 0):
            raise DomainError(f"zero raised to a negative power in {to_string(node)}")
        if k == 0:
            return np.ones_like(np.asarray(a, dtype=float)), (0.0 if grad else None)
        return a**k, (k * a ** (k - 1) * da if grad else None)
    if isinstance(node, Call):
        evaluated = [_eval(a, env, wrt) for a in node.args]
        if node.func == "sqrt":
            a, da = evaluated[0]
            if np.any(np.asarray(a) < 0):
                raise DomainError(f"square root of a negative number in {to_string(node)}")
            root = np.sqrt(a)
            if grad:
                if np.any(root == 0) and np.any(np.asarray(da) != 0):
                    raise DomainError(f"derivative of sqrt at zero in {to_string(node)}")
                with np.errstate(divide="ignore", invalid="ignore"):
                    d = np.where(root == 0, 0.0, da / (2 * np.where(root == 0, 1.0, root)))
                return root, d
            return root, None
        values = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v, _ in evaluated])
        stacked = np.stack(values)
        # ties resolve to the first argument
        pick = np.argmin(stacked, axis=0) if node.func == "min" else np.argmax(stacked, axis=0)
        value = np.take_along_axis(stacked, pick[None], axis=0)[0]
        if not grad:
            return value, None
        dstack = np.stack(np.broadcast_arrays(*[np.asarray(d, dtype=float) for _, d in evaluated], stacked[0]))[:-1]
        return value, np.take_along_axis(dstack, pick[None], axis=0)[0]
    if isinstance(node, Compare):
        a = np.asarray(_eval(node.left, env, None)[0])
        b = np.asarray(_eval(node.right, env, None)[0])
        result = {
            "==": np.equal,
            "!=": np.not_equal,
            "<": np.less,
            "<=": np.less_equal,
            ">": np.greater,
            ">=": np.greater_equal,
        }[node.op](a, b)
        return result, None
    if isinstance(node, BoolOp):
        parts = [np.asarray(_eval(a, env, None)[0], dtype=bool) for a in node.args]
        combine = np.logical_and if node.op == "and" else np.logical_or
        out = parts[0]
        for p in parts[1:]:
            out = combine(out, p)
        return out, None
    if isinstance(node, Not):
        return np.logical_not(np.asarray(_eval(node.arg, env, None)[0], dtype=bool)), None
    raise TypeError(f"not an expression node: {node!r}")
