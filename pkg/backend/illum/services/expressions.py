"""
Evaluation and substitution of ILLUM expressions
"""

import logging
from typing import Callable, Dict, FrozenSet, Mapping

from illum.core.encoding import digest
from illum.core.errors import TypeMismatch, UnboundParameter
from illum.models.illum_ast import (
    BinOp, Cond, Const, Contains, EmptyMap, Expr, GetOr, Hash, Lookup, Not, Size,
    Update, Var, walk,
)
from illum.models.values import (
    EMPTY_MAP, STAR, MapValue, Participant, check_int, normalize_value, value_type,
)

logger = logging.getLogger(__name__)

Env = Mapping[str, object]


def int_size(value: int) -> int:
    """Byte length of the minimal two's-complement encoding (0 for 0)"""
    if value == 0:
        return 0
    length = 1
    while not -(1 << (8 * length - 1)) <= value < (1 << (8 * length - 1)):
        length += 1
    return length


def value_size(value) -> int:
    value = normalize_value(value)
    if isinstance(value, bytes):
        return len(value)
    if isinstance(value, MapValue):
        return len(value)
    if isinstance(value, int):
        return int_size(value)
    raise TypeMismatch(f"size of {value_type(value)} is undefined", value=str(value))


def truth(value) -> bool:
    value = normalize_value(value)
    if not isinstance(value, int):
        raise TypeMismatch(f"expected a boolean, got {value_type(value)}", value=str(value))
    return value != 0


def _as_int(value, op: str) -> int:
    value = normalize_value(value)
    if not isinstance(value, int):
        raise TypeMismatch(f"operator {op} expects integers, got {value_type(value)}", op=op)
    return value


def _as_map(value, op: str) -> MapValue:
    if not isinstance(value, MapValue):
        raise TypeMismatch(f"{op} expects a map, got {value_type(value)}", op=op)
    return value


def values_equal(left, right) -> bool:
    left, right = normalize_value(left), normalize_value(right)
    if value_type(left) != value_type(right):
        raise TypeMismatch(
            f"cannot compare {value_type(left)} with {value_type(right)}",
            left=str(left), right=str(right),
        )
    return left == right


def apply_binary(op: str, left, right):
    """Strict binary operators shared by the symbolic and script evaluators"""
    if op == "+":
        return check_int(_as_int(left, op) + _as_int(right, op))
    if op == "-":
        return check_int(_as_int(left, op) - _as_int(right, op))
    if op == "==":
        return int(values_equal(left, right))
    if op == "!=":
        return int(not values_equal(left, right))
    a, b = _as_int(left, op), _as_int(right, op)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    raise TypeMismatch(f"unknown operator {op}", op=op)


def eval_expr(e: Expr, env: Env):
    """Reduce an expression to a value under ``env``"""
    if isinstance(e, Const):
        if e.value is STAR:
            raise UnboundParameter("the placeholder ? has no value")
        return normalize_value(e.value)
    if isinstance(e, Var):
        if e.name not in env:
            raise UnboundParameter(f"parameter {e.name} is not bound", name=e.name)
        value = env[e.name]
        if value is STAR:
            raise UnboundParameter(f"parameter {e.name} is bound to ?", name=e.name)
        return normalize_value(value)
    if isinstance(e, BinOp):
        if e.op == "and":
            return int(truth(eval_expr(e.left, env)) and truth(eval_expr(e.right, env)))
        if e.op == "or":
            return int(truth(eval_expr(e.left, env)) or truth(eval_expr(e.right, env)))
        return apply_binary(e.op, eval_expr(e.left, env), eval_expr(e.right, env))
    if isinstance(e, Not):
        return int(not truth(eval_expr(e.arg, env)))
    if isinstance(e, Size):
        return value_size(eval_expr(e.arg, env))
    if isinstance(e, Hash):
        return digest(eval_expr(e.arg, env))
    if isinstance(e, Cond):
        if truth(eval_expr(e.test, env)):
            return eval_expr(e.then, env)
        return eval_expr(e.orelse, env)
    if isinstance(e, Lookup):
        return _as_map(eval_expr(e.map, env), "lookup").lookup(eval_expr(e.key, env))
    if isinstance(e, Update):
        m = _as_map(eval_expr(e.map, env), "update")
        return m.update(eval_expr(e.key, env), eval_expr(e.value, env))
    if isinstance(e, Contains):
        return int(_as_map(eval_expr(e.map, env), "contains").contains(eval_expr(e.key, env)))
    if isinstance(e, GetOr):
        m = _as_map(eval_expr(e.map, env), "get")
        key = eval_expr(e.key, env)
        if m.contains(key):
            return m.lookup(key)
        return eval_expr(e.default, env)
    if isinstance(e, EmptyMap):
        return EMPTY_MAP
    raise TypeMismatch(f"not an expression: {e!r}")


def free_names(e: Expr) -> FrozenSet[str]:
    return frozenset(node.name for node in walk(e) if isinstance(node, Var))


def map_expr(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    """Bottom-up rewrite: children first, then ``fn`` on the rebuilt node"""
    if isinstance(e, BinOp):
        e = BinOp(e.op, map_expr(e.left, fn), map_expr(e.right, fn))
    elif isinstance(e, Not):
        e = Not(map_expr(e.arg, fn))
    elif isinstance(e, Size):
        e = Size(map_expr(e.arg, fn))
    elif isinstance(e, Hash):
        e = Hash(map_expr(e.arg, fn))
    elif isinstance(e, Cond):
        e = Cond(map_expr(e.test, fn), map_expr(e.then, fn), map_expr(e.orelse, fn))
    elif isinstance(e, Lookup):
        e = Lookup(map_expr(e.map, fn), map_expr(e.key, fn))
    elif isinstance(e, Update):
        e = Update(map_expr(e.map, fn), map_expr(e.key, fn), map_expr(e.value, fn))
    elif isinstance(e, Contains):
        e = Contains(map_expr(e.map, fn), map_expr(e.key, fn))
    elif isinstance(e, GetOr):
        e = GetOr(map_expr(e.map, fn), map_expr(e.key, fn), map_expr(e.default, fn))
    return fn(e)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace parameter references by expressions, simultaneously"""
    return map_expr(e, lambda node: mapping.get(node.name, node) if isinstance(node, Var) else node)


def close(e: Expr, env: Env) -> Const:
    """Evaluate to a constant expression"""
    return Const(eval_expr(e, env))


def participant(value) -> Participant:
    if not isinstance(value, Participant):
        raise TypeMismatch(f"expected a participant, got {value_type(value)}", value=str(value))
    return value


def env_of(names, values) -> Dict[str, object]:
    return dict(zip(names, values))
