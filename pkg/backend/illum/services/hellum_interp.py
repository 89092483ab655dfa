"""
Reference interpreter for HeLLUM.

A call either returns the new contract state with the transfers it made, or raises
Revert (the body failed) or ModifierUnsatisfied (the call could not start). Strings
are held as UTF-8 bytes so states compare directly with clause arguments.
"""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from illum.core.errors import EvalError, HellumTypeError, ModifierUnsatisfied, Revert, ScenarioError
from illum.models.hellum_ast import (
    Assign, Balance, Binary, BoolLit, Function, HExpr, HType, IfStmt, IntLit, LocalDecl,
    LogicalNot, MapAssign, MapRead, MapType, Name, NullLit, Require, Return, Stmt, StrLit,
    Transfer, ViewCall,
)
from illum.models.values import EMPTY_MAP, NULL, MapValue, Participant, TokenBag, ZERO, check_int
from illum.services.hellum_typecheck import TypedContract

logger = logging.getLogger(__name__)


def zero_value(t: HType):
    if isinstance(t, MapType):
        return EMPTY_MAP
    return {"bool": False, "int": 0, "uint": 0, "string": b"", "address": NULL}[t]


@dataclass(frozen=True)
class HllState:
    """Contract storage between calls; ``continuations`` lists the functions callable next"""
    variables: Tuple[Tuple[str, object], ...]
    balances: TokenBag = ZERO
    time: int = 0
    continuations: Tuple[str, ...] = ()
    terminated: bool = False

    def get(self, name: str):
        for k, v in self.variables:
            if k == name:
                return v
        raise KeyError(name)

    def store(self) -> Dict[str, object]:
        return dict(self.variables)


@dataclass(frozen=True)
class CallResult:
    state: HllState
    transfers: Tuple[Tuple[Participant, TokenBag], ...] = ()


def initial_state(typed: TypedContract, time: int = 0) -> HllState:
    variables = tuple((v.name, zero_value(v.type)) for v in typed.contract.variables)
    return HllState(variables, ZERO, time, ("constructor",))


class _Frame:
    def __init__(self, typed: TypedContract, store: Dict[str, object], params: Dict[str, object],
                 balances: Dict[str, int], param_types: Optional[Dict[str, HType]] = None):
        self.typed = typed
        self.store = store
        self.params = params
        self.param_types: Dict[str, HType] = param_types or {}
        self.locals: Dict[str, object] = {}
        self.local_types: Dict[str, HType] = {}
        self.balances = balances
        self.transfers: List[Tuple[Participant, TokenBag]] = []

    # Expressions

    def eval(self, e: HExpr):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, StrLit):
            return e.value.encode("utf-8")
        if isinstance(e, NullLit):
            return NULL
        if isinstance(e, Name):
            for scope in (self.locals, self.params, self.store):
                if e.name in scope:
                    return scope[e.name]
            raise HellumTypeError(f"unbound name {e.name}")
        if isinstance(e, Balance):
            return self.balances.get(e.token, 0)
        if isinstance(e, MapRead):
            m = self.eval(e.base)
            t = self.typed.state_types[e.base.name]
            return m.get(self.eval(e.key), zero_value(t.value))
        if isinstance(e, LogicalNot):
            return not self.eval(e.arg)
        if isinstance(e, ViewCall):
            view = self.typed.contract.function(e.name)
            args = {p.name: self.eval(a) for p, a in zip(view.params, e.args)}
            frame = _Frame(self.typed, self.store, args, self.balances)
            return frame.eval(view.body[0].value)
        if isinstance(e, Binary):
            if e.op == "&&":
                return bool(self.eval(e.left)) and bool(self.eval(e.right))
            if e.op == "||":
                return bool(self.eval(e.left)) or bool(self.eval(e.right))
            left, right = self.eval(e.left), self.eval(e.right)
            if e.op == "==":
                return left == right
            if e.op == "!=":
                return left != right
            try:
                if e.op == "+":
                    return check_int(left + right)
                if e.op == "-":
                    return check_int(left - right)
            except EvalError as err:
                raise Revert(err.message)
            return {"<": left < right, "<=": left <= right, ">": left > right, ">=": left >= right}[e.op]
        raise HellumTypeError(f"cannot evaluate {e!r}")

    # Statements

    def _assign_checked(self, t: HType, value, what: str):
        if t == "uint" and value < 0:
            raise Revert(f"uint {what} would become {value}")
        return value

    def run(self, stmts: Sequence[Stmt]):
        for s in stmts:
            self.execute(s)

    def execute(self, s: Stmt):
        if isinstance(s, LocalDecl):
            value = zero_value(s.type) if s.value is None else self.eval(s.value)
            self.locals[s.name] = self._assign_checked(s.type, value, s.name)
            self.local_types[s.name] = s.type
        elif isinstance(s, Assign):
            value = self.eval(s.value)
            if s.target in self.locals:
                self.locals[s.target] = self._assign_checked(self.local_types[s.target], value, s.target)
            elif s.target in self.params:
                self.params[s.target] = self._assign_checked(self.param_types.get(s.target), value, s.target)
            else:
                self.store[s.target] = self._assign_checked(self.typed.state_types[s.target], value, s.target)
        elif isinstance(s, MapAssign):
            key, value = self.eval(s.key), self.eval(s.value)
            t = self.typed.state_types[s.target]
            self._assign_checked(t.value, value, f"{s.target}[{key}]")
            self.store[s.target] = self.store[s.target].update(key, value)
        elif isinstance(s, IfStmt):
            if self.eval(s.test):
                self.run(s.then)
            else:
                self.run(s.orelse)
        elif isinstance(s, Require):
            if not self.eval(s.test):
                raise Revert("require failed")
        elif isinstance(s, Transfer):
            recipient, amount = self.eval(s.recipient), self.eval(s.amount)
            if amount < 0:
                raise Revert(f"negative transfer {amount}")
            if self.balances.get(s.token, 0) < amount:
                raise Revert(f"balance {self.balances.get(s.token, 0)}:{s.token} below {amount}")
            self.balances[s.token] = self.balances.get(s.token, 0) - amount
            self.transfers.append((recipient, TokenBag.single(amount, s.token)))
        elif isinstance(s, Return):
            raise HellumTypeError("return outside a view")


def _bind_params(f: Function, args: Sequence) -> Dict[str, object]:
    if len(args) != len(f.params):
        raise ScenarioError(f"{f.name} takes {len(f.params)} arguments, got {len(args)}")
    bound = {}
    for p, value in zip(f.params, args):
        if p.type == "uint" and value < 0:
            raise Revert(f"uint parameter {p.name} is {value}")
        bound[p.name] = value
    return bound


def _execute(typed: TypedContract, state: HllState, f: Function, args: Sequence, paid: TokenBag,
             auths: FrozenSet[Participant], time: int) -> CallResult:
    if time < state.time:
        raise ScenarioError(f"call at time {time} precedes {state.time}")
    params = _bind_params(f, args)
    store = state.store()
    frame = _Frame(typed, store, params, dict(state.balances.items), {p.name: p.type for p in f.params})
    for t in f.afters:
        if frame.eval(t) > time:
            raise ModifierUnsatisfied(f"{f.name} waits until {frame.eval(t)}, now {time}")
    for who in f.auths:
        if frame.eval(who) not in auths:
            raise ModifierUnsatisfied(f"{f.name} needs authorization by {frame.eval(who)}")
    received = ZERO
    for inp in f.inputs:
        amount = frame.eval(inp.amount)
        if amount < 0:
            raise ModifierUnsatisfied(f"{f.name} asks for a negative input {amount}")
        received = received + TokenBag.single(amount, inp.token)
    if not paid.covers(received):
        raise ModifierUnsatisfied(f"{f.name} needs {received}, paid {paid}")
    for token, amount in received.items:
        frame.balances[token] = frame.balances.get(token, 0) + amount
    frame.run(f.body)
    terminated = f.next == ()
    new_state = HllState(
        tuple((v.name, store[v.name]) for v in typed.contract.variables),
        TokenBag.of(frame.balances),
        time,
        typed.contract.continuations(f),
        terminated,
    )
    return CallResult(new_state, tuple(frame.transfers))


def deploy(typed: TypedContract, args: Sequence, paid: TokenBag = ZERO,
           auths: FrozenSet[Participant] = frozenset(), time: int = 0) -> CallResult:
    """Run the constructor on the zero state"""
    return _execute(typed, initial_state(typed, time), typed.contract.constructor, args, paid, auths, time)


def interp_call(typed: TypedContract, state: HllState, name: str, args: Sequence, paid: TokenBag = ZERO,
                auths: FrozenSet[Participant] = frozenset(), time: Optional[int] = None) -> CallResult:
    """Call ``name`` on ``state``; a function outside the continuation set is rejected before any effect"""
    time = state.time if time is None else time
    f = typed.contract.function(name)
    if f is None or f.view or f.is_constructor:
        raise ModifierUnsatisfied(f"{name} is not a callable function")
    if state.terminated or name not in state.continuations:
        raise ModifierUnsatisfied(f"{name} is not a continuation of the last call")
    result = _execute(typed, state, f, args, paid, auths, time)
    logger.debug(f"{typed.name}.{name}{tuple(args)} -> {result.state.store()}")
    return result


def to_clause_value(value):
    """A HeLLUM value as it appears among clause arguments"""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, MapValue):
        return value.map_values(to_clause_value)
    return value


def state_arguments(state: HllState) -> Tuple[object, ...]:
    return tuple(to_clause_value(v) for _, v in state.variables)
