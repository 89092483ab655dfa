"""
Static checks for HeLLUM contracts
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Set, Tuple

from illum.core.config import settings
from illum.core.errors import AfterUsesParameter, HellumTypeError, NextTargetsConstructor, ViewHasEffect
from illum.models.hellum_ast import (
    BASE_TYPES, AfterMod, Assign, AuthMod, Balance, BalancePre, Binary, BoolLit, Function, HExpr,
    HllContract, HType, IfStmt, InputMod, IntLit, LocalDecl, LogicalNot, MapAssign, MapRead,
    MapType, MapWrite, Name, NullLit, Require, Return, Stmt, StrLit, Transfer, ViewCall, names_in,
    walk,
)

logger = logging.getLogger(__name__)

NUMERIC = ("int", "uint")

# Words the generated clauses or the source grammar claim for themselves
RESERVED = frozenset((
    "if", "then", "else", "call", "send", "auth", "after", "afterRel", "and", "or", "not",
    "true", "false", "Null", "H", "contains", "get", "emptymap", "clause", "balance",
    "balance_pre", "transfer", "constructor", "function", "contract", "next", "input", "view",
    "returns", "require", "return", "mapping",
) + BASE_TYPES)


@dataclass(frozen=True)
class TypedContract:
    contract: HllContract
    state_types: Dict[str, HType]
    tokens: Tuple[str, ...]

    @property
    def name(self) -> str:
        return self.contract.name


def compatible(expected: HType, actual: HType) -> bool:
    if expected == actual:
        return True
    return expected in NUMERIC and actual in NUMERIC


def _fail(message: str, f: Optional[Function] = None, cls=HellumTypeError, **details):
    where = f" in {f.name} (line {f.line})" if f is not None else ""
    raise cls(f"{message}{where}", **details)


class _Checker:
    def __init__(self, contract: HllContract):
        self.contract = contract
        self.state: Dict[str, HType] = {}
        self.tokens: Set[str] = set()
        self.views = {v.name: v for v in contract.views}

    def check(self) -> TypedContract:
        c = self.contract
        for var in c.variables:
            self._declare_name(var.name, self.state)
            self._check_type(var.type, allow_map=True)
            self.state[var.name] = var.type
        names: Set[str] = set()
        for f in c.functions:
            if f.name in names or f.name == "constructor":
                _fail(f"duplicate function {f.name}", f)
            if f.name in RESERVED or f.name in self.state:
                _fail(f"{f.name} cannot name a function", f)
            names.add(f.name)
        self._check_view_cycles()
        for f in (c.constructor,) + c.functions:
            self.function(f)
        return TypedContract(c, dict(self.state), tuple(sorted(self.tokens)))

    def _declare_name(self, name: str, scope: Dict[str, HType], f: Optional[Function] = None):
        if name in RESERVED or name.startswith("bal_"):
            _fail(f"{name} is reserved", f)
        if name in scope or name in self.state:
            _fail(f"{name} is already declared", f, name=name)

    def _check_type(self, t: HType, allow_map: bool, f: Optional[Function] = None):
        if isinstance(t, MapType):
            if not allow_map:
                _fail("mappings are only allowed as state variables", f)
            if t.key not in BASE_TYPES or t.value not in BASE_TYPES:
                _fail(f"bad mapping type {t}", f)
        elif t not in BASE_TYPES:
            _fail(f"unknown type {t}", f)

    def _check_view_cycles(self):
        def callees(v: Function) -> Set[str]:
            found: Set[str] = set()
            for s in v.body:
                if isinstance(s, Return):
                    found |= {n.name for n in walk(s.value) if isinstance(n, ViewCall)}
            return found

        state: Dict[str, int] = {}

        def visit(name: str):
            if state.get(name) == 1:
                _fail(f"view {name} calls itself", self.views[name])
            if state.get(name) == 2 or name not in self.views:
                return
            state[name] = 1
            for callee in callees(self.views[name]):
                visit(callee)
            state[name] = 2

        for name in self.views:
            visit(name)

    # Functions

    def function(self, f: Function):
        scope: Dict[str, HType] = {}
        for p in f.params:
            self._declare_name(p.name, scope, f)
            self._check_type(p.type, allow_map=False, f=f)
            scope[p.name] = p.type
        if f.view:
            self._view(f, scope)
            return
        if f.returns is not None:
            _fail("only views return values", f)
        for m in f.modifiers:
            if isinstance(m, AfterMod):
                if f.is_constructor:
                    _fail("the constructor cannot wait", f)
                used = names_in(m.time) & set(scope)
                if used:
                    _fail(f"after() reads parameter {sorted(used)[0]}", f, AfterUsesParameter)
                self.expect(m.time, "int", {}, f)
            elif isinstance(m, AuthMod):
                self.expect(m.who, "address", scope, f)
            else:
                self.tokens.add(m.token)
                self.expect(m.amount, "int", scope, f)
        self.block(f.body, dict(scope), f)
        if f.next is not None:
            for target in f.next:
                if target == "constructor":
                    _fail("next() names the constructor", f, NextTargetsConstructor)
                g = self.contract.function(target)
                if g is None or g.view:
                    _fail(f"next() names unknown function {target}", f)

    def _view(self, f: Function, scope: Dict[str, HType]):
        if f.modifiers or f.next is not None:
            _fail("views take no modifiers", f, ViewHasEffect)
        if f.returns is None:
            _fail("a view must declare returns(...)", f)
        if len(f.body) != 1 or not isinstance(f.body[0], Return):
            _fail("a view body is a single return", f, ViewHasEffect)
        self.expect(f.body[0].value, f.returns, scope, f)

    def block(self, stmts: Iterable[Stmt], scope: Dict[str, HType], f: Function):
        for s in stmts:
            self.statement(s, scope, f)

    def statement(self, s: Stmt, scope: Dict[str, HType], f: Function):
        if isinstance(s, LocalDecl):
            self._declare_name(s.name, scope, f)
            self._check_type(s.type, allow_map=False, f=f)
            if s.value is not None:
                self.expect(s.value, s.type, scope, f)
            scope[s.name] = s.type
        elif isinstance(s, Assign):
            target = scope.get(s.target, self.state.get(s.target))
            if target is None:
                _fail(f"assignment to undeclared {s.target}", f)
            if isinstance(target, MapType):
                _fail(f"mapping {s.target} can only be updated entry by entry", f)
            self.expect(s.value, target, scope, f)
        elif isinstance(s, MapAssign):
            target = self.state.get(s.target)
            if not isinstance(target, MapType):
                _fail(f"{s.target} is not a mapping", f)
            self.expect(s.key, target.key, scope, f)
            self.expect(s.value, target.value, scope, f)
        elif isinstance(s, IfStmt):
            self.expect(s.test, "bool", scope, f)
            self.block(s.then, dict(scope), f)
            self.block(s.orelse, dict(scope), f)
        elif isinstance(s, Require):
            self.expect(s.test, "bool", scope, f)
        elif isinstance(s, Transfer):
            self.tokens.add(s.token)
            self.expect(s.recipient, "address", scope, f)
            self.expect(s.amount, "int", scope, f)
        elif isinstance(s, Return):
            _fail("return outside a view", f)

    # Expressions

    def expect(self, e: HExpr, t: HType, scope: Dict[str, HType], f: Function) -> HType:
        actual = self.expr(e, scope, f)
        if not compatible(t, actual):
            _fail(f"expected {t}, found {actual}", f)
        return actual

    def expr(self, e: HExpr, scope: Dict[str, HType], f: Function) -> HType:
        if isinstance(e, IntLit):
            return "int"
        if isinstance(e, BoolLit):
            return "bool"
        if isinstance(e, StrLit):
            return "string"
        if isinstance(e, NullLit):
            return "address"
        if isinstance(e, Name):
            t = scope.get(e.name, self.state.get(e.name))
            if t is None:
                _fail(f"undeclared name {e.name}", f)
            return t
        if isinstance(e, Balance):
            self.tokens.add(e.token)
            return "int"
        if isinstance(e, (BalancePre, MapWrite)):
            _fail("normal-form expression in source", f)
        if isinstance(e, MapRead):
            if not isinstance(e.base, Name) or not isinstance(self.state.get(e.base.name), MapType):
                _fail("only mapping state variables can be indexed", f)
            t = self.state[e.base.name]
            self.expect(e.key, t.key, scope, f)
            return t.value
        if isinstance(e, LogicalNot):
            self.expect(e.arg, "bool", scope, f)
            return "bool"
        if isinstance(e, ViewCall):
            view = self.views.get(e.name)
            if view is None:
                _fail(f"{e.name} is not a view", f)
            if len(e.args) != len(view.params):
                _fail(f"{e.name} takes {len(view.params)} arguments", f)
            for a, p in zip(e.args, view.params):
                self.expect(a, p.type, scope, f)
            return view.returns
        if isinstance(e, Binary):
            if e.op in ("+", "-"):
                self.expect(e.left, "int", scope, f)
                self.expect(e.right, "int", scope, f)
                return "int"
            if e.op in ("&&", "||"):
                self.expect(e.left, "bool", scope, f)
                self.expect(e.right, "bool", scope, f)
                return "bool"
            if e.op in ("==", "!="):
                left = self.expr(e.left, scope, f)
                right = self.expr(e.right, scope, f)
                if isinstance(left, MapType) or not compatible(left, right):
                    _fail(f"cannot compare {left} with {right}", f)
                return "bool"
            self.expect(e.left, "int", scope, f)
            self.expect(e.right, "int", scope, f)
            return "bool"
        _fail(f"not an expression: {e!r}", f)


def typecheck(contract: HllContract) -> TypedContract:
    """Check a parsed contract; raises HellumTypeError or one of its subclasses"""
    try:
        typed = _Checker(contract).check()
    except HellumTypeError as e:
        logger.error(f"❌ {contract.name}: {e.message}")
        raise
    if not typed.tokens:
        typed = TypedContract(typed.contract, typed.state_types, (settings.DEFAULT_TOKEN,))
    logger.debug(f"Contract {contract.name} typechecks with tokens {typed.tokens}")
    return typed
