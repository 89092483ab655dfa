"""
Abstract syntax of HeLLUM contracts and of their normal forms
"""

from dataclasses import dataclass, field
from typing import Callable, FrozenSet, Iterator, Optional, Tuple, Union

BASE_TYPES = ("bool", "int", "uint", "string", "address")


@dataclass(frozen=True)
class MapType:
    key: str
    value: str

    def __str__(self) -> str:
        return f"mapping({self.key} => {self.value})"


HType = Union[str, MapType]


# Expressions

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class NullLit:
    pass


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class MapRead:
    base: "HExpr"
    key: "HExpr"


@dataclass(frozen=True)
class MapWrite:
    """``base`` with ``key`` bound to ``value``; produced by normalization"""
    base: "HExpr"
    key: "HExpr"
    value: "HExpr"


@dataclass(frozen=True)
class Balance:
    token: str


@dataclass(frozen=True)
class BalancePre:
    token: str


@dataclass(frozen=True)
class Binary:
    op: str
    left: "HExpr"
    right: "HExpr"


@dataclass(frozen=True)
class LogicalNot:
    arg: "HExpr"


@dataclass(frozen=True)
class ViewCall:
    name: str
    args: Tuple["HExpr", ...]


HExpr = Union[IntLit, BoolLit, StrLit, NullLit, Name, MapRead, MapWrite, Balance, BalancePre, Binary, LogicalNot, ViewCall]

ARITH = ("+", "-")
COMPARE = ("==", "!=", "<", "<=", ">", ">=")
LOGIC = ("&&", "||")

TRUE_LIT = BoolLit(True)


def op_class(op: str) -> str:
    if op in ARITH:
        return "arith"
    if op in COMPARE:
        return "compare"
    return "logic"


def children(e: "HExpr") -> Tuple["HExpr", ...]:
    if isinstance(e, Binary):
        return (e.left, e.right)
    if isinstance(e, LogicalNot):
        return (e.arg,)
    if isinstance(e, MapRead):
        return (e.base, e.key)
    if isinstance(e, MapWrite):
        return (e.base, e.key, e.value)
    if isinstance(e, ViewCall):
        return e.args
    return ()


def walk(e: "HExpr") -> Iterator["HExpr"]:
    yield e
    for child in children(e):
        yield from walk(child)


def map_hexpr(e: "HExpr", fn: Callable[["HExpr"], "HExpr"]) -> "HExpr":
    """Bottom-up rewrite: children first, then ``fn`` on the rebuilt node"""
    if isinstance(e, Binary):
        e = Binary(e.op, map_hexpr(e.left, fn), map_hexpr(e.right, fn))
    elif isinstance(e, LogicalNot):
        e = LogicalNot(map_hexpr(e.arg, fn))
    elif isinstance(e, MapRead):
        e = MapRead(map_hexpr(e.base, fn), map_hexpr(e.key, fn))
    elif isinstance(e, MapWrite):
        e = MapWrite(map_hexpr(e.base, fn), map_hexpr(e.key, fn), map_hexpr(e.value, fn))
    elif isinstance(e, ViewCall):
        e = ViewCall(e.name, tuple(map_hexpr(a, fn) for a in e.args))
    return fn(e)


def names_in(e: "HExpr") -> FrozenSet[str]:
    return frozenset(node.name for node in walk(e) if isinstance(node, Name))


# Statements

@dataclass(frozen=True)
class LocalDecl:
    type: HType
    name: str
    value: Optional[HExpr] = None


@dataclass(frozen=True)
class Assign:
    target: str
    value: HExpr


@dataclass(frozen=True)
class MapAssign:
    target: str
    key: HExpr
    value: HExpr


@dataclass(frozen=True)
class IfStmt:
    test: HExpr
    then: Tuple["Stmt", ...]
    orelse: Tuple["Stmt", ...] = ()


@dataclass(frozen=True)
class Require:
    test: HExpr


@dataclass(frozen=True)
class Transfer:
    recipient: HExpr
    amount: HExpr
    token: str


@dataclass(frozen=True)
class Return:
    value: HExpr


Stmt = Union[LocalDecl, Assign, MapAssign, IfStmt, Require, Transfer, Return]


# Modifiers

@dataclass(frozen=True)
class AfterMod:
    time: HExpr


@dataclass(frozen=True)
class AuthMod:
    who: HExpr


@dataclass(frozen=True)
class InputMod:
    amount: HExpr
    token: str


Modifier = Union[AfterMod, AuthMod, InputMod]


@dataclass(frozen=True)
class HParam:
    name: str
    type: HType


@dataclass(frozen=True)
class Function:
    """A function, the constructor, or a view; ``next`` is None when the modifier is absent"""
    name: str
    params: Tuple[HParam, ...]
    modifiers: Tuple[Modifier, ...]
    body: Tuple[Stmt, ...]
    next: Optional[Tuple[str, ...]] = None
    view: bool = False
    returns: Optional[HType] = None
    line: int = field(default=0, compare=False)

    @property
    def is_constructor(self) -> bool:
        return self.name == "constructor"

    @property
    def afters(self) -> Tuple[HExpr, ...]:
        return tuple(m.time for m in self.modifiers if isinstance(m, AfterMod))

    @property
    def auths(self) -> Tuple[HExpr, ...]:
        return tuple(m.who for m in self.modifiers if isinstance(m, AuthMod))

    @property
    def inputs(self) -> Tuple[InputMod, ...]:
        return tuple(m for m in self.modifiers if isinstance(m, InputMod))


@dataclass(frozen=True)
class StateVar:
    name: str
    type: HType


@dataclass(frozen=True)
class HllContract:
    name: str
    variables: Tuple[StateVar, ...]
    constructor: Function
    functions: Tuple[Function, ...]

    def function(self, name: str) -> Optional[Function]:
        if name == "constructor":
            return self.constructor
        for f in self.functions:
            if f.name == name:
                return f
        return None

    @property
    def callable(self) -> Tuple[Function, ...]:
        return tuple(f for f in self.functions if not f.view)

    @property
    def views(self) -> Tuple[Function, ...]:
        return tuple(f for f in self.functions if f.view)

    def continuations(self, f: Function) -> Tuple[str, ...]:
        """Functions callable after ``f``; every non-constructor function when ``next`` is absent"""
        if f.next is None:
            return tuple(g.name for g in self.callable)
        return f.next


# Normal forms

@dataclass(frozen=True)
class ChainBranch:
    """One arm of a conditional chain; ``guard`` None is the final else"""
    guard: Optional[HExpr]
    commands: Tuple[Stmt, ...]


@dataclass(frozen=True)
class ChainForm:
    require: HExpr
    branches: Tuple[ChainBranch, ...]


@dataclass(frozen=True)
class SSAAssign:
    target: str
    value: HExpr


@dataclass(frozen=True)
class SimAssign:
    targets: Tuple[str, ...]
    values: Tuple[HExpr, ...]


@dataclass(frozen=True)
class SSABranch:
    guard: Optional[HExpr]
    initial: SimAssign
    steps: Tuple[Union[SSAAssign, Transfer], ...]
    final: SimAssign
    safety: Tuple[HExpr, ...] = ()


@dataclass(frozen=True)
class HoistedBranch:
    guard: Optional[HExpr]
    transfers: Tuple[Transfer, ...]
    initial: SimAssign
    assigns: Tuple[SSAAssign, ...]
    final: SimAssign
    safety: Tuple[HExpr, ...] = ()


@dataclass(frozen=True)
class NFBranch:
    guard: Optional[HExpr]
    transfers: Tuple[Transfer, ...]
    assignment: SimAssign
    safety: Tuple[HExpr, ...] = ()


@dataclass(frozen=True)
class NormalFormFunction:
    function: Function
    require: HExpr
    branches: Tuple[NFBranch, ...]
    tokens: Tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return self.function.name
