"""
ILLUM abstract syntax: expressions, clauses, processes
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple, Union

from illum.models.values import STAR


# Expressions

@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class Size:
    arg: "Expr"


@dataclass(frozen=True)
class Hash:
    arg: "Expr"


@dataclass(frozen=True)
class Cond:
    test: "Expr"
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class Lookup:
    map: "Expr"
    key: "Expr"


@dataclass(frozen=True)
class Update:
    map: "Expr"
    key: "Expr"
    value: "Expr"


@dataclass(frozen=True)
class Contains:
    map: "Expr"
    key: "Expr"


@dataclass(frozen=True)
class GetOr:
    """Lookup with a default for absent keys"""
    map: "Expr"
    key: "Expr"
    default: "Expr"


@dataclass(frozen=True)
class EmptyMap:
    pass


Expr = Union[Const, Var, BinOp, Not, Size, Hash, Cond, Lookup, Update, Contains, GetOr, EmptyMap]

ARITH_OPS = ("+", "-")
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
LOGIC_OPS = ("and", "or")
BINARY_OPS = ARITH_OPS + COMPARE_OPS + LOGIC_OPS

TRUE = Const(1)
FALSE = Const(0)
STAR_SLOT = Const(STAR)


def is_star(expr: Expr) -> bool:
    return isinstance(expr, Const) and expr.value is STAR


def children(expr: Expr) -> Tuple[Expr, ...]:
    if isinstance(expr, BinOp):
        return (expr.left, expr.right)
    if isinstance(expr, (Not, Size, Hash)):
        return (expr.arg,)
    if isinstance(expr, Cond):
        return (expr.test, expr.then, expr.orelse)
    if isinstance(expr, (Lookup, Contains)):
        return (expr.map, expr.key)
    if isinstance(expr, Update):
        return (expr.map, expr.key, expr.value)
    if isinstance(expr, GetOr):
        return (expr.map, expr.key, expr.default)
    return ()


def walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    for child in children(expr):
        yield from walk(child)


# Parameters and funding

@dataclass(frozen=True)
class Param:
    name: str
    type: str = "int"


@dataclass(frozen=True)
class FundingItem:
    amount: Expr
    token: str


# Processes

@dataclass(frozen=True)
class Auth:
    who: Expr


@dataclass(frozen=True)
class After:
    time: Expr


@dataclass(frozen=True)
class AfterRel:
    delta: Expr


Decoration = Union[Auth, After, AfterRel]


@dataclass(frozen=True)
class ClauseCall:
    """One callee of a call terminal; external slots hold `?` until advertised"""
    name: str
    internal: Tuple[Expr, ...] = ()
    external: Tuple[Expr, ...] = ()


@dataclass(frozen=True)
class CallTerm:
    calls: Tuple[ClauseCall, ...]


@dataclass(frozen=True)
class SendItem:
    amount: Expr
    token: str
    recipient: Expr


@dataclass(frozen=True)
class SendTerm:
    items: Tuple[SendItem, ...]


Terminal = Union[CallTerm, SendTerm]


def canonical_decorations(decorations) -> Tuple[Decoration, ...]:
    """Auths first in source order, then afters, then afterRels"""
    decorations = tuple(decorations)
    return (
        tuple(d for d in decorations if isinstance(d, Auth))
        + tuple(d for d in decorations if isinstance(d, After))
        + tuple(d for d in decorations if isinstance(d, AfterRel))
    )


@dataclass(frozen=True)
class Branch:
    decorations: Tuple[Decoration, ...]
    terminal: Terminal

    def __post_init__(self):
        object.__setattr__(self, "decorations", canonical_decorations(self.decorations))

    @property
    def auths(self) -> Tuple[Expr, ...]:
        return tuple(d.who for d in self.decorations if isinstance(d, Auth))

    @property
    def afters(self) -> Tuple[Expr, ...]:
        return tuple(d.time for d in self.decorations if isinstance(d, After))

    @property
    def after_rels(self) -> Tuple[Expr, ...]:
        return tuple(d.delta for d in self.decorations if isinstance(d, AfterRel))

    @property
    def outputs(self) -> int:
        """n_j: number of outputs of a transaction taking this branch"""
        if isinstance(self.terminal, CallTerm):
            return len(self.terminal.calls)
        return len(self.terminal.items)


Process = Tuple[Branch, ...]


@dataclass(frozen=True)
class ClauseDef:
    name: str
    internal: Tuple[Param, ...]
    external: Tuple[Param, ...]
    funding: Tuple[FundingItem, ...]
    guard: Expr
    process: Process

    @property
    def params(self) -> Tuple[Param, ...]:
        return self.internal + self.external


@dataclass(frozen=True)
class Program:
    clauses: Tuple[ClauseDef, ...]
    _index: Dict[str, ClauseDef] = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c.name: c for c in self.clauses})

    def get(self, name: str) -> Optional[ClauseDef]:
        return self._index.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> ClauseDef:
        return self._index[name]

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.clauses)
