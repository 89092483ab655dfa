"""
Lowering of normalized HeLLUM contracts to ILLUM clauses.

Every function ``f`` becomes ``f_run(state.., bal_T..; params..)``, funded with the stored
balance plus the call's inputs and guarded by the requirement and the safety obligations.
Each normal-form arm calls ``Check`` on its chain guard, one ``Pay`` per transfer, and
``f_next`` with the folded assignment. ``f_next(state.., bal_T..;)`` offers one branch per
continuation ``g``, carrying g's ``after`` modifiers and calling ``g_run`` with the
parameters left as ``?``. A function with an empty ``next()`` has no ``f_next``.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from illum.core.errors import HellumTypeError
from illum.models.hellum_ast import (
    Balance, BalancePre, Binary, BoolLit, HExpr, HType, IntLit, LogicalNot, MapRead, MapType,
    MapWrite, Name, NormalFormFunction, NullLit, StrLit, TRUE_LIT,
)
from illum.models.illum_ast import (
    After, Auth, BinOp, Branch, CallTerm, ClauseCall, ClauseDef, Const, Expr, FundingItem,
    GetOr, Not, Param, Program, SendItem, SendTerm, STAR_SLOT, TRUE, Update, Var,
)
from illum.models.values import EMPTY_MAP, NULL
from illum.services.clauses import check_program
from illum.services.hellum_normalize import (
    conj, input_total, negate, normalize_contract, prove_balance, safety_condition,
)
from illum.services.hellum_typecheck import TypedContract

logger = logging.getLogger(__name__)

_OPS = {"&&": "and", "||": "or"}


@dataclass(frozen=True)
class LoweredContract:
    typed: TypedContract
    program: Program
    normal_forms: Tuple[NormalFormFunction, ...]

    @property
    def root(self) -> str:
        return "constructor_run"

    def normal_form(self, name: str) -> Optional[NormalFormFunction]:
        return next((nf for nf in self.normal_forms if nf.name == name), None)


def param_type(t: HType) -> str:
    if isinstance(t, MapType):
        return "map"
    return {"bool": "bool", "int": "int", "uint": "int", "string": "bytes", "address": "participant"}[t]


def zero_argument(t: HType):
    """Clause-level value of a freshly declared state variable"""
    if isinstance(t, MapType):
        return EMPTY_MAP
    return {"bool": 0, "int": 0, "uint": 0, "string": b"", "address": NULL}[t]


def _zero_const(t: str) -> Expr:
    return Const(zero_argument(t))


def run_name(function: str) -> str:
    return f"{function}_run"


def next_name(function: str) -> str:
    return f"{function}_next"


def pay_name(token: str, tokens: Tuple[str, ...]) -> str:
    return "Pay" if len(tokens) == 1 else f"Pay_{token}"


class _Lowering:
    def __init__(self, typed: TypedContract):
        self.typed = typed
        self.tokens = typed.tokens

    def _map_value_type(self, e: HExpr) -> str:
        while isinstance(e, (MapWrite, MapRead)):
            e = e.base
        if not isinstance(e, Name) or not isinstance(self.typed.state_types.get(e.name), MapType):
            raise HellumTypeError(f"cannot index {e!r}")
        return self.typed.state_types[e.name].value

    def expr(self, e: HExpr) -> Expr:
        if isinstance(e, IntLit):
            return Const(e.value)
        if isinstance(e, BoolLit):
            return Const(int(e.value))
        if isinstance(e, StrLit):
            return Const(e.value.encode("utf-8"))
        if isinstance(e, NullLit):
            return Const(NULL)
        if isinstance(e, Name):
            return Var(e.name)
        if isinstance(e, BalancePre):
            return Var(f"bal_{e.token}")
        if isinstance(e, MapRead):
            return GetOr(self.expr(e.base), self.expr(e.key), _zero_const(self._map_value_type(e.base)))
        if isinstance(e, MapWrite):
            return Update(self.expr(e.base), self.expr(e.key), self.expr(e.value))
        if isinstance(e, LogicalNot):
            return Not(self.expr(e.arg))
        if isinstance(e, Binary):
            return BinOp(_OPS.get(e.op, e.op), self.expr(e.left), self.expr(e.right))
        if isinstance(e, Balance):
            raise HellumTypeError("balance(T) survived normalization")
        raise HellumTypeError(f"cannot lower {e!r}")

    def _guard(self, *parts: HExpr) -> Expr:
        kept = [p for p in parts if p is not None and p != TRUE_LIT]
        combined = conj(*kept)
        return TRUE if combined is None else self.expr(combined)

    def state_params(self) -> Tuple[Param, ...]:
        return tuple(Param(v.name, param_type(v.type)) for v in self.typed.contract.variables) + tuple(
            Param(f"bal_{t}", "int") for t in self.tokens
        )

    def state_vars(self) -> Tuple[Expr, ...]:
        return tuple(Var(p.name) for p in self.state_params())

    def run_clause(self, nf: NormalFormFunction) -> ClauseDef:
        f = nf.function
        funding = []
        for t in self.tokens:
            extra = input_total(f, t)
            amount = Var(f"bal_{t}") if extra is None else BinOp("+", Var(f"bal_{t}"), self.expr(extra))
            funding.append(FundingItem(amount, t))
        guard = self._guard(nf.require, safety_condition(nf))
        continues = bool(self.typed.contract.continuations(f))
        branches: List[Branch] = []
        negs: List[HExpr] = []
        for arm in nf.branches:
            calls = [ClauseCall("Check", (self._guard(conj(*negs), arm.guard),))]
            for t in arm.transfers:
                calls.append(ClauseCall(pay_name(t.token, self.tokens), (self.expr(t.amount), self.expr(t.recipient))))
            if continues:
                calls.append(ClauseCall(next_name(f.name), tuple(self.expr(v) for v in arm.assignment.values)))
            decorations = tuple(Auth(self.expr(a)) for a in f.auths)
            branches.append(Branch(decorations, CallTerm(tuple(calls))))
            if arm.guard is not None:
                negs.append(negate(arm.guard))
        external = tuple(Param(p.name, param_type(p.type)) for p in f.params)
        return ClauseDef(run_name(f.name), self.state_params(), external, tuple(funding), guard, tuple(branches))

    def next_clause(self, nf: NormalFormFunction, expanded: Dict[str, NormalFormFunction]) -> Optional[ClauseDef]:
        targets = self.typed.contract.continuations(nf.function)
        if not targets:
            return None
        branches = []
        for target in targets:
            g = expanded[target].function
            decorations = tuple(After(self.expr(t)) for t in g.afters)
            call = ClauseCall(run_name(g.name), self.state_vars(), tuple(STAR_SLOT for _ in g.params))
            branches.append(Branch(decorations, CallTerm((call,))))
        funding = tuple(FundingItem(Var(f"bal_{t}"), t) for t in self.tokens)
        return ClauseDef(next_name(nf.name), self.state_params(), (), funding, TRUE, tuple(branches))

    def auxiliaries(self) -> Tuple[ClauseDef, ...]:
        check = ClauseDef("Check", (Param("b", "bool"),), (), (), Var("b"), (Branch((), SendTerm(())),))
        pays = tuple(
            ClauseDef(
                pay_name(t, self.tokens), (Param("v", "int"), Param("A", "participant")), (),
                (FundingItem(Var("v"), t),), TRUE,
                (Branch((), SendTerm((SendItem(Var("v"), t, Var("A")),))),),
            )
            for t in self.tokens
        )
        return (check,) + pays


def gen_clauses(typed: TypedContract) -> LoweredContract:
    """Normalize every function and emit the clause table rooted at constructor_run"""
    normal_forms = normalize_contract(typed)
    lowering = _Lowering(typed)
    by_name = {nf.name: nf for nf in normal_forms}
    clauses: List[ClauseDef] = []
    for nf in normal_forms:
        if not prove_balance(nf):
            raise HellumTypeError(f"{nf.name} does not preserve its balance", function=nf.name)
        clauses.append(lowering.run_clause(nf))
        follow = lowering.next_clause(nf, by_name)
        if follow is not None:
            clauses.append(follow)
    program = check_program(Program(tuple(clauses) + lowering.auxiliaries()))
    logger.info(f"✅ Lowered {typed.name} to {len(program.clauses)} clauses")
    return LoweredContract(typed, program, normal_forms)


def deployment_arguments(lowered: LoweredContract) -> Tuple[object, ...]:
    """Internal arguments of constructor_run: the zero state and zero balances"""
    typed = lowered.typed
    return tuple(zero_argument(v.type) for v in typed.contract.variables) + tuple(0 for _ in typed.tokens)
