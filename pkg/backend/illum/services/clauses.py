"""
Clause tables: well-formedness, reachability, instantiation and branch matching
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from illum.core.errors import (
    ArityMismatch, GuardFalse, NegativeFunding, ProgramError, StarPresent, TypeMismatch,
)
from illum.models.illum_ast import (
    After, AfterRel, Auth, Branch, CallTerm, ClauseCall, ClauseDef, Const, Process, Program,
    SendItem, SendTerm, is_star,
)
from illum.models.values import STAR, TYPE_INT, TokenBag, normalize_value, value_type
from illum.services.expressions import close, eval_expr, free_names, truth

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InstantiatedClause:
    name: str
    internal: Tuple[object, ...]
    external: Tuple[object, ...]
    funding: TokenBag
    process: Process


def _branch_names(branch: Branch) -> set:
    names = set()
    for deco in branch.decorations:
        expr = deco.who if isinstance(deco, Auth) else deco.time if isinstance(deco, After) else deco.delta
        names |= free_names(expr)
    if isinstance(branch.terminal, CallTerm):
        for call in branch.terminal.calls:
            for e in call.internal + call.external:
                names |= free_names(e)
    else:
        for item in branch.terminal.items:
            names |= free_names(item.amount) | free_names(item.recipient)
    return names


def check_program(program: Program) -> Program:
    """Raise ProgramError unless the clause table is closed and well formed"""
    seen = set()
    for clause in program.clauses:
        if clause.name in seen:
            raise ProgramError(f"clause {clause.name} is defined twice", clause=clause.name)
        seen.add(clause.name)
    for clause in program.clauses:
        declared = {p.name for p in clause.params}
        if len(declared) != len(clause.params):
            raise ProgramError(f"{clause.name}: repeated parameter name", clause=clause.name)
        used = set(free_names(clause.guard))
        for item in clause.funding:
            used |= free_names(item.amount)
        if not clause.process:
            raise ProgramError(f"{clause.name}: empty process", clause=clause.name)
        for branch in clause.process:
            used |= _branch_names(branch)
            if isinstance(branch.terminal, CallTerm):
                for call in branch.terminal.calls:
                    callee = program.get(call.name)
                    if callee is None:
                        raise ProgramError(
                            f"{clause.name} calls undefined clause {call.name}",
                            code="UndefinedClause", clause=clause.name, callee=call.name,
                        )
                    if len(call.internal) != len(callee.internal) or len(call.external) != len(callee.external):
                        raise ProgramError(
                            f"{clause.name}: call to {call.name} has wrong arity",
                            code="ArityMismatch", clause=clause.name, callee=call.name,
                        )
        undeclared = used - declared
        if undeclared:
            raise ProgramError(
                f"{clause.name}: undeclared parameters {sorted(undeclared)}",
                code="NonClosedProgram", clause=clause.name, names=sorted(undeclared),
            )
    return program


def reachable(root: str, program: Program) -> List[str]:
    """Clauses reachable from ``root`` along calls, DFS in source order"""
    order: List[str] = []

    def visit(name: str):
        if name in order:
            return
        clause = program.get(name)
        if clause is None:
            raise ProgramError(f"undefined clause {name}", code="UndefinedClause", clause=name)
        order.append(name)
        for branch in clause.process:
            if isinstance(branch.terminal, CallTerm):
                for call in branch.terminal.calls:
                    visit(call.name)

    visit(root)
    return order


def _check_types(clause: ClauseDef, internal: Sequence, external: Sequence):
    if len(internal) != len(clause.internal) or len(external) != len(clause.external):
        raise ArityMismatch(
            f"{clause.name} expects {len(clause.internal)};{len(clause.external)} arguments, "
            f"got {len(internal)};{len(external)}",
            clause=clause.name,
        )
    for param, value in zip(clause.params, tuple(internal) + tuple(external)):
        if value is STAR:
            raise StarPresent(f"{clause.name}: parameter {param.name} is ?", clause=clause.name, param=param.name)
        expected = TYPE_INT if param.type == "bool" else param.type
        if value_type(value) != expected:
            raise TypeMismatch(
                f"{clause.name}: parameter {param.name} expects {param.type}, got {value_type(value)}",
                clause=clause.name, param=param.name,
            )


def close_branch(branch: Branch, env) -> Branch:
    decorations = []
    for deco in branch.decorations:
        if isinstance(deco, Auth):
            decorations.append(Auth(close(deco.who, env)))
        elif isinstance(deco, After):
            decorations.append(After(close(deco.time, env)))
        else:
            decorations.append(AfterRel(close(deco.delta, env)))
    if isinstance(branch.terminal, CallTerm):
        terminal = CallTerm(tuple(
            ClauseCall(
                call.name,
                tuple(close(e, env) for e in call.internal),
                tuple(e if is_star(e) else close(e, env) for e in call.external),
            )
            for call in branch.terminal.calls
        ))
    else:
        terminal = SendTerm(tuple(
            SendItem(close(item.amount, env), item.token, close(item.recipient, env))
            for item in branch.terminal.items
        ))
    return Branch(tuple(decorations), terminal)


def funding_of(clause: ClauseDef, env) -> TokenBag:
    amounts = []
    for item in clause.funding:
        amount = eval_expr(item.amount, env)
        if not isinstance(amount, int):
            raise TypeMismatch(f"{clause.name}: funding amount is not an integer", clause=clause.name)
        if amount < 0:
            raise NegativeFunding(f"{clause.name}: funding {amount}:{item.token} < 0", clause=clause.name)
        amounts.append((item.token, amount))
    return TokenBag.of(amounts)


def instantiate(clause: ClauseDef, internal: Sequence, external: Sequence) -> InstantiatedClause:
    """The relation X(a; b) == {v if true} C: evaluated funding plus closed process"""
    internal = tuple(normalize_value(v) for v in internal)
    external = tuple(normalize_value(v) for v in external)
    _check_types(clause, internal, external)
    env = {p.name: v for p, v in zip(clause.params, internal + external)}
    if not truth(eval_expr(clause.guard, env)):
        raise GuardFalse(f"guard of {clause.name} is false", clause=clause.name)
    funding = funding_of(clause, env)
    process = tuple(close_branch(b, env) for b in clause.process)
    return InstantiatedClause(clause.name, internal, external, funding, process)


def _const_value(e):
    return STAR if is_star(e) else normalize_value(e.value) if isinstance(e, Const) else e


def branch_matches(advertised: Branch, declared: Branch) -> bool:
    """advertised is declared with every call placeholder filled by a value"""
    if Counter(advertised.decorations) != Counter(declared.decorations):
        return False
    a, d = advertised.terminal, declared.terminal
    if isinstance(a, SendTerm) and isinstance(d, SendTerm):
        return a == d
    if not (isinstance(a, CallTerm) and isinstance(d, CallTerm)):
        return False
    if len(a.calls) != len(d.calls):
        return False
    for ac, dc in zip(a.calls, d.calls):
        if ac.name != dc.name or len(ac.external) != len(dc.external):
            return False
        if tuple(map(_const_value, ac.internal)) != tuple(map(_const_value, dc.internal)):
            return False
        for av, dv in zip(ac.external, dc.external):
            if is_star(av):
                return False
            if not is_star(dv) and _const_value(av) != _const_value(dv):
                return False
    return True


def fill_branch(declared: Branch, externals: Sequence[Sequence]) -> Branch:
    """Advertised branch obtained by filling each call's placeholders in order"""
    if not isinstance(declared.terminal, CallTerm):
        return declared
    calls = []
    for k, call in enumerate(declared.terminal.calls):
        values = list(externals[k]) if k < len(externals) else []
        filled = tuple(Const(values.pop(0)) if is_star(e) and values else e for e in call.external)
        calls.append(ClauseCall(call.name, call.internal, filled))
    return Branch(declared.decorations, CallTerm(tuple(calls)))
