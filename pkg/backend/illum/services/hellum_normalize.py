"""
Normal forms of HeLLUM functions.

A function body is rewritten in five passes:

1. view calls are macro-expanded;
2. the body becomes a chain ``require R; if (g1) {..} else if (g2) {..} else {..}`` whose
   guards and requirement read only the entry state;
3. each arm is put in SSA form, starting from ``x_0, .., bal_T_0 = x, .., balance_pre(T)``;
4. transfers are hoisted to the top of the arm with pre-state arguments;
5. the remaining assignments fold into one simultaneous assignment
   ``x, .., bal_T_fin = e1, .., en`` over the pre-state.

Each arm also carries the safety obligations (non-negative transfers and balances, uint
assignments) that a call must meet to not revert.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import z3

from illum.core.errors import HellumTypeError
from illum.models.hellum_ast import (
    AfterMod, Assign, AuthMod, Balance, BalancePre, Binary, BoolLit, ChainBranch, ChainForm,
    Function, HExpr, HoistedBranch, HType, IfStmt, InputMod, IntLit, LocalDecl, LogicalNot,
    MapAssign, MapRead, MapType, MapWrite, Name, NFBranch, NormalFormFunction, NullLit, Require,
    Return, SimAssign, SSAAssign, SSABranch, Stmt, StrLit, TRUE_LIT, Transfer, ViewCall, map_hexpr,
)
from illum.services.hellum_parser import print_expr
from illum.services.hellum_typecheck import TypedContract

logger = logging.getLogger(__name__)

_FLIP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def zero_literal(t: HType) -> HExpr:
    if isinstance(t, MapType):
        raise HellumTypeError("mappings have no literal")
    return {"bool": BoolLit(False), "int": IntLit(0), "uint": IntLit(0), "string": StrLit(""),
            "address": NullLit()}[t]


def negate(e: HExpr) -> HExpr:
    """Logical negation pushed through comparisons"""
    if isinstance(e, Binary) and e.op in _FLIP:
        return Binary(_FLIP[e.op], e.left, e.right)
    if isinstance(e, LogicalNot):
        return e.arg
    if isinstance(e, BoolLit):
        return BoolLit(not e.value)
    return LogicalNot(e)


def conj(*parts: Optional[HExpr]) -> Optional[HExpr]:
    """Left-folded conjunction of the non-None parts; None when there are none"""
    result = None
    for p in parts:
        if p is None:
            continue
        result = p if result is None else Binary("&&", result, p)
    return result


def disj(parts: Sequence[HExpr]) -> HExpr:
    result = None
    for p in parts:
        result = p if result is None else Binary("||", result, p)
    return TRUE_LIT if result is None else result


def substitute(e: HExpr, names: Dict[str, HExpr], balances: Optional[Dict[str, HExpr]] = None) -> HExpr:
    """Simultaneous replacement of names and balance(T) terms"""
    balances = balances or {}

    def fn(node: HExpr) -> HExpr:
        if isinstance(node, Name):
            return names.get(node.name, node)
        if isinstance(node, Balance):
            return balances.get(node.token, node)
        if isinstance(node, MapRead) and isinstance(node.base, MapWrite) and node.base.key == node.key:
            return node.base.value
        return node

    return map_hexpr(e, fn)


# Pass 1: view expansion

def expand_views(e: HExpr, typed: TypedContract) -> HExpr:
    def fn(node: HExpr) -> HExpr:
        if not isinstance(node, ViewCall):
            return node
        view = typed.contract.function(node.name)
        body = view.body[0].value
        return expand_views(substitute(body, {p.name: a for p, a in zip(view.params, node.args)}), typed)

    return map_hexpr(e, fn)


def _expand_stmt(s: Stmt, typed: TypedContract) -> Stmt:
    ex = lambda e: expand_views(e, typed)
    if isinstance(s, LocalDecl):
        return LocalDecl(s.type, s.name, None if s.value is None else ex(s.value))
    if isinstance(s, Assign):
        return Assign(s.target, ex(s.value))
    if isinstance(s, MapAssign):
        return MapAssign(s.target, ex(s.key), ex(s.value))
    if isinstance(s, IfStmt):
        return IfStmt(ex(s.test), tuple(_expand_stmt(t, typed) for t in s.then),
                      tuple(_expand_stmt(t, typed) for t in s.orelse))
    if isinstance(s, Require):
        return Require(ex(s.test))
    if isinstance(s, Transfer):
        return Transfer(ex(s.recipient), ex(s.amount), s.token)
    return s


def expand_function(f: Function, typed: TypedContract) -> Function:
    modifiers = []
    for m in f.modifiers:
        if isinstance(m, AfterMod):
            modifiers.append(AfterMod(expand_views(m.time, typed)))
        elif isinstance(m, AuthMod):
            modifiers.append(AuthMod(expand_views(m.who, typed)))
        else:
            modifiers.append(InputMod(expand_views(m.amount, typed), m.token))
    body = tuple(_expand_stmt(s, typed) for s in f.body)
    return Function(f.name, f.params, tuple(modifiers), body, f.next, f.view, f.returns, f.line)


# Pass 2: chain form

def _pull(e: HExpr, c: Stmt) -> HExpr:
    """``e`` read after ``c`` as an expression over the state before ``c``"""
    if isinstance(c, LocalDecl):
        value = c.value if c.value is not None else zero_literal(c.type)
        return substitute(e, {c.name: value})
    if isinstance(c, Assign):
        return substitute(e, {c.target: c.value})
    if isinstance(c, MapAssign):
        return substitute(e, {c.target: MapWrite(Name(c.target), c.key, c.value)})
    if isinstance(c, Transfer):
        return substitute(e, {}, {c.token: Binary("-", Balance(c.token), c.amount)})
    return e


def _through(e: Optional[HExpr], commands: Sequence[Stmt]) -> Optional[HExpr]:
    if e is None:
        return None
    for c in reversed(commands):
        e = _pull(e, c)
    return e


def _arms(stmts: Sequence[Stmt]) -> List[Tuple[Optional[HExpr], List[Stmt]]]:
    arms: List[Tuple[Optional[HExpr], List[Stmt]]] = [(None, [])]
    for s in stmts:
        if not isinstance(s, IfStmt):
            arms = [(guard, body + [s]) for guard, body in arms]
            continue
        split = []
        for guard, body in arms:
            test = _through(s.test, body)
            for inner, commands in _arms(s.then):
                split.append((conj(guard, test, _through(inner, body)), body + commands))
            for inner, commands in _arms(s.orelse):
                split.append((conj(guard, _through(inner, body)), body + commands))
        arms = split
    return arms


def compose_chain(items: Sequence[Tuple[Optional[HExpr], Optional[HExpr]]]) -> HExpr:
    """Disjunction over arms of (negated earlier guards) && (guard && condition)"""
    if all(cond is None for _, cond in items):
        return TRUE_LIT
    terms, negs = [], []
    for guard, cond in items:
        core = conj(guard, cond)
        earlier = conj(*negs)
        terms.append(conj(earlier, core) if core is not None else (earlier or TRUE_LIT))
        if guard is not None:
            negs.append(negate(guard))
    return disj(terms)


def chain_form(f: Function) -> ChainForm:
    """Passes 1-2 on a view-free body: requirements hoisted, conditionals flattened"""
    arms = _arms(f.body)
    branches, requirements = [], []
    for guard, commands in arms:
        hoisted, kept = [], []
        for i, c in enumerate(commands):
            if isinstance(c, Require):
                hoisted.append(_through(c.test, commands[:i]))
            elif not isinstance(c, Return):
                kept.append(c)
        requirements.append((guard, conj(*hoisted)))
        branches.append(ChainBranch(guard, tuple(kept)))
    return ChainForm(compose_chain(requirements), tuple(branches))


# Pass 3: SSA

class _Versions:
    def __init__(self):
        self.count: Dict[str, int] = {}
        self.current: Dict[str, str] = {}

    def start(self, name: str) -> str:
        self.count[name] = 0
        self.current[name] = f"{name}_0"
        return self.current[name]

    def bump(self, name: str) -> str:
        self.count[name] = self.count.get(name, 0) + 1
        self.current[name] = f"{name}_{self.count[name]}"
        return self.current[name]

    def rename(self, e: HExpr) -> HExpr:
        names = {k: Name(v) for k, v in self.current.items() if not k.startswith("bal_")}
        balances = {k[4:]: Name(v) for k, v in self.current.items() if k.startswith("bal_")}

        def fn(node: HExpr) -> HExpr:
            if isinstance(node, Name):
                return names.get(node.name, node)
            if isinstance(node, Balance):
                return balances.get(node.token, node)
            return node

        return map_hexpr(e, fn)


def input_total(f: Function, token: str) -> Optional[HExpr]:
    total = None
    for m in f.inputs:
        if m.token == token:
            total = m.amount if total is None else Binary("+", total, m.amount)
    return total


def entry_balance(f: Function, token: str) -> HExpr:
    """balance(T) at function entry: the stored balance plus this call's inputs"""
    extra = input_total(f, token)
    return BalancePre(token) if extra is None else Binary("+", BalancePre(token), extra)


def _var_types(typed: TypedContract, f: Function, commands: Sequence[Stmt]) -> Dict[str, HType]:
    types: Dict[str, HType] = dict(typed.state_types)
    types.update({p.name: p.type for p in f.params})
    types.update({c.name: c.type for c in commands if isinstance(c, LocalDecl)})
    return types


def ssa_branch(branch: ChainBranch, f: Function, typed: TypedContract) -> SSABranch:
    state = [v.name for v in typed.contract.variables]
    params = [p.name for p in f.params]
    tokens = typed.tokens
    types = _var_types(typed, f, branch.commands)
    versions = _Versions()
    targets = [versions.start(n) for n in state + params] + [versions.start(f"bal_{t}") for t in tokens]
    values = [Name(n) for n in state + params] + [entry_balance(f, t) for t in tokens]
    steps: List = []
    safety: List[HExpr] = [Binary(">=", Name(f"{p.name}_0"), IntLit(0)) for p in f.params if p.type == "uint"]

    for c in branch.commands:
        if isinstance(c, (LocalDecl, Assign)):
            name = c.name if isinstance(c, LocalDecl) else c.target
            if isinstance(c, LocalDecl) and c.value is None:
                value = zero_literal(c.type)
            else:
                value = versions.rename(c.value)
            target = versions.bump(name)
            steps.append(SSAAssign(target, value))
            if types.get(name) == "uint":
                safety.append(Binary(">=", Name(target), IntLit(0)))
        elif isinstance(c, MapAssign):
            key, value = versions.rename(c.key), versions.rename(c.value)
            base = Name(versions.current[c.target])
            target = versions.bump(c.target)
            steps.append(SSAAssign(target, MapWrite(base, key, value)))
            if types[c.target].value == "uint":
                safety.append(Binary(">=", value, IntLit(0)))
        elif isinstance(c, Transfer):
            recipient, amount = versions.rename(c.recipient), versions.rename(c.amount)
            steps.append(Transfer(recipient, amount, c.token))
            before = Name(versions.current[f"bal_{c.token}"])
            after = versions.bump(f"bal_{c.token}")
            steps.append(SSAAssign(after, Binary("-", before, amount)))
            safety.append(Binary(">=", amount, IntLit(0)))
            safety.append(Binary(">=", Name(after), IntLit(0)))

    final = SimAssign(
        tuple(state) + tuple(f"bal_{t}_fin" for t in tokens),
        tuple(Name(versions.current[n]) for n in state) + tuple(Name(versions.current[f"bal_{t}"]) for t in tokens),
    )
    return SSABranch(branch.guard, SimAssign(tuple(targets), tuple(values)), tuple(steps), final, tuple(safety))


# Passes 4-5: hoisting and folding

class _Resolver:
    """Replaces SSA names by their definitions until only pre-state terms remain"""

    def __init__(self, branch: SSABranch):
        self.defs: Dict[str, HExpr] = dict(zip(branch.initial.targets, branch.initial.values))
        for s in branch.steps:
            if isinstance(s, SSAAssign):
                self.defs[s.target] = s.value
        self.memo: Dict[str, HExpr] = {}

    def resolve(self, e: HExpr) -> HExpr:
        def fn(node: HExpr) -> HExpr:
            if isinstance(node, Name) and node.name in self.defs:
                if node.name not in self.memo:
                    self.memo[node.name] = self.resolve(self.defs[node.name])
                return self.memo[node.name]
            if isinstance(node, MapRead) and isinstance(node.base, MapWrite) and node.base.key == node.key:
                return node.base.value
            return node

        return map_hexpr(e, fn)


def hoist_branch(branch: SSABranch) -> HoistedBranch:
    r = _Resolver(branch)
    transfers = tuple(
        Transfer(r.resolve(s.recipient), r.resolve(s.amount), s.token)
        for s in branch.steps if isinstance(s, Transfer)
    )
    assigns = tuple(s for s in branch.steps if isinstance(s, SSAAssign))
    return HoistedBranch(branch.guard, transfers, branch.initial, assigns, branch.final, branch.safety)


def fold_branch(branch: SSABranch, f: Function, tokens: Sequence[str]) -> NFBranch:
    r = _Resolver(branch)
    hoisted = hoist_branch(branch)
    entry = {t: entry_balance(f, t) for t in tokens}
    guard = None if branch.guard is None else substitute(branch.guard, {}, entry)
    assignment = SimAssign(branch.final.targets, tuple(r.resolve(v) for v in branch.final.values))
    safety = tuple(r.resolve(s) for s in branch.safety)
    return NFBranch(guard, hoisted.transfers, assignment, safety)


def normalize_function(f: Function, typed: TypedContract) -> NormalFormFunction:
    """All five passes; the result reads only the pre-state, parameters and balance_pre(T)"""
    f = expand_function(f, typed)
    chain = chain_form(f)
    entry = {t: entry_balance(f, t) for t in typed.tokens}
    branches = tuple(fold_branch(ssa_branch(b, f, typed), f, typed.tokens) for b in chain.branches)
    nf = NormalFormFunction(f, substitute(chain.require, {}, entry), branches, typed.tokens)
    logger.debug(f"Normalized {f.name}: {len(branches)} branches")
    return nf


def normalize_contract(typed: TypedContract) -> Tuple[NormalFormFunction, ...]:
    functions = (typed.contract.constructor,) + typed.contract.callable
    return tuple(normalize_function(f, typed) for f in functions)


def safety_condition(nf: NormalFormFunction) -> HExpr:
    """Arms' safety obligations composed like the requirement"""
    items = [(b.guard, conj(*b.safety)) for b in nf.branches]
    inputs = [Binary(">=", m.amount, IntLit(0)) for m in nf.function.inputs]
    return conj(compose_chain(items), *inputs) if inputs else compose_chain(items)


# Balance preservation

def _to_z3(e: HExpr, atoms: Dict[str, z3.ArithRef]) -> z3.ArithRef:
    if isinstance(e, IntLit):
        return z3.IntVal(e.value)
    if isinstance(e, Binary) and e.op in ("+", "-"):
        left, right = _to_z3(e.left, atoms), _to_z3(e.right, atoms)
        return left + right if e.op == "+" else left - right
    key = print_expr(e)
    if key not in atoms:
        atoms[key] = z3.Int(key)
    return atoms[key]


def prove_balance(nf: NormalFormFunction) -> bool:
    """z3 check that every arm ends with bal_T_fin = balance_pre(T) + inputs - transfers"""
    for branch in nf.branches:
        final = dict(zip(branch.assignment.targets, branch.assignment.values))
        for token in nf.tokens:
            atoms: Dict[str, z3.ArithRef] = {}
            expected = _to_z3(entry_balance(nf.function, token), atoms)
            for t in branch.transfers:
                if t.token == token:
                    expected = expected - _to_z3(t.amount, atoms)
            solver = z3.Solver()
            solver.add(_to_z3(final[f"bal_{token}_fin"], atoms) != expected)
            if solver.check() != z3.unsat:
                logger.error(f"❌ {nf.name}: balance of {token} is not preserved")
                return False
    return True
