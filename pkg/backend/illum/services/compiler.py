"""
ILLUM compiler: clause tables to covenant scripts, advertisements to transactions
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from illum.core.crypto import NULL_KEY
from illum.core.encoding import encode, name_hash
from illum.core.errors import CompileError, IllumError, ProgramError
from illum.models.configuration import ContinueAdv, DestroyAdv, InitAdv
from illum.models.illum_ast import (
    BinOp, Branch, CallTerm, ClauseDef, Cond, Const, Contains, EmptyMap, Expr, GetOr,
    Hash, Lookup, Not, Param, Program, SendTerm, Size, Update, Var, is_star,
)
from illum.models.script import (
    S_FALSE, S_TRUE, SAbsAfter, SAnd, SBagAdd, SBin, SConst, SContains, SGetOr, SHash, SIf,
    SIndex, SInidx, SLookup, SNot, SOr, SOutlen, SOutrec, SOutscr, SRelAfter, SRtxo, SRtxw,
    SSize, STokens, SUpdate, SVersig, Script, arg, conj, rarg, switch,
)
from illum.models.transaction import Blockchain, OutRef, Output, Transaction
from illum.models.values import (
    EMPTY_MAP, NULL, STAR, MapValue, Participant, TYPE_INT, TYPE_MAP, TYPE_PARTICIPANT, TokenBag, ZERO,
    normalize_value,
)
from illum.services.clauses import check_program, fill_branch, instantiate, reachable

logger = logging.getLogger(__name__)

Keys = Mapping[Participant, bytes]

FIRST_PARAM = 4
DEPOSIT_ARGS = 3

# versig(ctxo.arg.3, rtxw.1)
DEPOSIT_SCRIPT: Script = SVersig(arg(3), SIndex(SRtxw(), 1))
# Outputs of destroy transactions can never be spent
DESTROY_SCRIPT: Script = S_FALSE


@dataclass(frozen=True)
class CompilationUnit:
    root: str
    reachable: Tuple[str, ...]
    script: Script


@dataclass(frozen=True)
class CompileFailure:
    """The compiler's bottom, with a machine-readable reason"""
    reason: str
    details: Dict[str, object] = field(default_factory=dict, compare=False, hash=False)

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class CompilerInputs:
    adv: Union[InitAdv, ContinueAdv]
    txout: Mapping[str, OutRef]
    keys: Keys
    inputs: Tuple[OutRef, ...]
    t_abs: int
    t_rel: Tuple[int, ...]
    nonces: Tuple[int, ...]
    program: Program
    chain: Blockchain


@dataclass(frozen=True)
class ContractOutput:
    clause: str
    internal: Tuple[object, ...]
    external: Tuple[object, ...]
    balance: TokenBag
    nonce: int = 0
    branch: int = 0


@dataclass(frozen=True)
class DepositOutput:
    owner: object
    value: TokenBag
    nonce: int = 0
    branch: int = 0


@dataclass(frozen=True)
class UnknownOutput:
    reason: str = ""


DecodedOutput = Union[ContractOutput, DepositOutput, UnknownOutput]


# Participants at the two levels

def participant_key(participant: Participant, keys: Optional[Keys]) -> bytes:
    if participant == NULL:
        return NULL_KEY
    if keys is None or participant not in keys:
        raise CompileError(f"no public key for {participant}", code="UnresolvedParticipant", participant=str(participant))
    return keys[participant]


def to_computational(value, keys: Optional[Keys]):
    """Replace participants by their public keys, inside maps too"""
    value = normalize_value(value)
    if isinstance(value, Participant):
        return participant_key(value, keys)
    if isinstance(value, MapValue):
        return value.map_values(lambda v: to_computational(v, keys))
    if value is STAR:
        raise CompileError("the placeholder ? has no computational value", code="NonClosedProgram")
    return value


def owners_of(keys: Keys) -> Dict[bytes, Participant]:
    owners = {key: p for p, key in keys.items()}
    owners[NULL_KEY] = NULL
    return owners


def to_symbolic(value, type_: str, owners: Mapping[bytes, Participant]):
    """Inverse of to_computational for a value of parameter type ``type_``; None if ill-typed"""
    if type_ == TYPE_PARTICIPANT:
        return owners.get(value) if isinstance(value, bytes) else None
    if type_ in (TYPE_INT, "bool"):
        return value if isinstance(value, int) and not isinstance(value, bool) else None
    if type_ == TYPE_MAP:
        if not isinstance(value, MapValue):
            return None
        return value.map_values(lambda v: owners.get(v, v) if isinstance(v, bytes) and len(v) == 32 else v)
    return value if isinstance(value, bytes) else None


# Expressions

Source = Callable[[str], Script]


def _clause_source(clause: ClauseDef, base: Callable[[int], Script]) -> Source:
    positions = {p.name: FIRST_PARAM + i for i, p in enumerate(clause.params)}

    def source(name: str) -> Script:
        if name not in positions:
            raise CompileError(f"{clause.name}: unbound name {name}", code="NonClosedProgram", clause=clause.name)
        return base(positions[name])

    return source


def compile_expr(e: Expr, source: Source, keys: Optional[Keys]) -> Script:
    """Translate an ILLUM expression; derived operators become core script operators"""
    if isinstance(e, Const):
        return SConst(to_computational(e.value, keys))
    if isinstance(e, Var):
        return source(e.name)
    if isinstance(e, BinOp):
        left, right = compile_expr(e.left, source, keys), compile_expr(e.right, source, keys)
        if e.op in ("+", "-", "<"):
            return SBin(e.op, left, right)
        if e.op == "==":
            return SBin("=", left, right)
        if e.op == "!=":
            return SNot(SBin("=", left, right))
        if e.op == ">":
            return SBin("<", right, left)
        if e.op == "<=":
            return SNot(SBin("<", right, left))
        if e.op == ">=":
            return SNot(SBin("<", left, right))
        if e.op == "and":
            return SAnd(left, right)
        if e.op == "or":
            return SOr(left, right)
        raise CompileError(f"unknown operator {e.op}", code="NonClosedProgram")
    if isinstance(e, Not):
        return SNot(compile_expr(e.arg, source, keys))
    if isinstance(e, Size):
        return SSize(compile_expr(e.arg, source, keys))
    if isinstance(e, Hash):
        return SHash(compile_expr(e.arg, source, keys))
    if isinstance(e, Cond):
        return SIf(*(compile_expr(x, source, keys) for x in (e.test, e.then, e.orelse)))
    if isinstance(e, Lookup):
        return SLookup(compile_expr(e.map, source, keys), compile_expr(e.key, source, keys))
    if isinstance(e, Update):
        return SUpdate(*(compile_expr(x, source, keys) for x in (e.map, e.key, e.value)))
    if isinstance(e, Contains):
        return SContains(compile_expr(e.map, source, keys), compile_expr(e.key, source, keys))
    if isinstance(e, GetOr):
        return SGetOr(*(compile_expr(x, source, keys) for x in (e.map, e.key, e.default)))
    if isinstance(e, EmptyMap):
        return SConst(EMPTY_MAP)
    raise CompileError(f"cannot compile {e!r}", code="NonClosedProgram")


def _funding_script(clause: ClauseDef, source: Source, keys: Optional[Keys]) -> Script:
    if not clause.funding:
        return SConst(ZERO)
    result: Optional[Script] = None
    for item in clause.funding:
        bag = STokens(compile_expr(item.amount, source, keys), item.token)
        result = bag if result is None else SBagAdd(result, bag)
    return result


def _type_assertion(value: Script, param: Param) -> Script:
    if param.type in (TYPE_INT, "bool"):
        return SBin("=", SBin("+", value, SConst(0)), value)
    if param.type == TYPE_PARTICIPANT:
        return SBin("=", SSize(value), SConst(32))
    if param.type == TYPE_MAP:
        probe = SContains(value, SConst(0))
        return SOr(probe, SNot(probe))
    return S_TRUE


# Scripts

def _send_block(branch: Branch, source: Source, keys: Optional[Keys]) -> Script:
    checks = []
    for i, item in enumerate(branch.terminal.items, start=1):
        checks += [
            SBin("=", SSize(SRtxo(SConst(i), "arg")), SConst(DEPOSIT_ARGS)),
            SOutscr(DEPOSIT_SCRIPT, SConst(i)),
            SBin("=", rarg(i, 3), compile_expr(item.recipient, source, keys)),
            SBin("=", SRtxo(SConst(i), "val"), STokens(compile_expr(item.amount, source, keys), item.token)),
        ]
    return conj(*checks)


def _call_block(branch: Branch, source: Source, program: Program, keys: Optional[Keys]) -> Script:
    checks = []
    for i, call in enumerate(branch.terminal.calls, start=1):
        callee = program[call.name]
        callee_source = _clause_source(callee, lambda pos, i=i: rarg(i, pos))
        checks += [
            SOutrec(SConst(i)),
            SBin("=", SSize(SRtxo(SConst(i), "arg")), SConst(FIRST_PARAM - 1 + len(callee.params))),
            SBin("=", rarg(i, 3), SConst(name_hash(callee.name))),
        ]
        actuals = list(call.internal) + list(call.external)
        for offset, (param, actual) in enumerate(zip(callee.params, actuals)):
            position = FIRST_PARAM + offset
            if is_star(actual):
                checks.append(_type_assertion(rarg(i, position), param))
            else:
                checks.append(SBin("=", rarg(i, position), compile_expr(actual, source, keys)))
        checks.append(SBin("=", SRtxo(SConst(i), "val"), _funding_script(callee, callee_source, keys)))
        checks.append(compile_expr(callee.guard, callee_source, keys))
    return conj(*checks)


def _branch_script(j: int, branch: Branch, source: Source, program: Program, keys: Optional[Keys]) -> Script:
    if isinstance(branch.terminal, SendTerm):
        body = _send_block(branch, source, keys)
    else:
        body = _call_block(branch, source, program, keys)
    sigs = [
        SVersig(compile_expr(who, source, keys), SIndex(SRtxw(), k))
        for k, who in enumerate(branch.auths, start=1)
    ]
    body = conj(*sigs, body)
    for delta in reversed(branch.after_rels):
        body = SRelAfter(compile_expr(delta, source, keys), body)
    for time in reversed(branch.afters):
        body = SAbsAfter(compile_expr(time, source, keys), body)
    return body


def branch_condition(j: int, outputs: int) -> Script:
    """B_j: the redeemer has n_j outputs, all tagged with branch j"""
    return conj(
        SBin("=", SOutlen("rtx"), SConst(outputs)),
        *(SBin("=", rarg(k, 2), SConst(j)) for k in range(1, outputs + 1)),
    )


def clause_script(clause: ClauseDef, program: Program, keys: Optional[Keys]) -> Script:
    source = _clause_source(clause, arg)
    cases = [
        (branch_condition(j, branch.outputs), _branch_script(j, branch, source, program, keys))
        for j, branch in enumerate(clause.process, start=1)
    ]
    return switch(cases)


def compile_unit(root: str, program: Program, keys: Optional[Keys] = None) -> CompilationUnit:
    try:
        check_program(program)
        if root not in program:
            raise CompileError(f"undefined root clause {root}", code="UndefinedClause", clause=root)
        order = tuple(reachable(root, program))
    except ProgramError as e:
        logger.error(f"❌ Cannot compile {root}: {e}")
        raise CompileError(e.message, code=e.code, **e.details)
    cases = [
        (SBin("=", arg(3), SConst(name_hash(name))), clause_script(program[name], program, keys))
        for name in order
    ]
    script = conj(SBin("=", SInidx(), SConst(1)), switch(cases))
    logger.debug(f"Compiled {root}: {len(order)} reachable clauses")
    return CompilationUnit(root, order, script)


def compile_script(root: str, program: Program, keys: Optional[Keys] = None) -> Script:
    """The script shared by every contract output of a contract rooted at ``root``"""
    return compile_unit(root, program, keys).script


def arg_layout(clause: ClauseDef) -> Dict[str, int]:
    layout = {"nonce": 1, "branch": 2, "name": 3}
    layout.update({p.name: FIRST_PARAM + i for i, p in enumerate(clause.params)})
    return layout


# Outputs

def deposit_output(owner_key: bytes, value: TokenBag, nonce: int = 0, branch: int = 0) -> Output:
    return Output(value, DEPOSIT_SCRIPT, (nonce, branch, owner_key))


def contract_output(clause: ClauseDef, internal, external, value: TokenBag, script: Script,
                    nonce: int, branch: int, keys: Optional[Keys]) -> Output:
    args = (nonce, branch, name_hash(clause.name)) + tuple(
        to_computational(v, keys) for v in tuple(internal) + tuple(external)
    )
    return Output(value, script, args)


def decode_output(o: Output, program: Program, owners: Optional[Mapping[bytes, Participant]] = None,
                  scripts: Optional[Sequence[bytes]] = None) -> DecodedOutput:
    """Contract or deposit encoded by ``o``; participants decode through ``owners`` when given"""
    args = o.args
    if len(args) < 3 or not all(isinstance(a, int) and not isinstance(a, bool) for a in args[:2]):
        return UnknownOutput("argument layout")
    nonce, branch = args[0], args[1]
    if o.script == DEPOSIT_SCRIPT:
        if len(args) != DEPOSIT_ARGS or not isinstance(args[2], bytes) or len(args[2]) != 32:
            return UnknownOutput("deposit layout")
        owner = args[2] if owners is None else owners.get(args[2])
        if owner is None:
            return UnknownOutput("unknown owner")
        return DepositOutput(owner, o.value, nonce, branch)
    if scripts is not None and encode(o.script) not in scripts:
        return UnknownOutput("script")
    matches = [c for c in program.clauses if name_hash(c.name) == args[2]]
    if len(matches) != 1:
        return UnknownOutput("clause name")
    clause = matches[0]
    values = args[3:]
    if len(values) != len(clause.params):
        return UnknownOutput("arity")
    if owners is not None:
        converted = [to_symbolic(v, p.type, owners) for v, p in zip(values, clause.params)]
        if any(v is None for v in converted):
            return UnknownOutput("parameter types")
        values = tuple(converted)
    n = len(clause.internal)
    return ContractOutput(clause.name, tuple(values[:n]), tuple(values[n:]), o.value, nonce, branch)


# Advertisements

def _fail(reason: str, **details) -> CompileFailure:
    logger.debug(f"compile_advertisement: {reason} {details}")
    return CompileFailure(reason, details)


def _const(e):
    return normalize_value(e.value) if isinstance(e, Const) else e


def compile_advertisement(ci: CompilerInputs) -> Union[Transaction, CompileFailure]:
    """The transaction realizing a complete Init or Continue advertisement, or a CompileFailure"""
    adv = ci.adv
    inputs = tuple(ci.inputs)
    if len(ci.t_rel) != len(inputs):
        return _fail("RelLockArity", inputs=len(inputs), rel_locks=len(ci.t_rel))
    if not ci.nonces:
        return _fail("MissingNonce")
    for ref in inputs:
        if ci.chain.resolve(ref) is None:
            return _fail("UnknownInput", input=str(ref))
    mapped = set()
    position = 0
    if isinstance(adv, ContinueAdv):
        contract_ref = ci.txout.get(adv.contract)
        if contract_ref is None or not inputs or inputs[0] != contract_ref:
            return _fail("FirstInputNotContract", contract=adv.contract)
        mapped.add(contract_ref)
        position = 1
    elif not isinstance(adv, InitAdv):
        return _fail("NotCompilable", kind=getattr(adv, "kind", "?"))
    for z in adv.deposits:
        ref = ci.txout.get(z)
        if ref is None:
            return _fail("UnmappedDeposit", deposit=z)
        while position < len(inputs) and inputs[position] != ref:
            position += 1
        if position == len(inputs):
            return _fail("DepositOrder", deposit=z)
        mapped.add(ref)
        position += 1
    extras = [ref for ref in inputs if ref not in mapped]
    if adv.w is None:
        if extras:
            return _fail("UnexpectedInputs", count=len(extras))
    else:
        extra_value = ZERO
        for ref in extras:
            extra_value = extra_value + ci.chain.resolve(ref).value
        if extra_value != adv.w:
            return _fail("ExtraInputsValue", expected=str(adv.w), found=str(extra_value))

    try:
        if isinstance(adv, InitAdv):
            return _compile_init(ci)
        return _compile_continue(ci)
    except IllumError as e:
        return _fail(e.code, message=e.message)


def _compile_init(ci: CompilerInputs) -> Transaction:
    adv: InitAdv = ci.adv
    clause = ci.program[adv.clause]
    inst = instantiate(clause, adv.internal, adv.external)
    script = compile_script(adv.clause, ci.program, ci.keys)
    output = contract_output(clause, inst.internal, inst.external, inst.funding, script, ci.nonces[0], 0, ci.keys)
    return _transaction(ci, (output,))


def _compile_continue(ci: CompilerInputs) -> Union[Transaction, CompileFailure]:
    adv: ContinueAdv = ci.adv
    branch = adv.branch
    for t in branch.afters:
        if ci.t_abs < _const(t):
            return _fail("AbsLockTooEarly", required=_const(t), t_abs=ci.t_abs)
    for delta in branch.after_rels:
        if ci.t_rel[0] < _const(delta):
            return _fail("RelLockTooEarly", required=_const(delta), t_rel=ci.t_rel[0])
    n = branch.outputs
    if len(ci.nonces) < n:
        return _fail("MissingNonce", outputs=n, nonces=len(ci.nonces))
    parent = ci.chain.resolve(ci.inputs[0])
    outputs: List[Output] = []
    if isinstance(branch.terminal, CallTerm):
        for k, call in enumerate(branch.terminal.calls):
            callee = ci.program[call.name]
            internal = [_const(e) for e in call.internal]
            external = [_const(e) for e in call.external]
            inst = instantiate(callee, internal, external)
            outputs.append(contract_output(
                callee, inst.internal, inst.external, inst.funding, parent.script, ci.nonces[k], adv.index, ci.keys,
            ))
    else:
        for k, item in enumerate(branch.terminal.items):
            key = participant_key(_const(item.recipient), ci.keys)
            value = TokenBag.of([(item.token, _const(item.amount))])
            outputs.append(deposit_output(key, value, ci.nonces[k], adv.index))
    return _transaction(ci, tuple(outputs))


def _transaction(ci: CompilerInputs, outputs: Tuple[Output, ...]) -> Transaction:
    return Transaction(
        inputs=tuple(ci.inputs),
        witnesses=tuple(() for _ in ci.inputs),
        outputs=outputs,
        abs_lock=ci.t_abs,
        rel_locks=tuple(ci.t_rel),
    )


def nonces_for(adv, outputs: int) -> Tuple[int, ...]:
    """Every output of a compiled transaction carries the advertisement's nonce"""
    return (adv.nonce,) * max(outputs, 1)


# Transactions outside the compiler's image

def destroy_transaction(adv: DestroyAdv, txout: Mapping[str, OutRef], inputs: Sequence[OutRef],
                        chain: Blockchain) -> Transaction:
    """Honest translation of a Destroy advertisement: everything goes to an unspendable output"""
    total = ZERO
    for ref in inputs:
        total = total + chain.resolve(ref).value
    return Transaction(
        inputs=tuple(inputs),
        witnesses=tuple(() for _ in inputs),
        outputs=(Output(total, DESTROY_SCRIPT, (adv.nonce, 0)),),
        rel_locks=tuple(0 for _ in inputs),
    )


def join_transaction(first: OutRef, second: OutRef, owner_key: bytes, total: TokenBag, nonce: int = 0) -> Transaction:
    return Transaction(
        inputs=(first, second),
        witnesses=((), ()),
        outputs=(deposit_output(owner_key, total, nonce, 0),),
        rel_locks=(0, 0),
    )


def divide_transaction(ref: OutRef, owner_key: bytes, left: TokenBag, right: TokenBag, nonce: int = 0) -> Transaction:
    return Transaction(
        inputs=(ref,),
        witnesses=((),),
        outputs=(deposit_output(owner_key, left, nonce, 0), deposit_output(owner_key, right, nonce, 0)),
        rel_locks=(0,),
    )


def donate_transaction(ref: OutRef, to_key: bytes, value: TokenBag, nonce: int = 0) -> Transaction:
    return Transaction(
        inputs=(ref,),
        witnesses=((),),
        outputs=(deposit_output(to_key, value, nonce, 0),),
        rel_locks=(0,),
    )


# Reconstruction

@dataclass(frozen=True)
class Reconstruction:
    adv: Union[InitAdv, ContinueAdv]
    inputs: Tuple[OutRef, ...]
    t_abs: int
    t_rel: Tuple[int, ...]
    nonces: Tuple[int, ...]


def _split_inputs(refs: Sequence[OutRef], names: Mapping[OutRef, str], chain: Blockchain,
                  program: Program, owners) -> Optional[Tuple[Tuple[str, ...], Optional[TokenBag]]]:
    deposits: List[str] = []
    extra = ZERO
    extras = False
    for ref in refs:
        output = chain.resolve(ref)
        if output is None:
            return None
        if ref in names:
            if not isinstance(decode_output(output, program, owners), DepositOutput):
                return None
            deposits.append(names[ref])
        else:
            extras = True
            extra = extra + output.value
    return tuple(deposits), (extra if extras else None)


def _recompiles(candidate: Reconstruction, tx: Transaction, txout, keys, program, chain) -> bool:
    ci = CompilerInputs(
        candidate.adv, txout, keys, candidate.inputs, candidate.t_abs, candidate.t_rel,
        candidate.nonces, program, chain,
    )
    compiled = compile_advertisement(ci)
    return isinstance(compiled, Transaction) and compiled.stripped() == tx.stripped()


def reconstruct_advertisement(tx: Transaction, chain: Blockchain, txout: Mapping[str, OutRef],
                              program: Program, keys: Keys) -> Optional[Reconstruction]:
    """Rebuild the advertisement a transaction spending a contract output was compiled from"""
    if not tx.inputs:
        return None
    names = {ref: name for name, ref in txout.items()}
    owners = owners_of(keys)
    contract = names.get(tx.inputs[0])
    parent = chain.resolve(tx.inputs[0])
    if contract is None or parent is None:
        return None
    decoded = decode_output(parent, program, owners)
    if not isinstance(decoded, ContractOutput):
        return None
    try:
        inst = instantiate(program[decoded.clause], decoded.internal, decoded.external)
    except IllumError:
        return None
    if tx.outputs:
        j = tx.outputs[0].args[1] if len(tx.outputs[0].args) >= 2 else None
    else:
        j = next((k for k, b in enumerate(inst.process, start=1) if b.outputs == 0), None)
    if not isinstance(j, int) or isinstance(j, bool) or not 1 <= j <= len(inst.process):
        return None
    declared = inst.process[j - 1]
    if declared.outputs != len(tx.outputs):
        return None
    advertised = declared
    if isinstance(declared.terminal, CallTerm):
        externals = []
        for call, output in zip(declared.terminal.calls, tx.outputs):
            child = decode_output(output, program, owners)
            if not isinstance(child, ContractOutput) or child.clause != call.name:
                return None
            externals.append([v for v, slot in zip(child.external, call.external) if is_star(slot)])
        advertised = fill_branch(declared, externals)
    split = _split_inputs(tx.inputs[1:], names, chain, program, owners)
    if split is None:
        return None
    deposits, w = split
    nonce = tx.outputs[0].args[0] if tx.outputs else 0
    adv = ContinueAdv(advertised, deposits, w, contract, j, nonce)
    nonces = tuple(o.args[0] for o in tx.outputs) or (0,)
    candidate = Reconstruction(adv, tuple(tx.inputs), tx.abs_lock, tuple(tx.rel_locks), nonces)
    return candidate if _recompiles(candidate, tx, txout, keys, program, chain) else None


def reconstruct_init(tx: Transaction, chain: Blockchain, txout: Mapping[str, OutRef],
                     program: Program, keys: Keys) -> Optional[Reconstruction]:
    """Rebuild an Init advertisement from a transaction creating one contract output with branch 0"""
    if len(tx.outputs) != 1 or not tx.inputs:
        return None
    owners = owners_of(keys)
    decoded = decode_output(tx.outputs[0], program, owners)
    if not isinstance(decoded, ContractOutput) or decoded.branch != 0:
        return None
    names = {ref: name for name, ref in txout.items()}
    split = _split_inputs(tx.inputs, names, chain, program, owners)
    if split is None or not split[0]:
        return None
    deposits, w = split
    adv = InitAdv(decoded.clause, decoded.internal, decoded.external, deposits, w, decoded.nonce)
    candidate = Reconstruction(adv, tuple(tx.inputs), tx.abs_lock, tuple(tx.rel_locks), (decoded.nonce,))
    return candidate if _recompiles(candidate, tx, txout, keys, program, chain) else None
