"""
Coherence between symbolic and computational runs: parsing, checking, balance preservation
"""

import logging
from dataclasses import dataclass, fields, replace
from typing import Dict, List, Optional, Tuple, Union

from illum.core.config import settings
from illum.core.errors import IllumError, LedgerError, RuleNotEnabled, RunError
from illum.models.actions import (
    Adv, AuthAct, AuthDivideAct, AuthDonateAct, AuthIn, AuthJoinAct, Call, Delay, Destroy, Divide,
    Donate, Init, Join, Msg, Send,
)
from illum.models.configuration import (
    ActiveContract, AuthAction, AuthDeposit, AuthDivide, AuthDonate, AuthJoin, Authorization,
    Configuration, ContinueAdv, Deposit, DestroyAdv, Incomplete, InitAdv,
)
from illum.models.illum_ast import CallTerm, Const, Program
from illum.models.runs import (
    AdvMessage, BroadcastLabel, CoherenceMaps, ComputationalRun, DelayLabel, KeyAnnouncement,
    SymbolicRun, TxLabel, TxMessage, WitnessQuadruple,
)
from illum.models.transaction import Blockchain, OutRef, Transaction
from illum.models.values import TokenBag, ZERO
from illum.services import ledger
from illum.services.compiler import (
    DepositOutput, decode_output, owners_of, reconstruct_advertisement, reconstruct_init,
)
from illum.services.semantics import created_names, step

logger = logging.getLogger(__name__)

ACTION_CLASSES = (
    Msg, Adv, AuthIn, AuthAct, Init, Call, Send, Destroy, Delay,
    AuthJoinAct, Join, AuthDivideAct, Divide, AuthDonateAct, Donate,
)


# Cases of the coherence relation: the base case, one per kind of symbolic step, and the two
# computational labels that leave the symbolic run unchanged

CASE_BASE = "base"
CASE_UNRELATED_TX = "unrelated-tx"
CASE_UNRELATED_MESSAGE = "unrelated-message"
_ADV_CASES = {InitAdv: "adv-init", ContinueAdv: "adv-continue", DestroyAdv: "adv-destroy"}

COHERENCE_CASES = (
    CASE_BASE, "msg", "adv-init", "adv-continue", "init", "call", "send", "auth-action", "auth-in",
    "delay", "auth-join", "join", "auth-divide", "divide", "auth-donate", "donate", "adv-destroy",
    "destroy", CASE_UNRELATED_TX, CASE_UNRELATED_MESSAGE,
)


def coherence_case(act) -> str:
    """The case of the relation matching ``act`` with its computational label"""
    if isinstance(act, Adv):
        return _ADV_CASES[type(act.adv)]
    if isinstance(act, AuthAct):
        return "auth-action"
    return act.label


@dataclass(frozen=True)
class Ok:
    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class CounterExample:
    step: int
    label_index: int
    case: str
    reason: str

    def __bool__(self) -> bool:
        return False

    def to_dict(self) -> Dict[str, object]:
        return {"step": self.step, "label_index": self.label_index, "case": self.case, "reason": self.reason}


@dataclass(frozen=True)
class BalanceViolation:
    term: str
    output: str
    reason: str


@dataclass(frozen=True)
class BalanceReport:
    ok: bool
    violations: Tuple[BalanceViolation, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


# Deposit operations recognised on chain

@dataclass(frozen=True)
class DepositOp:
    kind: str
    deposits: Tuple[str, ...]
    owner: object
    left: TokenBag = ZERO
    right: TokenBag = ZERO
    to: object = None


def _const(e):
    return e.value if isinstance(e, Const) else e


class RunParser:
    """Incremental translation of a computational run into a symbolic one"""

    def __init__(self, program: Program):
        self.program = program
        self.maps = CoherenceMaps()
        self.chain = Blockchain()
        self.run: Optional[SymbolicRun] = None
        self.coinbase: Optional[Transaction] = None
        self.broadcast: Dict[bytes, Transaction] = {}
        self.advs_by_tx: Dict[bytes, List[object]] = {}
        self.deposit_ops: Dict[bytes, DepositOp] = {}
        self.last_case = CASE_BASE

    @property
    def config(self) -> Configuration:
        return self.run.final

    # Base case

    def _start(self):
        if self.run is not None:
            return
        if self.coinbase is None:
            raise RunError("run does not start with a coinbase transaction", code="InconsistentRun")
        owners = owners_of(self.maps.keys)
        deposits = []
        for k, output in enumerate(self.coinbase.outputs, start=1):
            decoded = decode_output(output, self.program, owners)
            if not isinstance(decoded, DepositOutput):
                raise RunError(f"coinbase output {k} is not a deposit of a known participant", code="InconsistentRun")
            name = f"z{k}"
            deposits.append(Deposit(name, decoded.owner, output.value))
            self.maps.bind(name, OutRef(self.coinbase.tx_id, k))
        self.run = SymbolicRun(Configuration.initial(deposits, self.chain.time))

    # Helpers

    def _live(self, ref: OutRef) -> Optional[str]:
        name = self.maps.names_by_output().get(ref)
        if name is None:
            return None
        g = self.config
        return name if g.deposit(name) is not None or g.contract(name) is not None else None

    def _step(self, act) -> Optional[object]:
        try:
            after = step(self.config, act, self.program)
        except RuleNotEnabled as e:
            logger.debug(f"no symbolic counterpart for {act.label}: {e}")
            return None
        before = self.config
        self.run = self.run.extended(act, after)
        if settings.ILLUM_TRACE:
            logger.debug(f"parsed {act.label}: {after}")
        return before

    def _bind_outputs(self, before: Configuration, tx: Transaction):
        for k, name in enumerate(created_names(before, self.config), start=1):
            self.maps.bind(name, OutRef(tx.tx_id, k))

    def _deposit_op(self, tx: Transaction) -> Optional[DepositOp]:
        if tx.abs_lock or any(tx.rel_locks) or not tx.inputs:
            return None
        owners = owners_of(self.maps.keys)
        g = self.config
        inputs = []
        for ref in tx.inputs:
            name = self._live(ref)
            if name is None or g.deposit(name) is None:
                return None
            inputs.append(g.deposit(name))
        outputs = [decode_output(o, self.program, owners) for o in tx.outputs]
        if not all(isinstance(o, DepositOutput) and o.branch == 0 for o in outputs):
            return None
        owner = inputs[0].owner
        if len(inputs) == 2 and len(outputs) == 1:
            if inputs[1].owner == owner and outputs[0].owner == owner \
                    and outputs[0].value == inputs[0].value + inputs[1].value:
                return DepositOp("join", (inputs[0].name, inputs[1].name), owner)
        if len(inputs) == 1 and len(outputs) == 2:
            if all(o.owner == owner for o in outputs) and outputs[0].value + outputs[1].value == inputs[0].value:
                return DepositOp("divide", (inputs[0].name,), owner, outputs[0].value, outputs[1].value)
        if len(inputs) == 1 and len(outputs) == 1 and outputs[0].value == inputs[0].value:
            return DepositOp("donate", (inputs[0].name,), owner, to=outputs[0].owner)
        return None

    def _destroy_adv(self, tx: Transaction) -> Optional[DestroyAdv]:
        g = self.config
        deposits, extra, extras = [], ZERO, False
        for ref in tx.inputs:
            name = self._live(ref)
            if name is not None:
                if g.deposit(name) is None:
                    return None
                deposits.append(name)
            else:
                output = self.chain.resolve(ref)
                if output is None:
                    return None
                extras = True
                extra = extra + output.value
        if not deposits:
            return None
        nonce = 0
        if tx.outputs and tx.outputs[0].args and isinstance(tx.outputs[0].args[0], int):
            nonce = tx.outputs[0].args[0]
        return DestroyAdv(tuple(deposits), extra if extras else None, nonce)

    def _classify_broadcast_tx(self, tx: Transaction):
        self.broadcast[tx.tx_id] = tx
        op = self._deposit_op(tx)
        if op is not None:
            self.deposit_ops[tx.tx_id] = op
            self.last_case = CASE_UNRELATED_MESSAGE
            return None
        keys = self.maps.keys
        first = self._live(tx.inputs[0]) if tx.inputs else None
        if first is not None and self.config.contract(first) is not None:
            found = reconstruct_advertisement(tx, self.chain, self.maps.txout, self.program, keys)
            adv = found.adv if found else None
        else:
            found = reconstruct_init(tx, self.chain, self.maps.txout, self.program, keys)
            adv = found.adv if found else self._destroy_adv(tx)
        if adv is None:
            self.last_case = CASE_UNRELATED_MESSAGE
            return None
        act = Adv(adv)
        self.last_case = coherence_case(act)
        if self._step(act) is None:
            return None
        self.maps.prev_tx[adv] = tx.tx_id
        self.advs_by_tx.setdefault(tx.tx_id, []).append(adv)
        return act

    def _witness(self, sender, q: WitnessQuadruple):
        tx = self.broadcast.get(q.tx_id)
        if tx is None or not 1 <= q.input_index <= len(tx.inputs):
            self.last_case = CASE_UNRELATED_MESSAGE
            return None
        g = self.config
        keys = self.maps.keys
        op = self.deposit_ops.get(q.tx_id)
        if op is not None:
            self.last_case = f"auth-{op.kind}"
            if q.slot != 1 or not ledger.verify(keys.get(op.owner, b""), q.signature, tx):
                return None
            if op.kind == "join":
                act = AuthJoinAct(op.owner, op.deposits[0], op.deposits[1], q.input_index)
            elif op.kind == "divide":
                act = AuthDivideAct(op.owner, op.deposits[0], op.left, op.right)
            else:
                act = AuthDonateAct(op.owner, op.deposits[0], op.to)
            return act if self._step(act) is not None else None
        for adv in self.advs_by_tx.get(q.tx_id, []):
            if not g.has_advertisement(adv):
                continue
            if isinstance(adv, ContinueAdv) and q.input_index == 1:
                self.last_case = "auth-action"
                auths = [_const(e) for e in adv.branch.auths]
                if not 1 <= q.slot <= len(auths):
                    return None
                who = auths[q.slot - 1]
                if not ledger.verify(keys.get(who, b""), q.signature, tx):
                    return None
                act = AuthAct(who, adv)
            else:
                self.last_case = "auth-in"
                name = self._live(tx.inputs[q.input_index - 1])
                deposit = g.deposit(name) if name else None
                if q.slot != 1 or deposit is None or name not in adv.deposits:
                    return None
                if not ledger.verify(keys.get(deposit.owner, b""), q.signature, tx):
                    return None
                act = AuthIn(deposit.owner, name, adv)
            return act if self._step(act) is not None else None
        self.last_case = CASE_UNRELATED_MESSAGE
        return None

    def _theta(self, theta: Incomplete) -> Incomplete:
        names = self.maps.names_by_output()

        def name_of(ref):
            return names.get(ref, str(ref)) if isinstance(ref, OutRef) else ref

        adv = theta.adv
        adv = replace(adv, deposits=tuple(name_of(r) for r in adv.deposits))
        if isinstance(adv, ContinueAdv):
            adv = replace(adv, contract=name_of(adv.contract))
        return Incomplete(adv)

    def _append(self, tx: Transaction):
        try:
            self.chain = ledger.append(self.chain, tx, self.config.time)
        except LedgerError as e:
            raise RunError(f"transaction cannot be appended: {e.message}", code="InconsistentRun", cause=e.code)

    def _continuation(self, tx: Transaction):
        g = self.config
        for adv in self.advs_by_tx.get(tx.tx_id, []):
            if not g.has_advertisement(adv):
                continue
            if isinstance(adv, InitAdv):
                return Init(adv)
            if isinstance(adv, DestroyAdv):
                return Destroy(adv)
            if isinstance(adv.branch.terminal, CallTerm):
                return Call(adv)
            return Send(adv)
        op = self.deposit_ops.get(tx.tx_id)
        if op is None or not all(ref in self.maps.names_by_output() for ref in tx.inputs):
            return None
        if op.kind == "join":
            return Join(*op.deposits)
        if op.kind == "divide":
            return Divide(op.deposits[0], op.left, op.right)
        return Donate(op.deposits[0], op.to)

    def _transaction(self, tx: Transaction):
        mapped = [ref for ref in tx.inputs if self._live(ref) is not None]
        act = self._continuation(tx)
        self.last_case = coherence_case(act) if act is not None else CASE_UNRELATED_TX
        self._append(tx)
        if act is not None:
            before = self._step(act)
            if before is None:
                raise RunError(f"{act.label} of a broadcast advertisement is not enabled", code="InconsistentRun")
            self._bind_outputs(before, tx)
            return act
        if mapped:
            raise RunError(
                "transaction spends outputs of symbolic terms but was never advertised",
                code="UnclassifiableTransaction", tx=tx.tx_id.hex(),
            )
        return None

    def feed(self, label) -> Optional[object]:
        """Consume one computational label; returns the symbolic action it induces, if any"""
        if self.coinbase is None:
            if not isinstance(label, TxLabel) or label.tx.inputs:
                raise RunError("run does not start with a coinbase transaction", code="InconsistentRun")
            self.chain = ledger.append(self.chain, label.tx, 0)
            self.coinbase = label.tx
            self.last_case = CASE_BASE
            return None
        if self.run is None:
            if isinstance(label, BroadcastLabel) and isinstance(label.message, KeyAnnouncement):
                self.maps.keys.setdefault(label.message.participant, label.message.key)
                self.last_case = CASE_BASE
                return None
            self._start()

        if isinstance(label, DelayLabel):
            self.last_case = "delay"
            act = Delay(label.delta)
            if self._step(act) is None:
                raise RunError(f"invalid delay {label.delta}", code="InconsistentRun")
            return act
        if isinstance(label, TxLabel):
            return self._transaction(label.tx)
        message = label.message
        if isinstance(message, TxMessage):
            return self._classify_broadcast_tx(message.tx)
        if isinstance(message, WitnessQuadruple):
            return self._witness(label.sender, message)
        if isinstance(message, AdvMessage):
            self.last_case = "msg"
            act = Msg(self._theta(message.theta))
            return act if self._step(act) is not None else None
        self.last_case = CASE_UNRELATED_MESSAGE
        return None

    def finish(self) -> SymbolicRun:
        self._start()
        return self.run


def parse_run(rc: ComputationalRun, program: Program) -> Tuple[SymbolicRun, CoherenceMaps]:
    """The symbolic run coherent with ``rc``, unique up to renaming"""
    parser = RunParser(program)
    try:
        for label in rc.labels:
            parser.feed(label)
        return parser.finish(), parser.maps
    except IllumError as e:
        logger.error(f"❌ Failed to parse computational run: {e}")
        raise


# Renaming

_NAME_FIELDS = ("deposits", "contract", "deposit", "first", "second", "seen")
_RENAMED = (
    Configuration, Deposit, ActiveContract, InitAdv, ContinueAdv, DestroyAdv, Incomplete,
    Authorization, AuthDeposit, AuthAction, AuthJoin, AuthDivide, AuthDonate,
) + ACTION_CLASSES


def _rename_names(value, mapping):
    if isinstance(value, str):
        return mapping.get(value, value)
    if isinstance(value, frozenset):
        return frozenset(mapping.get(v, v) for v in value)
    return tuple(mapping.get(v, v) if isinstance(v, str) else rename(v, mapping) for v in value)


def rename(obj, mapping: Dict[str, str]):
    """Rename deposit and contract names inside configurations, advertisements and actions"""
    if isinstance(obj, tuple):
        return tuple(rename(o, mapping) for o in obj)
    if not isinstance(obj, _RENAMED):
        return obj
    changes = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if f.name in _NAME_FIELDS or (f.name == "name" and isinstance(obj, (Deposit, ActiveContract))):
            changes[f.name] = _rename_names(value, mapping)
        else:
            changes[f.name] = rename(value, mapping)
    return replace(obj, **changes)


class _Namer:
    def __init__(self):
        self.mapping: Dict[str, str] = {}

    def add(self, names):
        for name in names:
            if name not in self.mapping:
                self.mapping[name] = f"x{len(self.mapping) + 1}"


def canonical_names(run: SymbolicRun) -> SymbolicRun:
    """Rename deposits and contracts to x1, x2, ... in order of first appearance"""
    namer = _Namer()
    namer.add(run.initial.names())
    before = run.initial
    for after in run.configurations:
        namer.add(created_names(before, after))
        before = after
    m = namer.mapping
    return SymbolicRun(
        rename(replace(run.initial, seen=frozenset(), counter=0), m),
        rename(run.actions, m),
        tuple(rename(replace(g, seen=frozenset(), counter=0), m) for g in run.configurations),
    )


# Checking

def _replay_failure(rs: SymbolicRun, program: Program) -> Optional[CounterExample]:
    if len(rs.configurations) != len(rs.actions):
        return CounterExample(0, -1, CASE_BASE, "symbolic run has one configuration per action")
    g = rs.initial
    for i, act in enumerate(rs.actions):
        try:
            g = step(g, act, program)
        except RuleNotEnabled as e:
            return CounterExample(i, -1, coherence_case(act), f"symbolic run does not replay: {e.message}")
        if g != rs.configurations[i]:
            return CounterExample(i, -1, coherence_case(act), "recorded configuration differs from the replayed one")
    return None


def check_coherence(rs: SymbolicRun, rc: ComputationalRun, maps: Optional[CoherenceMaps],
                    program: Program) -> Union[Ok, CounterExample]:
    """Replay both runs in lockstep; the first divergence is reported as a CounterExample.

    A mismatch names the case of the expected symbolic step. A computational label that cannot
    be read names the case the parser was checking it against.
    """
    failure = _replay_failure(rs, program)
    if failure is not None:
        return failure

    parser = RunParser(program)
    ours, theirs = _Namer(), _Namer()
    theirs.add(rs.initial.names())
    created_by = {name: CASE_BASE for name in rs.initial.names()}
    based = False
    sym_before = rs.initial
    index = 0
    for k, label in enumerate(rc.labels):
        try:
            act = parser.feed(label)
        except IllumError as e:
            return CounterExample(index, k, parser.last_case, e.message)
        if parser.run is not None and not based:
            based = True
            ours.add(parser.run.initial.names())
            if _initial_form(parser.run.initial, ours) != _initial_form(rs.initial, theirs):
                return CounterExample(0, k, CASE_BASE, "initial configurations differ")
        if act is None:
            continue
        if index >= len(rs.actions):
            return CounterExample(index, k, parser.last_case, f"computational {act.label} has no symbolic counterpart")
        expected = rs.actions[index]
        sym_after = rs.configurations[index]
        previous = parser.run.configurations[-2] if len(parser.run) > 1 else parser.run.initial
        ours.add(created_names(previous, parser.run.final))
        created = created_names(sym_before, sym_after)
        theirs.add(created)
        created_by.update((name, coherence_case(expected)) for name in created)
        if rename(act, ours.mapping) != rename(expected, theirs.mapping):
            return CounterExample(
                index, k, coherence_case(expected),
                f"expected {expected.label}, computational run induces {act.label}",
            )
        sym_before = sym_after
        index += 1
    try:
        run = parser.finish()
    except IllumError as e:
        return CounterExample(0, len(rc.labels), CASE_BASE, e.message)
    if not based:
        ours.add(run.initial.names())
        if _initial_form(run.initial, ours) != _initial_form(rs.initial, theirs):
            return CounterExample(0, len(rc.labels), CASE_BASE, "initial configurations differ")
    if index < len(rs.actions):
        return CounterExample(
            index, len(rc.labels), coherence_case(rs.actions[index]), "symbolic action without computational counterpart",
        )
    if maps is not None:
        inverse = {v: k for k, v in theirs.mapping.items()}
        for ours_name, canonical in ours.mapping.items():
            theirs_name = inverse.get(canonical)
            if theirs_name in maps.txout and maps.txout[theirs_name] != parser.maps.txout.get(ours_name):
                return CounterExample(
                    index, len(rc.labels), created_by.get(theirs_name, CASE_BASE),
                    f"{theirs_name} is mapped to another output",
                )
    return Ok()


def _initial_form(g: Configuration, namer: _Namer):
    return rename(replace(g, seen=frozenset(), counter=0), namer.mapping)


def check_balance_preservation(rs: SymbolicRun, rc: ComputationalRun, maps: CoherenceMaps) -> BalanceReport:
    """Live terms sit on unspent outputs of equal value; the destroyed counter covers unmapped funds"""
    chain = Blockchain()
    g = rs.final
    time = 0
    violations: List[BalanceViolation] = []
    for label in rc.labels:
        if isinstance(label, DelayLabel):
            time += label.delta
        elif isinstance(label, TxLabel):
            try:
                chain = ledger.append(chain, label.tx, time)
            except LedgerError as e:
                violations.append(BalanceViolation("chain", label.tx.tx_id.hex()[:12], e.message))
                return BalanceReport(False, tuple(violations))
    live = set(g.names())
    for d in g.deposits:
        _check_term(chain, maps, d.name, d.value, violations)
    for c in g.contracts:
        _check_term(chain, maps, c.name, c.balance, violations)
    for name, ref in maps.txout.items():
        if name not in live and chain.is_unspent(ref):
            violations.append(BalanceViolation(name, str(ref), "consumed term has an unspent output"))
    mapped = set(maps.txout.values())
    unmapped = ZERO
    for tx_id, index, output in ledger.utxo_set(chain):
        if OutRef(tx_id, index) not in mapped:
            unmapped = unmapped + output.value
    if not g.destroyed.covers(unmapped):
        violations.append(BalanceViolation(
            "destroyed", "unmapped", f"counter {g.destroyed} below unmapped unspent value {unmapped}",
        ))
    return BalanceReport(not violations, tuple(violations))


def _check_term(chain: Blockchain, maps: CoherenceMaps, name: str, value: TokenBag, violations: List[BalanceViolation]):
    ref = maps.txout.get(name)
    if ref is None:
        violations.append(BalanceViolation(name, "-", "term has no output"))
        return
    if not chain.is_unspent(ref):
        violations.append(BalanceViolation(name, str(ref), "output is spent or missing"))
        return
    if chain.resolve(ref).value != value:
        violations.append(BalanceViolation(name, str(ref), f"output holds {chain.resolve(ref).value}, term holds {value}"))
